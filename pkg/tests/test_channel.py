import math

import numpy as np
import pytest
from scipy.special import j0

from fdsic.channel import (
    AuxChannel,
    ChannelModelConfig,
    ChannelRealization,
    apply_channel,
    coherence_bandwidth,
    dump_channel_csv,
    frequency_correlation,
    gen_channel,
)
from fdsic.signal_core import ComplexSignal


class TestConfig:
    @pytest.mark.parametrize("profile,taps", [("TGn-B", 3), ("TGn-C", 5), ("TGn-D", 9), ("flat", 1)])
    def test_tap_counts(self, profile, taps):
        assert ChannelModelConfig(profile).n_taps == taps

    @pytest.mark.parametrize("k_db,los,diffuse", [(0.0, 0.5, 0.5), (20.0, 100 / 101, 1 / 101), (-math.inf, 0.0, 1.0)])
    def test_power_split(self, k_db, los, diffuse):
        assert ChannelModelConfig(rician_factor_db=k_db).power_split() == pytest.approx((los, diffuse))

    def test_profile_decays_by_span(self):
        p = ChannelModelConfig("TGn-D").diffuse_profile()
        assert p.sum() == pytest.approx(1.0)
        assert 10 * np.log10(p[0] / p[-1]) == pytest.approx(20.0 * 8 * 50 / 390, rel=1e-9)

    def test_custom_profile(self):
        cfg = ChannelModelConfig("custom", custom_pdp_db=(0.0, -3.0))
        assert cfg.n_taps == 2
        np.testing.assert_allclose(cfg.diffuse_profile(), np.array([1, 10**-0.3]) / (1 + 10**-0.3))

    @pytest.mark.parametrize("kw", [{"profile": "TGn-Z"}, {"profile": "custom"}, {"doppler_hz": -1.0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ChannelModelConfig(**kw)


class TestGenChannel:
    def test_deterministic(self):
        cfg = ChannelModelConfig()
        np.testing.assert_array_equal(gen_channel(cfg, 4, 9).taps, gen_channel(cfg, 4, 9).taps)

    @pytest.mark.parametrize("k_db", [0.0, 10.0])
    def test_los_and_tap_powers(self, k_db):
        cfg = ChannelModelConfig("TGn-C", rician_factor_db=k_db, total_gain_db=-30.0, doppler_hz=0.0)
        chans = [gen_channel(cfg, 1, s) for s in range(4000)]
        p_los, p_diff = cfg.power_split()
        los = np.array([abs(c.los) ** 2 for c in chans])
        np.testing.assert_allclose(los, p_los)
        nlos = np.mean([np.abs(c.nlos_taps[0]) ** 2 for c in chans], axis=0)
        expected = p_diff * cfg.diffuse_profile()
        np.testing.assert_allclose(10 * np.log10(nlos), 10 * np.log10(expected), atol=0.3)
        total = np.mean([c.power for c in chans])
        assert 10 * np.log10(total) == pytest.approx(-30.0, abs=0.3)

    def test_measured_rician_factor(self):
        cfg = ChannelModelConfig("TGn-B", rician_factor_db=6.0, doppler_hz=0.0)
        chans = [gen_channel(cfg, 1, s) for s in range(4000)]
        p_diff = np.mean([np.sum(np.abs(c.nlos_taps) ** 2) for c in chans])
        p_los = np.mean([abs(c.los) ** 2 for c in chans])
        assert 10 * np.log10(p_los / p_diff) == pytest.approx(6.0, abs=0.3)

    def test_static_without_doppler(self):
        ch = gen_channel(ChannelModelConfig(doppler_hz=0.0), 20, 1)
        np.testing.assert_allclose(ch.taps, np.broadcast_to(ch.taps[0], ch.taps.shape))

    def test_jakes_autocorrelation(self):
        fd = 200.0
        cfg = ChannelModelConfig("flat", rician_factor_db=-math.inf, doppler_hz=fd)
        lags = np.array([0, 50, 150, 300])
        acc = np.zeros(lags.size, dtype=complex)
        n_real = 3000
        for s in range(n_real):
            h = gen_channel(cfg, 301, s).taps[:, 0]
            acc += h[lags] * np.conj(h[0])
        acc /= n_real
        expected = j0(2 * np.pi * fd * lags * cfg.symbol_period_s)
        np.testing.assert_allclose(acc.real, expected, atol=0.05)

    def test_rejects_zero_symbols(self):
        with pytest.raises(ValueError):
            gen_channel(ChannelModelConfig(), 0, 0)


class TestRealization:
    def test_freq_response_matches_direct_dft(self):
        ch = gen_channel(ChannelModelConfig("TGn-D"), 2, 3)
        k = np.arange(64)
        d = np.arange(ch.n_taps)
        direct = ch.taps[1] @ np.exp(-2j * np.pi * np.outer(d, k) / 64)
        np.testing.assert_allclose(ch.freq_response(1), direct, atol=1e-12)

    def test_read_only_taps(self):
        ch = ChannelRealization(np.ones((1, 2)))
        with pytest.raises(ValueError):
            ch.taps[0, 0] = 2

    def test_too_many_taps(self):
        with pytest.raises(ValueError):
            ChannelRealization(np.ones((1, 65)))

    def test_two_tap_coherence_bandwidth(self):
        # |R(dk)| = |cos(pi dk / N)| for two equal taps one sample apart
        ch = ChannelRealization(np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(np.abs(frequency_correlation(ch)), np.abs(np.cos(np.pi * np.arange(64) / 64)), atol=1e-12)
        expected = math.floor(64 * math.acos(0.9) / math.pi) * 312.5e3
        assert coherence_bandwidth(ch, 0.9) == pytest.approx(expected)

    def test_flat_channel_is_fully_coherent(self):
        assert coherence_bandwidth(ChannelRealization(np.array([[2.0]]))) == pytest.approx(20e6)

    def test_dump_csv(self, tmp_path):
        ch = ChannelRealization(np.array([[1 + 2j, 0.5], [3, -1j]]))
        path = tmp_path / "ch.csv"
        dump_channel_csv(ch, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "symbol_index,tap_index,re,im"
        assert len(lines) == 5
        assert lines[1] == "0,0,1.0,2.0"


class TestApplyChannel:
    def test_matches_convolution_for_static_channel(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(160) + 1j * rng.standard_normal(160)
        taps = np.array([1.0, 0.5j, -0.2])
        ch = ChannelRealization(np.tile(taps, (2, 1)))
        y = apply_channel(ComplexSignal(x), ch)
        np.testing.assert_allclose(y.samples, np.convolve(x, taps)[:160])

    def test_too_short_channel(self):
        with pytest.raises(ValueError):
            apply_channel(ComplexSignal(np.ones(161)), ChannelRealization(np.ones((2, 1))))

    def test_aux_channel_flat_gain(self):
        aux = AuxChannel(gain=0.1)
        np.testing.assert_allclose(aux.freq_response(), 0.1)
        x = ComplexSignal(np.ones(80))
        np.testing.assert_allclose(apply_channel(x, aux.as_realization(1)).samples, 0.1)

    def test_aux_channel_ripple(self):
        ripple = 1 + 0.1 * np.cos(2 * np.pi * np.arange(64) / 64)
        aux = AuxChannel(gain=2.0, ripple=ripple)
        np.testing.assert_allclose(aux.as_realization(1).freq_response(0), 2 * ripple, atol=1e-12)
