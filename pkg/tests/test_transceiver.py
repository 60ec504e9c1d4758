import math
import warnings

import numpy as np
import pytest

from fdsic.channel import AuxChannel, ChannelModelConfig, ChannelRealization, gen_channel
from fdsic.impairments import NoiseConfig, NoiseTableClampWarning, PhaseNoiseConfig, linear, third_order
from fdsic.signal_core import FrameStructure, measure_power_dbm, ofdm_modulate, random_frame_grid
from fdsic.transceiver import GROUND_TRUTH_TERMS, TransceiverConfig, receive, transmit, transmit_detailed

FRAME = FrameStructure(2, 10)


def grid(seed=0, frame=FRAME):
    return random_frame_grid(frame, np.random.default_rng(seed))


def flat(gain, n_symbols=FRAME.n_symbols):
    return ChannelRealization(np.full((n_symbols, 1), complex(gain)), los=complex(gain))


class TestTransmit:
    def test_ideal_output_is_scaled_ofdm(self):
        g = grid()
        out = transmit(g, TransceiverConfig.ideal(20.0), 1)
        np.testing.assert_allclose(out.samples, ofdm_modulate(g).samples * 10.0, atol=1e-12)

    def test_phase_noise_keeps_magnitude(self):
        cfg = TransceiverConfig.ideal(tx_phase_noise=PhaseNoiseConfig())
        tx = transmit_detailed(grid(), cfg, 2)
        np.testing.assert_allclose(np.abs(tx.with_pn.samples), np.abs(tx.clean.samples))
        assert np.ptp(tx.phi) > 0

    def test_pa_distortion_level(self):
        cfg = TransceiverConfig.ideal(tx_nonlinearity=third_order(-45.0))
        tx = transmit_detailed(grid(frame=FrameStructure(0, 200)), cfg, 3)
        ratio = measure_power_dbm(tx.distortion) - measure_power_dbm(tx.with_pn)
        assert ratio == pytest.approx(-45.0, abs=0.5)
        np.testing.assert_allclose(tx.output.samples, tx.pa.alpha1 * tx.with_pn.samples + tx.distortion.samples)

    def test_deterministic(self):
        cfg = TransceiverConfig()
        np.testing.assert_array_equal(transmit(grid(), cfg, 5).samples, transmit(grid(), cfg, 5).samples)

    def test_aux_splitter_gain(self):
        cfg = TransceiverConfig(tx_power_dbm=20.0, aux_input_power_dbm=-25.0)
        assert 20 * math.log10(cfg.aux_channel().gain) == pytest.approx(-45.0)


class TestReceive:
    def test_identical_flat_chains_give_identical_outputs(self):
        cfg = TransceiverConfig.ideal(rx_phase_noise=PhaseNoiseConfig())
        y = transmit(grid(), cfg, 0)
        aux = cfg.aux_channel()
        r = receive(y, flat(aux.gain), aux, None, cfg, 0, FRAME)
        np.testing.assert_allclose(r.y_ord.symbols, r.y_aux.symbols, atol=1e-14)

    def test_flat_channel_ratio_with_shared_pll(self):
        cfg = TransceiverConfig.ideal(tx_phase_noise=PhaseNoiseConfig(), rx_phase_noise=PhaseNoiseConfig())
        y = transmit(grid(), cfg, 0)
        h = 0.03 * np.exp(0.4j)
        r = receive(y, flat(h), cfg.aux_channel(), None, cfg, 0, FRAME)
        np.testing.assert_allclose(r.y_ord.symbols / r.y_aux.symbols, h / cfg.aux_channel().gain, rtol=1e-9)

    def test_shared_pll_contract(self):
        base = dict(rx_phase_noise=PhaseNoiseConfig())
        y = transmit(grid(), TransceiverConfig.ideal(**base), 0)
        shared = receive(y, flat(1.0), AuxChannel(), None, TransceiverConfig.ideal(**base), 4, FRAME)
        assert shared.phi_rx is shared.phi_rx_aux
        split = receive(y, flat(1.0), AuxChannel(), None, TransceiverConfig.ideal(share_pll=False, **base), 4, FRAME)
        assert not np.allclose(split.phi_rx, split.phi_rx_aux)
        np.testing.assert_array_equal(split.phi_rx, shared.phi_rx)

    def test_ground_truth_additivity(self):
        cfg = TransceiverConfig()
        g = grid()
        tx = transmit_detailed(g, cfg, 7)
        ch = gen_channel(ChannelModelConfig("TGn-D", total_gain_db=-45.0), FRAME.n_symbols, 1)
        soi = ofdm_modulate(grid(9)).scaled(1e-4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoiseTableClampWarning)
            r = receive(tx.output, ch, cfg.aux_channel(), soi, cfg, 7, FRAME, tx=tx)
        assert set(r.ground_truth) == set(GROUND_TRUTH_TERMS)
        err = np.abs(r.reconstructed_ord() - r.y_ord.symbols)
        assert err.max() <= 1e-8 * np.abs(r.y_ord.symbols).max()
        aux_sum = sum(t.symbols for t in r.aux_ground_truth.values())
        np.testing.assert_allclose(aux_sum, r.y_aux.symbols, atol=1e-8 * np.abs(r.y_aux.symbols).max())

    @pytest.mark.filterwarnings("ignore::fdsic.impairments.NoiseTableClampWarning")
    def test_noise_level_follows_input_power(self):
        # -5 dBm at the ordinary receiver input maps to -72 dBm of noise
        cfg = TransceiverConfig.ideal(tx_power_dbm=20.0, ord_noise=NoiseConfig(adc_bits=None))
        y = transmit(grid(frame=FrameStructure(0, 400)), cfg, 0)
        r = receive(y, flat(10 ** (-25 / 20), 400), cfg.aux_channel(), None, cfg, 0)
        assert r.info["ord_input_dbm"] == pytest.approx(-5.0, abs=0.2)
        assert r.info["ord_noise_dbm"] == pytest.approx(-72.0, abs=0.2)
        noise = r.ground_truth["gaussian"].symbols
        assert 10 * np.log10(np.mean(np.abs(noise) ** 2)) == pytest.approx(-72.0, abs=0.3)

    def test_lna_distortion_calibrated_on_si(self):
        cfg = TransceiverConfig.ideal(rx_lna_nonlinearity=third_order(-45.0))
        y = transmit(grid(frame=FrameStructure(0, 200)), cfg, 0)
        ch = flat(10 ** (-4), 200)
        r = receive(y, ch, cfg.aux_channel(), None, cfg, 0)
        d = np.mean(np.abs(r.ground_truth["rx_distortion"].symbols) ** 2)
        s = np.mean(np.abs(r.ground_truth["linear_si"].symbols) ** 2)
        assert 10 * np.log10(d / s) == pytest.approx(-45.0, abs=0.5)
        assert r.info["lna_alpha3"] != 0

    def test_soi_length_mismatch(self):
        cfg = TransceiverConfig.ideal()
        y = transmit(grid(), cfg, 0)
        with pytest.raises(ValueError):
            receive(y, flat(1.0), AuxChannel(), ofdm_modulate(grid(frame=FrameStructure(1, 1))), cfg, 0, FRAME)

    def test_linear_lna_has_no_distortion_term(self):
        cfg = TransceiverConfig.ideal(rx_lna_nonlinearity=linear())
        r = receive(transmit(grid(), cfg, 0), flat(1e-3), cfg.aux_channel(), None, cfg, 0, FRAME)
        assert not r.ground_truth["rx_distortion"].symbols.any()
