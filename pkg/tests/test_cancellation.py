import numpy as np
import pytest

from fdsic.cancellation import (
    ChannelRatioEstimate,
    NonlinEstimate,
    TrainingPair,
    cancel,
    cancel_direct,
    distortion_basis,
    estimate_alpha3,
    estimate_channel_ratio,
    estimate_direct_channel,
    reconstruct_and_subtract,
)
from fdsic.channel import ChannelModelConfig, gen_channel
from fdsic.impairments import PhaseNoiseConfig
from fdsic.signal_core import FrameStructure, OfdmGrid, SymbolKind, qpsk, random_frame_grid
from fdsic.transceiver import TransceiverConfig, receive, transmit

N = 64


def cn(rng, shape, var=1.0):
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_channel(rng):
    return np.fft.fft(cn(rng, 6, 1 / 6), n=N)


def power_db(a):
    return 10 * np.log10(np.mean(np.abs(a) ** 2))


class TestChannelRatio:
    def test_exact_without_noise(self):
        rng = np.random.default_rng(0)
        h = random_channel(rng)
        ya = qpsk(rng, (N, 3)) * 5
        est = estimate_channel_ratio(ya, ya * h[:, None])
        np.testing.assert_allclose(est.h_hat, h, rtol=1e-12)
        assert est.n_averaged == 3 and est.n_excluded == 0

    @pytest.mark.parametrize("m", [1, 2, 4, 8])
    def test_error_variance_falls_as_one_over_m(self, m):
        rng = np.random.default_rng(m)
        sigma2 = 1e-3
        h = random_channel(rng)
        errs = []
        for _ in range(300):
            ya = qpsk(rng, (N, m))
            yo = ya * h[:, None] + cn(rng, (N, m), sigma2)
            errs.append(estimate_channel_ratio(ya, yo).h_hat - h)
        assert np.mean(np.abs(errs) ** 2) == pytest.approx(sigma2 / m, rel=0.05)

    def test_residual_is_sum_of_noise_powers(self):
        # exact ratio: residual = n_ord - H n_aux, so powers add
        rng = np.random.default_rng(3)
        h = 0.5 * np.exp(1j * rng.uniform(0, 2 * np.pi, N))
        x = qpsk(rng, (N, 2000))
        n_ord, n_aux = cn(rng, x.shape, 1e-6), cn(rng, x.shape, 2e-6)
        yo, ya = x * h[:, None] + n_ord, x + n_aux
        res = cancel(yo, ya, h).symbols
        expected = 10 * np.log10(1e-6 + 0.25 * 2e-6)
        assert power_db(res) == pytest.approx(expected, abs=0.3)

    def test_residual_independent_of_channel_strength(self):
        rng = np.random.default_rng(4)
        x = qpsk(rng, (N, 4))
        n = cn(rng, x.shape, 1e-6)
        weak, strong = random_channel(rng) * 1e-3, random_channel(rng) * 1e3 + 1e4
        out = []
        for h in (weak, strong):
            yo = x * h[:, None] + n
            est = estimate_channel_ratio(x[:, :2], yo[:, :2])
            out.append(cancel(yo[:, 2:], x[:, 2:], est).symbols)
        np.testing.assert_allclose(out[0], out[1], atol=1e-9)

    def test_exclusion_of_dead_subcarrier(self):
        ya = np.ones((N, 2), dtype=complex)
        ya[5] = 0
        est = estimate_channel_ratio(ya, 2 * ya)
        assert est.excluded[5] and est.h_hat[5] == 0 and est.n_excluded == 1

    @pytest.mark.parametrize(
        "ya,yo", [(np.ones((N, 2)), np.ones((N, 3))), (np.ones((N, 0)), np.ones((N, 0)))]
    )
    def test_shape_errors(self, ya, yo):
        with pytest.raises(ValueError):
            estimate_channel_ratio(ya, yo)

    def test_cancel_rejects_wrong_estimate_shape(self):
        with pytest.raises(ValueError):
            cancel(np.ones((N, 2)), np.ones((N, 2)), np.ones(32))
        with pytest.raises(ValueError):
            cancel(np.ones((N, 2)), np.ones((N, 3)), np.ones(N))

    def test_non_finite_estimate_rejected(self):
        with pytest.raises(ValueError):
            ChannelRatioEstimate(np.array([np.nan]))

    def test_cancel_keeps_grid_kinds(self):
        g = random_frame_grid(FrameStructure(1, 2), np.random.default_rng(0))
        out = cancel(g, g, np.ones(N))
        assert out.kinds == g.kinds and not out.symbols.any()

    def test_flat_channel_phase_noise_cancels(self):
        # shared PLL on a flat channel: the aux copy carries the same phase noise
        cfg = TransceiverConfig.ideal(tx_phase_noise=PhaseNoiseConfig(), rx_phase_noise=PhaseNoiseConfig())
        frame = FrameStructure(2, 20)
        g = random_frame_grid(frame, np.random.default_rng(1))
        y = transmit(g, cfg, 1)
        ch = gen_channel(ChannelModelConfig("flat", rician_factor_db=np.inf, total_gain_db=-40.0), frame.n_symbols, 2)
        r = receive(y, ch, cfg.aux_channel(), None, cfg, 1, frame)
        tr = r.y_ord.indices(SymbolKind.TRAINING)
        est = estimate_channel_ratio(r.y_aux.symbols[:, tr], r.y_ord.symbols[:, tr])
        res = cancel(r.y_ord.select(SymbolKind.DATA), r.y_aux.select(SymbolKind.DATA), est).symbols
        si = r.y_ord.select(SymbolKind.DATA).symbols
        assert power_db(res) - power_db(si) < -100


def nonlinear_link(alpha3, m=2, seed=0, n_data=5):
    """Frequency-domain model: aux sees X, ordinary sees X H + alpha3 D(X, H)."""
    rng = np.random.default_rng(seed)
    h = random_channel(rng)
    x = qpsk(rng, (N, m + 1 + n_data))
    yo = x * h[:, None] + alpha3 * distortion_basis(x, h)
    return h, x, yo


class TestNonlinearity:
    def _estimate(self, alpha3, m=2, **kw):
        h, x, yo = nonlinear_link(alpha3, m)
        est = estimate_channel_ratio(x[:, :m], yo[:, :m])
        tr1 = TrainingPair(yo[:, :m], x[:, :m], x[:, :m])
        tr2 = TrainingPair(yo[:, m : m + 1], x[:, m : m + 1], x[:, m : m + 1])
        return h, x, yo, est, estimate_alpha3(tr1, tr2, est.h_hat, est, **kw)

    def test_linear_receiver_gives_zero(self):
        *_, nl = self._estimate(0.0)
        assert abs(nl.alpha3_hat) < 1e-12

    @pytest.mark.parametrize("alpha3", [-0.05 + 0.01j, -0.01, 0.002j])
    def test_recovers_coefficient(self, alpha3):
        *_, nl = self._estimate(alpha3, refine_iterations=8)
        assert abs(nl.alpha3_hat - alpha3) / abs(alpha3) < 1e-6

    def test_refinement_improves_on_single_pass(self):
        alpha3 = -0.05
        *_, single = self._estimate(alpha3, refine_iterations=0)
        *_, refined = self._estimate(alpha3, refine_iterations=3)
        assert abs(refined.alpha3_hat - alpha3) < abs(single.alpha3_hat - alpha3) / 10

    def test_reconstruction_removes_distortion(self):
        alpha3, m = -0.01 + 0.003j, 2
        h, x, yo, est, nl = self._estimate(alpha3, m, refine_iterations=8)
        data = slice(m + 1, None)
        y_dc = cancel(yo[:, data], x[:, data], est)
        before = power_db(y_dc.symbols)
        after = power_db(reconstruct_and_subtract(y_dc, x[:, data], nl).symbols)
        assert after - power_db(yo[:, data]) < -120
        assert before - after > 60

    def test_genie_estimate_uses_no_training_term(self):
        alpha3, m = -0.02, 2
        h, x, yo = nonlinear_link(alpha3, m)
        genie = ChannelRatioEstimate(h, from_training=False)
        tr1 = TrainingPair(yo[:, :m], x[:, :m], x[:, :m])
        tr2 = TrainingPair(yo[:, m : m + 1], x[:, m : m + 1], x[:, m : m + 1])
        nl = estimate_alpha3(tr1, tr2, h, genie)
        assert not nl.training_term.any()
        assert nl.alpha3_hat == pytest.approx(alpha3, rel=1e-9)

    def test_none_estimate_is_identity(self):
        y = OfdmGrid(np.ones((N, 2)))
        out = reconstruct_and_subtract(y, np.ones((N, 2)), NonlinEstimate.none(N))
        np.testing.assert_array_equal(out.symbols, y.symbols)

    def test_degenerate_pair_rejected(self):
        h, x, yo = nonlinear_link(-0.01)
        est = estimate_channel_ratio(x[:, :1], yo[:, :1])
        tr1 = TrainingPair(yo[:, :1], x[:, :1], x[:, :1])
        tr2 = TrainingPair(yo[:, :1], x[:, :1], -1j * x[:, :1])
        with pytest.raises(ValueError, match="degenerate"):
            estimate_alpha3(tr1, tr2, est.h_hat, est)

    def test_second_set_must_be_one_symbol(self):
        h, x, yo = nonlinear_link(-0.01)
        est = estimate_channel_ratio(x[:, :2], yo[:, :2])
        tr = TrainingPair(yo[:, :2], x[:, :2], x[:, :2])
        with pytest.raises(ValueError):
            estimate_alpha3(tr, tr, est.h_hat, est)

    def test_zero_training_subcarrier_rejected(self):
        h, x, yo = nonlinear_link(-0.01)
        x0 = x.copy()
        x0[3, 0] = 0
        est = estimate_channel_ratio(x[:, :1], yo[:, :1])
        with pytest.raises(ValueError):
            estimate_alpha3(TrainingPair(yo[:, :1], x0[:, :1], x0[:, :1]), TrainingPair(yo[:, 1:2], x[:, 1:2], x[:, 1:2]), est.h_hat, est)

    def test_reconstruct_shape_mismatch(self):
        with pytest.raises(ValueError):
            reconstruct_and_subtract(np.ones((N, 2)), np.ones((N, 3)), NonlinEstimate.none(N))

    def test_distortion_basis_shape_check(self):
        with pytest.raises(ValueError):
            distortion_basis(np.ones((N, 2)), np.ones((32,)))

    def test_distortion_basis_of_constant_envelope(self):
        # a single active subcarrier has constant envelope, so u|u|^2 = |u|^2 u
        x = np.zeros((N, 1), dtype=complex)
        x[7] = 8.0
        d = distortion_basis(x, np.ones(N))
        np.testing.assert_allclose(d[:, 0], x[:, 0], atol=1e-12)


class TestDirect:
    def test_direct_estimate_and_cancel(self):
        rng = np.random.default_rng(9)
        h = random_channel(rng)
        x = qpsk(rng, (N, 4))
        yo = x * h[:, None]
        np.testing.assert_allclose(estimate_direct_channel(yo[:, :2], x[:, :2]), h)
        assert not np.any(np.abs(cancel_direct(yo, x, h).symbols) > 1e-12)

    def test_direct_shape_mismatch(self):
        with pytest.raises(ValueError):
            estimate_direct_channel(np.ones((N, 2)), np.ones((N, 1)))
