import math

import numpy as np
import pytest

from fdsic.metrics import average_rate_gain, full_duplex_rate, half_duplex_rate, rate_curve, residual_si_upper_bound


class TestBound:
    def test_reference_point(self):
        assert residual_si_upper_bound(20.0, -45.0, -40.0) == pytest.approx(-61.99, abs=0.005)

    def test_pure_los_leaves_nothing(self):
        assert residual_si_upper_bound(20.0, -math.inf, -40.0) == -math.inf

    def test_factor_of_two(self):
        assert residual_si_upper_bound(0.0, 0.0, 0.0) == pytest.approx(10 * math.log10(2))

    @pytest.mark.parametrize("shift", [1.0, 5.0, 10.0])
    def test_linear_in_each_argument(self, shift):
        base = residual_si_upper_bound(20.0, -40.0, -40.0)
        assert residual_si_upper_bound(20.0 + shift, -40.0, -40.0) - base == pytest.approx(shift)
        assert residual_si_upper_bound(20.0, -40.0 + shift, -40.0) - base == pytest.approx(shift)
        assert residual_si_upper_bound(20.0, -40.0, -40.0 + shift) - base == pytest.approx(shift)


class TestRates:
    @pytest.mark.parametrize("snr", [0.1, 1.0, 100.0])
    def test_full_duplex_doubles_half_duplex_at_equal_sinr(self, snr):
        assert full_duplex_rate([snr]) / half_duplex_rate([snr]) == pytest.approx(2.0)

    def test_full_duplex_value(self):
        assert full_duplex_rate([1.0, 3.0]) == pytest.approx(1.5)

    def test_rate_curve_unit_gain(self):
        # SNR grid value equals the per-subcarrier SNR against the floor
        floor = 1e-9
        r = rate_curve(np.full(4, floor), np.ones(4), [0.0, 10.0], floor)
        np.testing.assert_allclose(r, [1.0, math.log2(11)])

    def test_rate_curve_interference_lowers_rate(self):
        floor = 1e-9
        clean = rate_curve(np.full(4, floor), np.ones(4), [20.0], floor)
        dirty = rate_curve(np.full(4, 10 * floor), np.ones(4), [20.0], floor)
        assert dirty[0] < clean[0]

    def test_average_gain(self):
        assert average_rate_gain([2.0, 3.0], [1.0, 2.0]) == pytest.approx(0.75)
        assert math.isnan(average_rate_gain(None, [1.0]))
