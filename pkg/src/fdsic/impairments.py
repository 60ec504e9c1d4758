"""Transmitter/receiver imperfections: memoryless odd-order nonlinearity,
free-running (Wiener) and PLL (Ornstein-Uhlenbeck) phase noise, Gaussian
receiver noise driven by the input level, and ADC quantization.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping

import numpy as np
from scipy.signal import lfilter

from .signal_core import SAMPLE_RATE_HZ, ComplexSignal, db_to_lin

log = logging.getLogger(__name__)

BOLTZMANN_DBM_HZ = -174.0

# Receiver noise versus input power for an NI5791-class front end: -90 dBm
# up to -25 dBm input, -72 dBm at -5 dBm input (20 MHz bandwidth).
NI5791_NOISE_TABLE: tuple[tuple[float, float], ...] = (
    (-120.0, -90.0),
    (-25.0, -90.0),
    (-5.0, -72.0),
)


# --------------------------------------------------------------------------
# nonlinearity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NonlinearityConfig:
    """Odd-order memoryless polynomial ``y = sum_m a_m g |g|^(m-1)``.

    If ``target_distortion_dbc`` is set, :meth:`calibrated` replaces the
    third-order coefficient so that the distortion-to-linear power ratio on
    a reference signal equals the target.
    """

    coefficients: Mapping[int, complex] = field(default_factory=lambda: {1: 1.0})
    target_distortion_dbc: float | None = None

    def __post_init__(self):
        coeffs = {int(m): complex(a) for m, a in dict(self.coefficients).items()}
        for m in coeffs:
            if m < 1 or m % 2 == 0:
                raise ValueError(f"only odd orders contribute in-band distortion, got order {m}")
        if coeffs.get(1, 0) == 0:
            raise ValueError("linear coefficient alpha_1 must be non-zero")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def alpha1(self) -> complex:
        return self.coefficients[1]

    @property
    def alpha3(self) -> complex:
        return self.coefficients.get(3, 0j)

    @property
    def is_linear(self) -> bool:
        if self.target_distortion_dbc is not None:
            return math.isinf(self.target_distortion_dbc) and self.target_distortion_dbc < 0
        return all(a == 0 for m, a in self.coefficients.items() if m > 1)

    def calibrated(self, reference: ComplexSignal) -> NonlinearityConfig:
        if self.target_distortion_dbc is None:
            return self
        coeffs = dict(self.coefficients)
        coeffs[3] = calibrate_alpha3(reference, self.target_distortion_dbc, self.alpha1)
        return replace(self, coefficients=coeffs, target_distortion_dbc=None)


def linear() -> NonlinearityConfig:
    return NonlinearityConfig()


def third_order(target_dbc: float) -> NonlinearityConfig:
    return NonlinearityConfig({1: 1.0}, target_distortion_dbc=target_dbc)


def apply_nonlinearity(
    sig: ComplexSignal, cfg: NonlinearityConfig
) -> tuple[ComplexSignal, ComplexSignal]:
    """Return ``(output, output - alpha_1 * input)``."""
    g = sig.samples
    mag2 = np.abs(g) ** 2
    distortion = np.zeros_like(g)
    for m, a in sorted(cfg.coefficients.items()):
        if m == 1 or a == 0:
            continue
        distortion += a * g * mag2 ** ((m - 1) // 2)
    out = cfg.alpha1 * g + distortion
    return ComplexSignal(out, sig.sample_rate_hz), ComplexSignal(distortion, sig.sample_rate_hz)


def calibrate_alpha3(reference: ComplexSignal, target_dbc: float, alpha1: complex = 1.0) -> complex:
    """Third-order coefficient giving ``target_dbc`` of distortion on ``reference``.

    The sign is negative (gain compression). Power ratio is
    ``|a3|^2 E|g|^6 / (|a1|^2 E|g|^2)``, so scaling the reference amplitude by
    ``c`` scales the returned coefficient by ``1/c^2``.
    """
    g = reference.samples
    p2 = float(np.mean(np.abs(g) ** 2)) if g.size else 0.0
    if p2 == 0.0:
        raise ValueError("reference signal has zero power")
    if math.isinf(target_dbc) and target_dbc < 0:
        return 0j
    p6 = float(np.mean(np.abs(g) ** 6))
    ratio = float(db_to_lin(target_dbc))
    return complex(-abs(alpha1) * math.sqrt(ratio * p2 / p6))


def distortion_ratio_db(sig: ComplexSignal, cfg: NonlinearityConfig) -> float:
    out, dist = apply_nonlinearity(sig, cfg)
    lin_p = abs(cfg.alpha1) ** 2 * sig.power
    return float(10 * np.log10(dist.power / lin_p))


# --------------------------------------------------------------------------
# phase noise
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseNoiseConfig:
    """Oscillator phase-noise model.

    ``wiener``: free-running oscillator, increments ~ N(0, 4 pi^2 fc^2 C Ts).

    ``pll``: Wiener floor ``C`` plus one AR(1) (discretised Ornstein-Uhlenbeck)
    component per ``(pole_rad_s, weight)`` entry of ``pll_spectrum``.  A
    component with weight ``w`` has stationary phase variance
    ``4 pi^2 fc^2 w``, which reproduces the PLL autocorrelation
    ``exp(-2 pi^2 fc^2 (C Ts|k| + 2 sum w_i (1 - exp(-pole_i Ts |k|))))``.
    When ``target_inband_power_dbc`` is set every component is scaled by one
    common factor so that the stationary in-band power ``1 - exp(-var)`` hits
    the target.  The Wiener floor is not part of that figure.
    """

    model: Literal["wiener", "pll", "none"] = "pll"
    carrier_hz: float = 2.4e9
    sample_interval_s: float = 1.0 / SAMPLE_RATE_HZ
    oscillator_quality: float = 0.0
    pll_spectrum: tuple[tuple[float, float], ...] = ((2 * math.pi * 30e3, 1.0),)
    target_inband_power_dbc: float | None = -40.0
    initial_phase: float = 0.0

    @classmethod
    def from_3db_bandwidth(cls, f3db_hz: float, carrier_hz: float = 2.4e9, **kw) -> PhaseNoiseConfig:
        """Wiener oscillator with Lorentzian 3 dB bandwidth ``f3db_hz``."""
        return cls(model="wiener", carrier_hz=carrier_hz,
                   oscillator_quality=f3db_hz / (math.pi * carrier_hz**2),
                   pll_spectrum=(), target_inband_power_dbc=None, **kw)

    @property
    def increment_variance(self) -> float:
        return 4 * math.pi**2 * self.carrier_hz**2 * self.oscillator_quality * self.sample_interval_s

    def component_variances(self) -> np.ndarray:
        w = np.array([wt for _, wt in self.pll_spectrum], dtype=float)
        return 4 * math.pi**2 * self.carrier_hz**2 * w

    def scale(self) -> float:
        """Common amplitude factor applied to all phase components."""
        if self.model != "pll" or self.target_inband_power_dbc is None or not self.pll_spectrum:
            return 1.0
        var = float(np.sum(self.component_variances()))
        if var <= 0:
            raise ValueError("pll_spectrum weights must be positive to calibrate")
        target = float(db_to_lin(self.target_inband_power_dbc))
        if not 0 < target < 1:
            raise ValueError("target in-band phase-noise power must be in (-inf, 0) dBc")
        return math.sqrt(-math.log1p(-target) / var)

    def inband_power_dbc(self) -> float:
        """Stationary in-band power of exp(j phi) with the carrier line removed."""
        if self.model != "pll" or not self.pll_spectrum:
            return float("-inf")
        var = float(np.sum(self.component_variances())) * self.scale() ** 2
        return float(10 * np.log10(-math.expm1(-var)))

    def autocorrelation(self, lags: np.ndarray) -> np.ndarray:
        """E[exp(j (phi_{n+k} - phi_n))] for integer lags ``k``."""
        k = np.abs(np.asarray(lags, dtype=float))
        ts = self.sample_interval_s
        s2 = self.scale() ** 2
        var = s2 * 4 * math.pi**2 * self.carrier_hz**2 * self.oscillator_quality * ts * k
        if self.model == "pll":
            for (pole, w), v in zip(self.pll_spectrum, self.component_variances()):
                var = var + s2 * 2 * v * (1 - np.exp(-pole * ts * k))
        return np.exp(-var / 2)


def no_phase_noise() -> PhaseNoiseConfig:
    return PhaseNoiseConfig(model="none", pll_spectrum=(), target_inband_power_dbc=None)


def gen_phase_noise(n: int, cfg: PhaseNoiseConfig, rng_seed) -> np.ndarray:
    """Phase sequence (radians) of length ``n``; deterministic given the seed."""
    if n <= 0:
        raise ValueError("n must be positive")
    if cfg.oscillator_quality < 0:
        raise ValueError("oscillator quality C must be non-negative")
    phi = np.full(n, float(cfg.initial_phase))
    if cfg.model == "none":
        return phi
    if cfg.model == "pll" and not cfg.pll_spectrum and cfg.oscillator_quality > 0:
        raise ValueError("pll model needs a non-empty pll_spectrum")
    rng = np.random.default_rng(rng_seed)
    scale = cfg.scale()

    if cfg.oscillator_quality > 0:
        step = math.sqrt(cfg.increment_variance) * scale
        inc = rng.standard_normal(n) * step
        inc[0] = 0.0
        phi += np.cumsum(inc)

    if cfg.model == "pll":
        ts = cfg.sample_interval_s
        for (pole, _), var in zip(cfg.pll_spectrum, cfg.component_variances()):
            if pole <= 0:
                raise ValueError("PLL poles must be positive")
            sigma = math.sqrt(var) * scale
            a = math.exp(-pole * ts)
            start = rng.standard_normal() * sigma
            innov = rng.standard_normal(n) * sigma * math.sqrt(-math.expm1(-2 * pole * ts))
            phi += lfilter([1.0], [1.0, -a], innov, zi=[a * start])[0]
    return phi


def apply_phase_noise(sig: ComplexSignal, phi: np.ndarray) -> ComplexSignal:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (len(sig),):
        raise ValueError(f"phase sequence length {phi.size} != signal length {len(sig)}")
    return ComplexSignal(sig.samples * np.exp(1j * phi), sig.sample_rate_hz)


# --------------------------------------------------------------------------
# Gaussian and quantization noise
# --------------------------------------------------------------------------


class NoiseTableClampWarning(UserWarning):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    """Receiver noise settings.

    ``mode="table"`` interpolates ``noise_table`` (input dBm -> total noise
    dBm over the band) piecewise-linearly in dB. ``mode="analytic"`` uses
    the cascaded noise figure of an LNA followed by unity-gain stages.
    ``adc_bits=None`` disables quantization; ``full_scale="auto"`` sets the
    per-rail full scale to the ``clip_percentile`` of the rail magnitudes.
    """

    adc_bits: int | None = 14
    mode: Literal["table", "analytic", "off"] = "table"
    noise_table: tuple[tuple[float, float], ...] = NI5791_NOISE_TABLE
    full_scale: float | Literal["auto"] = "auto"
    clip_percentile: float = 100.0
    bandwidth_hz: float = SAMPLE_RATE_HZ
    nf_lna_db: float = 3.0
    stage_nf_db: tuple[float, ...] = (25.0,)
    adc_target_dbm: float = 0.0
    lna_gain_range_db: tuple[float, float] = (0.0, 60.0)

    def __post_init__(self):
        if self.mode == "table" and self.noise_table:
            p_in = [p for p, _ in self.noise_table]
            p_n = [n for _, n in self.noise_table]
            if any(np.diff(p_in) <= 0):
                raise ValueError("noise_table input powers must be strictly increasing")
            if any(np.diff(p_n) < 0):
                raise ValueError("noise_table must be non-decreasing in input power")

    def lna_gain_db(self, input_power_dbm: float) -> float:
        """AGC schedule holding the ADC input at ``adc_target_dbm``."""
        lo, hi = self.lna_gain_range_db
        return float(np.clip(self.adc_target_dbm - input_power_dbm, lo, hi))

    def noise_power_dbm(self, input_power_dbm: float) -> float:
        if self.mode == "off":
            return float("-inf")
        if self.mode == "analytic":
            return analytic_noise_power_dbm(
                self.nf_lna_db, self.stage_nf_db, self.lna_gain_db(input_power_dbm), self.bandwidth_hz
            )
        if not self.noise_table:
            raise ValueError("noise table is empty")
        p_in = np.array([p for p, _ in self.noise_table], dtype=float)
        p_n = np.array([n for _, n in self.noise_table], dtype=float)
        if len(p_in) > 1 and not p_in[0] <= input_power_dbm <= p_in[-1]:
            warnings.warn(
                f"input power {input_power_dbm:.1f} dBm outside noise table "
                f"[{p_in[0]:.1f}, {p_in[-1]:.1f}] dBm; clamping",
                NoiseTableClampWarning,
                stacklevel=2,
            )
        return float(np.interp(input_power_dbm, p_in, p_n))


def noise_figure_db(nf_lna_db: float, stage_nf_db, lna_gain_db: float) -> float:
    """Cascaded noise figure ``N_LNA + sum (N_l - 1) / G_LNA`` (linear terms)."""
    f = db_to_lin(nf_lna_db) + np.sum(db_to_lin(np.asarray(stage_nf_db, dtype=float)) - 1) / db_to_lin(lna_gain_db)
    return float(10 * np.log10(f))


def analytic_noise_power_dbm(nf_lna_db, stage_nf_db, lna_gain_db, bandwidth_hz=SAMPLE_RATE_HZ) -> float:
    return BOLTZMANN_DBM_HZ + 10 * math.log10(bandwidth_hz) + noise_figure_db(nf_lna_db, stage_nf_db, lna_gain_db)


def complex_gaussian(rng: np.random.Generator, n: int, power_mw: float) -> np.ndarray:
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(power_mw / 2)


def add_gaussian_noise(
    sig: ComplexSignal, cfg: NoiseConfig, input_power_dbm: float, rng_seed
) -> tuple[ComplexSignal, float]:
    """Add circular complex Gaussian noise at the level set by the input power."""
    noise_dbm = cfg.noise_power_dbm(input_power_dbm)
    if math.isinf(noise_dbm):
        return sig, noise_dbm
    rng = np.random.default_rng(rng_seed)
    z = complex_gaussian(rng, len(sig), float(db_to_lin(noise_dbm)))
    return ComplexSignal(sig.samples + z, sig.sample_rate_hz), noise_dbm


def quantization_noise_power_db(adc_bits: int, lna_gain_db: float = 0.0) -> float:
    """``10 log10(sigma_q^2 / G)`` with ``sigma_q^2 = 1 / (12 * 2^(2m-2))``."""
    return float(-10 * math.log10(12 * 2.0 ** (2 * adc_bits - 2)) - lna_gain_db)


# Fixed full scale: both rails at full scale carry 1 mW, so the complex
# quantization error power in mW equals sigma_q^2 exactly.
UNIT_FULL_SCALE = 1 / math.sqrt(2)


@dataclass(frozen=True)
class QuantizationResult:
    signal: ComplexSignal
    full_scale: float
    n_clipped: int

    adc_bits: int | None = None

    @property
    def step(self) -> float:
        """Quantizer step (LSB) referred to the input."""
        if self.adc_bits is None:
            return 0.0
        return 2 * self.full_scale / 2**self.adc_bits


def _quantize_rail(v: np.ndarray, step: float, levels: int) -> np.ndarray:
    idx = np.clip(np.floor(v / step), -levels // 2, levels // 2 - 1)
    return (idx + 0.5) * step


def quantize_detailed(sig: ComplexSignal, cfg: NoiseConfig, lna_gain_db: float = 0.0) -> QuantizationResult:
    m = cfg.adc_bits
    if m is None:
        return QuantizationResult(sig, float("inf"), 0)
    if m < 2:
        raise ValueError("ADC needs at least 2 bits")
    gain = 10 ** (lna_gain_db / 20)
    v = sig.samples * gain
    if cfg.full_scale == "auto":
        rails = np.abs(np.concatenate([v.real, v.imag]))
        fs = float(np.percentile(rails, cfg.clip_percentile)) if rails.size else 0.0
        if fs == 0.0:
            return QuantizationResult(sig, 0.0, 0)
    else:
        fs = float(cfg.full_scale)
    levels = 2**m
    step = 2 * fs / levels
    n_clipped = int(np.count_nonzero(np.abs(v.real) > fs) + np.count_nonzero(np.abs(v.imag) > fs))
    if n_clipped:
        log.debug("ADC clipped %d of %d rail samples", n_clipped, 2 * v.size)
    q = _quantize_rail(v.real, step, levels) + 1j * _quantize_rail(v.imag, step, levels)
    return QuantizationResult(ComplexSignal(q / gain, sig.sample_rate_hz), fs / gain, n_clipped, m)


def quantize(sig: ComplexSignal, cfg: NoiseConfig, lna_gain_db: float = 0.0) -> ComplexSignal:
    """Uniform mid-rise quantizer on I and Q with ``2**adc_bits`` levels each."""
    return quantize_detailed(sig, cfg, lna_gain_db).signal
