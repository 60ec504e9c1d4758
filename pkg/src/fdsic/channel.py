"""Self-interference and signal-of-interest channels.

Taps sit on the 50 ns sample grid. The diffuse power follows an exponential
power-delay profile that has decayed by ``pdp_span_db`` at the profile's
maximum delay; the first tap additionally carries a non-fading LOS term
whose power is ``K`` times the total diffuse power. Diffuse taps fade with a
sum-of-sinusoids (random arrival angles), whose ensemble autocorrelation is
the Jakes ``J0(2 pi fD tau)``. Taps are held constant over each OFDM symbol.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .signal_core import CP_LEN, N_SUBCARRIERS, SAMPLE_RATE_HZ, ComplexSignal, db_to_lin

TGN_MAX_DELAY_NS = {"TGn-B": 80.0, "TGn-C": 200.0, "TGn-D": 390.0, "flat": 0.0}

Profile = Literal["TGn-B", "TGn-C", "TGn-D", "flat", "custom"]

SYMBOL_PERIOD_S = (N_SUBCARRIERS + CP_LEN) / SAMPLE_RATE_HZ


@dataclass(frozen=True)
class ChannelModelConfig:
    profile: Profile = "TGn-D"
    rician_factor_db: float = 0.0
    total_gain_db: float = 0.0
    doppler_hz: float = 5.0
    max_delay_ns: float | None = None
    custom_pdp_db: tuple[float, ...] = ()
    pdp_span_db: float = 20.0
    tap_spacing_s: float = 1.0 / SAMPLE_RATE_HZ
    symbol_period_s: float = SYMBOL_PERIOD_S
    n_sinusoids: int = 32

    def __post_init__(self):
        if self.profile not in (*TGN_MAX_DELAY_NS, "custom"):
            raise ValueError(f"unsupported channel profile {self.profile!r}")
        if self.profile == "custom" and not self.custom_pdp_db:
            raise ValueError("custom profile needs custom_pdp_db")
        if self.doppler_hz < 0:
            raise ValueError("doppler_hz must be non-negative")

    @property
    def delay_ns(self) -> float:
        if self.max_delay_ns is not None:
            return self.max_delay_ns
        if self.profile == "custom":
            return (len(self.custom_pdp_db) - 1) * self.tap_spacing_s * 1e9
        return TGN_MAX_DELAY_NS[self.profile]

    @property
    def n_taps(self) -> int:
        if self.profile == "custom":
            return len(self.custom_pdp_db)
        return int(math.ceil(self.delay_ns * 1e-9 / self.tap_spacing_s - 1e-9)) + 1

    def diffuse_profile(self) -> np.ndarray:
        """Relative diffuse tap powers, normalized to sum 1."""
        if self.profile == "custom":
            p = db_to_lin(np.asarray(self.custom_pdp_db, dtype=float))
        elif self.n_taps == 1:
            p = np.ones(1)
        else:
            tau = self.delay_ns * 1e-9 / math.log(db_to_lin(self.pdp_span_db))
            p = np.exp(-np.arange(self.n_taps) * self.tap_spacing_s / tau)
        return p / p.sum()

    def power_split(self) -> tuple[float, float]:
        """(LOS power, total diffuse power), linear, summing to the total gain."""
        g = float(db_to_lin(self.total_gain_db))
        k_db = self.rician_factor_db
        if math.isinf(k_db):
            return (g, 0.0) if k_db > 0 else (0.0, g)
        k = float(db_to_lin(k_db))
        return g * k / (1 + k), g / (1 + k)


@dataclass(frozen=True)
class ChannelRealization:
    """Taps over time, shape (n_symbols, n_taps); ``los`` sits on tap 0."""

    taps: np.ndarray
    los: complex = 0j
    n_subcarriers: int = N_SUBCARRIERS

    def __post_init__(self):
        taps = np.atleast_2d(np.asarray(self.taps, dtype=np.complex128))
        if taps.size == 0:
            raise ValueError("empty channel realization")
        if taps.shape[1] > self.n_subcarriers:
            raise ValueError("more taps than subcarriers")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def n_symbols(self) -> int:
        return self.taps.shape[0]

    @property
    def n_taps(self) -> int:
        return self.taps.shape[1]

    @property
    def nlos_taps(self) -> np.ndarray:
        t = np.array(self.taps)
        t[:, 0] -= self.los
        return t

    def freq_responses(self) -> np.ndarray:
        """Transfer function per symbol, shape (n_symbols, n_subcarriers)."""
        return np.fft.fft(self.taps, n=self.n_subcarriers, axis=1)

    def freq_response(self, t: int) -> np.ndarray:
        return self.freq_responses()[t]

    def nlos_freq_responses(self) -> np.ndarray:
        return np.fft.fft(self.nlos_taps, n=self.n_subcarriers, axis=1)

    @property
    def power(self) -> float:
        """Mean total tap power over time (linear)."""
        return float(np.mean(np.sum(np.abs(self.taps) ** 2, axis=1)))


@dataclass(frozen=True)
class AuxChannel:
    """Wired PA-to-auxiliary-receiver path; flat unless ``ripple`` is given."""

    gain: complex = 1.0
    ripple: np.ndarray | None = None

    def freq_response(self, n_subcarriers: int = N_SUBCARRIERS) -> np.ndarray:
        h = np.full(n_subcarriers, complex(self.gain))
        if self.ripple is not None:
            h = h * np.asarray(self.ripple)
        return h

    def as_realization(self, n_symbols: int, n_subcarriers: int = N_SUBCARRIERS) -> ChannelRealization:
        if self.ripple is None:
            taps = np.full((n_symbols, 1), complex(self.gain))
        else:
            taps = np.tile(np.fft.ifft(self.freq_response(n_subcarriers)), (n_symbols, 1))
        return ChannelRealization(taps, los=complex(self.gain), n_subcarriers=n_subcarriers)


def gen_channel(cfg: ChannelModelConfig, n_symbols: int, rng_seed) -> ChannelRealization:
    if n_symbols < 1:
        raise ValueError("n_symbols must be at least 1")
    rng = np.random.default_rng(rng_seed)
    p_los, p_diff = cfg.power_split()
    los = math.sqrt(p_los) * np.exp(2j * np.pi * rng.random())

    tap_powers = p_diff * cfg.diffuse_profile()
    d, s = cfg.n_taps, cfg.n_sinusoids
    t = np.arange(n_symbols) * cfg.symbol_period_s
    alpha = rng.uniform(0, 2 * np.pi, size=(d, s))
    theta = rng.uniform(0, 2 * np.pi, size=(d, s))
    doppler = 2 * np.pi * cfg.doppler_hz * np.cos(alpha)
    phase = doppler[None, :, :] * t[:, None, None] + theta[None, :, :]
    diffuse = np.exp(1j * phase).sum(axis=2) * np.sqrt(tap_powers / s)[None, :]
    taps = diffuse
    taps[:, 0] += los
    return ChannelRealization(taps, los=complex(los))


def apply_channel(
    sig: ComplexSignal, ch: ChannelRealization, samples_per_symbol: int = N_SUBCARRIERS + CP_LEN
) -> ComplexSignal:
    """Time-varying FIR: each output sample uses the taps of its own symbol."""
    x = sig.samples
    n = x.size
    n_sym = -(-n // samples_per_symbol)
    if n_sym > ch.n_symbols:
        raise ValueError(f"channel spans {ch.n_symbols} symbols, signal needs {n_sym}")
    taps = np.repeat(ch.taps[:n_sym], samples_per_symbol, axis=0)[:n]
    y = taps[:, 0] * x
    for d in range(1, ch.n_taps):
        y[d:] += taps[d:, d] * x[:-d]
    return ComplexSignal(y, sig.sample_rate_hz)


def frequency_correlation(ch: ChannelRealization) -> np.ndarray:
    """Normalized spectral autocorrelation R(dk), dk = 0..N-1, averaged over time."""
    h = ch.freq_responses()
    num = np.array([np.sum(h * np.conj(np.roll(h, -dk, axis=1))) for dk in range(h.shape[1])])
    den = np.sum(np.abs(h) ** 2)
    if den == 0:
        return np.ones(h.shape[1], dtype=complex)
    return num / den


def coherence_bandwidth(
    ch: ChannelRealization, threshold: float = 0.9, subcarrier_spacing_hz: float = SAMPLE_RATE_HZ / N_SUBCARRIERS
) -> float:
    """Widest offset over which |R(df)| stays at or above ``threshold``."""
    r = np.abs(frequency_correlation(ch))
    half = ch.n_subcarriers // 2
    below = np.nonzero(r[1 : half + 1] < threshold)[0]
    if below.size == 0:
        return ch.n_subcarriers * subcarrier_spacing_hz
    return float(below[0]) * subcarrier_spacing_hz


def dump_channel_csv(ch: ChannelRealization, path: str | Path) -> None:
    """Write (symbol_index, tap_index, re, im) rows."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["symbol_index", "tap_index", "re", "im"])
        for t in range(ch.n_symbols):
            for d in range(ch.n_taps):
                h = ch.taps[t, d]
                w.writerow([t, d, repr(float(h.real)), repr(float(h.imag))])
