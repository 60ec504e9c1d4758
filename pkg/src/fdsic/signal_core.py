"""Complex baseband containers, OFDM (de)modulation and power helpers.

Conventions used throughout the package:

* Sample amplitudes are in sqrt(mW), so ``mean(|s|**2)`` is the power in mW
  and ``10*log10`` of it is dBm. ``measure_power_dbm`` takes an extra offset
  for callers that keep signals normalized to unit power.
* The DFT is unitary (``norm="ortho"``). A grid with unit power per
  subcarrier therefore modulates to a time-domain body of unit power, and
  per-subcarrier powers read directly in the same units as sample powers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

N_SUBCARRIERS = 64
CP_LEN = 16
SAMPLE_RATE_HZ = 20e6


class SymbolKind(str, Enum):
    TRAINING = "training"
    NONLIN_TRAINING = "nonlin_training"
    DATA = "data"


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin_to_db(lin):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(lin, dtype=float))


def dbm_to_mw(dbm):
    return db_to_lin(dbm)


def mw_to_dbm(mw):
    return lin_to_db(mw)


def power_sum_dbm(*levels_dbm: float) -> float:
    """Sum uncorrelated powers given in dBm."""
    return float(mw_to_dbm(np.sum(dbm_to_mw(np.asarray(levels_dbm, dtype=float)))))


@dataclass(frozen=True)
class ComplexSignal:
    samples: np.ndarray
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        s = np.ascontiguousarray(np.asarray(self.samples, dtype=np.complex128).ravel())
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power(self) -> float:
        """Mean |s|^2 (mW in absolute units)."""
        if self.samples.size == 0:
            raise ValueError("power of an empty signal is undefined")
        return float(np.mean(np.abs(self.samples) ** 2))

    def scaled(self, factor: complex) -> ComplexSignal:
        return ComplexSignal(self.samples * factor, self.sample_rate_hz)

    def __add__(self, other: ComplexSignal) -> ComplexSignal:
        if len(self) != len(other):
            raise ValueError("cannot add signals of different length")
        return ComplexSignal(self.samples + other.samples, self.sample_rate_hz)

    def __sub__(self, other: ComplexSignal) -> ComplexSignal:
        if len(self) != len(other):
            raise ValueError("cannot subtract signals of different length")
        return ComplexSignal(self.samples - other.samples, self.sample_rate_hz)


@dataclass(frozen=True)
class FrameStructure:
    """Preamble-based frame: ``n_training`` channel-estimation symbols, an
    optional nonlinearity-training symbol, then ``n_data`` data symbols."""

    n_training: int = 2
    n_data: int = 50
    n_nonlin_training: int = 0

    def __post_init__(self):
        if self.n_training < 0 or self.n_data < 0 or self.n_nonlin_training < 0:
            raise ValueError("symbol counts must be non-negative")

    @property
    def n_symbols(self) -> int:
        return self.n_training + self.n_nonlin_training + self.n_data

    @property
    def training_overhead(self) -> float:
        if self.n_data == 0:
            return float("inf")
        return self.n_training / self.n_data

    @property
    def kinds(self) -> tuple[SymbolKind, ...]:
        return (
            (SymbolKind.TRAINING,) * self.n_training
            + (SymbolKind.NONLIN_TRAINING,) * self.n_nonlin_training
            + (SymbolKind.DATA,) * self.n_data
        )

    @classmethod
    def for_overhead(cls, n_training: int, overhead: float = 0.04, **kw) -> FrameStructure:
        n_data = int(round(n_training / overhead))
        return cls(n_training=n_training, n_data=n_data, **kw)


@dataclass(frozen=True)
class OfdmGrid:
    """Frequency-domain symbols, shape (n_subcarriers, n_symbols)."""

    symbols: np.ndarray
    cp_len: int = CP_LEN
    kinds: tuple[SymbolKind, ...] = field(default=())

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=np.complex128)
        if sym.ndim == 1:
            sym = sym[:, None]
        if sym.ndim != 2 or sym.shape[0] == 0:
            raise ValueError("symbols must be a non-empty (N, L) matrix")
        sym = np.ascontiguousarray(sym)
        sym.setflags(write=False)
        object.__setattr__(self, "symbols", sym)
        kinds = tuple(SymbolKind(k) for k in self.kinds) if self.kinds else (SymbolKind.DATA,) * sym.shape[1]
        if len(kinds) != sym.shape[1]:
            raise ValueError(f"{len(kinds)} symbol kinds given for {sym.shape[1]} symbols")
        object.__setattr__(self, "kinds", kinds)
        if self.cp_len < 0:
            raise ValueError("cp_len must be non-negative")

    @property
    def n_subcarriers(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[1]

    @property
    def power(self) -> float:
        return float(np.mean(np.abs(self.symbols) ** 2))

    def indices(self, kind: SymbolKind) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.kinds) if k == kind], dtype=int)

    def select(self, kind: SymbolKind) -> OfdmGrid | None:
        idx = self.indices(kind)
        return OfdmGrid(self.symbols[:, idx], self.cp_len, (kind,) * idx.size) if idx.size else None

    def with_symbols(self, symbols: np.ndarray) -> OfdmGrid:
        return OfdmGrid(symbols, self.cp_len, self.kinds)


def qpsk(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-magnitude QPSK symbols."""
    bits = rng.integers(0, 2, size=(2,) + tuple(np.atleast_1d(shape)))
    return ((1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])) / np.sqrt(2)


def random_frame_grid(
    frame: FrameStructure,
    rng: np.random.Generator,
    n_subcarriers: int = N_SUBCARRIERS,
    cp_len: int = CP_LEN,
) -> OfdmGrid:
    """QPSK on every subcarrier for training and data symbols alike."""
    return OfdmGrid(qpsk(rng, (n_subcarriers, frame.n_symbols)), cp_len, frame.kinds)


def ofdm_modulate(grid: OfdmGrid, sample_rate_hz: float = SAMPLE_RATE_HZ) -> ComplexSignal:
    """Unitary IDFT per symbol with a cyclic prefix prepended.

    The body of each symbol carries exactly the grid power (Parseval); the
    prefix repeats the last ``cp_len`` body samples, so the mean power over
    the whole signal is the grid power only on average over random data.
    """
    n, cp = grid.n_subcarriers, grid.cp_len
    if cp >= n:
        raise ValueError(f"cp_len ({cp}) must be smaller than n_subcarriers ({n})")
    body = np.fft.ifft(grid.symbols, axis=0, norm="ortho")
    with_cp = np.concatenate([body[n - cp :, :], body], axis=0)
    return ComplexSignal(with_cp.T.ravel(), sample_rate_hz)


def ofdm_demodulate(
    sig: ComplexSignal,
    frame: FrameStructure | None = None,
    n_subcarriers: int = N_SUBCARRIERS,
    cp_len: int = CP_LEN,
) -> OfdmGrid:
    sym_len = n_subcarriers + cp_len
    n_samples = len(sig)
    if frame is not None:
        expected = frame.n_symbols * sym_len
        if n_samples != expected:
            raise ValueError(f"signal has {n_samples} samples, frame layout needs {expected}")
        kinds = frame.kinds
    else:
        if n_samples == 0 or n_samples % sym_len:
            raise ValueError(f"signal length {n_samples} is not a multiple of {sym_len}")
        kinds = ()
    blocks = sig.samples.reshape(-1, sym_len).T
    grid = np.fft.fft(blocks[cp_len:, :], axis=0, norm="ortho")
    return OfdmGrid(grid, cp_len, kinds)


def measure_power_dbm(sig: ComplexSignal, ref_dbm_at_unit_power: float = 0.0) -> float:
    if len(sig) == 0:
        raise ValueError("cannot measure the power of an empty signal")
    p = sig.power
    if p == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(p) + ref_dbm_at_unit_power)
