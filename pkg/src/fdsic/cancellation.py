"""Auxiliary-receiver digital cancellation and receiver-nonlinearity suppression.

The ordinary-to-auxiliary channel ratio is estimated per subcarrier by least
squares over the training symbols; the auxiliary copy (which already carries
the transmitter's phase noise and PA distortion) is scaled by that ratio and
subtracted. The LNA's third-order distortion is suppressed with a two-symbol
estimator of alpha3 followed by reconstruction from the known transmit data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .signal_core import OfdmGrid

log = logging.getLogger(__name__)

EXCLUSION_THRESHOLD = 1e-6


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, OfdmGrid):
        return np.asarray(x.symbols)
    a = np.asarray(x, dtype=np.complex128)
    return a[:, None] if a.ndim == 1 else a


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(a) ** 2))) if a.size else 0.0


@dataclass(frozen=True)
class ChannelRatioEstimate:
    """Per-subcarrier ratio estimate.

    ``h_hat`` has shape (N,) for a preamble estimate or (N, L) for a
    per-symbol (genie) estimate. Subcarriers where every training symbol was
    excluded are marked in ``excluded`` and carry 0. ``from_training`` is
    False for genie estimates that were not measured on received symbols.
    """

    h_hat: np.ndarray
    n_averaged: int = 1
    timestamp_symbol: int = 0
    excluded: np.ndarray | None = None
    from_training: bool = True

    def __post_init__(self):
        h = np.asarray(self.h_hat, dtype=np.complex128)
        if not np.all(np.isfinite(h)):
            raise ValueError("channel ratio estimate must be finite")
        if self.n_averaged < 1:
            raise ValueError("n_averaged must be at least 1")
        h.setflags(write=False)
        object.__setattr__(self, "h_hat", h)
        if self.excluded is None:
            object.__setattr__(self, "excluded", np.zeros(h.shape[0], dtype=bool))

    @property
    def n_excluded(self) -> int:
        return int(np.count_nonzero(self.excluded))


def _masked_ratio_mean(num: np.ndarray, den: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean of num/den along axis 1, skipping entries with tiny |den|."""
    ok = np.abs(den) >= threshold * _rms(den)
    ratio = np.divide(num, den, out=np.zeros_like(num), where=ok)
    count = ok.sum(axis=1)
    mean = np.divide(ratio.sum(axis=1), count, out=np.zeros(num.shape[0], dtype=complex), where=count > 0)
    return mean, count == 0


def estimate_channel_ratio(
    training_aux: OfdmGrid | np.ndarray,
    training_ord: OfdmGrid | np.ndarray,
    threshold: float = EXCLUSION_THRESHOLD,
    timestamp_symbol: int = 0,
) -> ChannelRatioEstimate:
    """LS estimate ``H_k = mean_m Y_ord[k, m] / Y_aux[k, m]``."""
    ya, yo = _as_matrix(training_aux), _as_matrix(training_ord)
    if ya.shape != yo.shape:
        raise ValueError(f"training grids differ in shape: {ya.shape} vs {yo.shape}")
    if ya.shape[1] < 1:
        raise ValueError("need at least one training symbol")
    h, excluded = _masked_ratio_mean(yo, ya, threshold)
    if excluded.any():
        log.debug("channel ratio: %d subcarriers excluded", int(excluded.sum()))
    return ChannelRatioEstimate(h, ya.shape[1], timestamp_symbol, excluded)


def cancel(
    y_ord: OfdmGrid | np.ndarray, y_aux: OfdmGrid | np.ndarray, h_hat: ChannelRatioEstimate | np.ndarray
) -> OfdmGrid:
    """``Y_DC = Y_ord - Y_aux * H``."""
    yo, ya = _as_matrix(y_ord), _as_matrix(y_aux)
    h = h_hat.h_hat if isinstance(h_hat, ChannelRatioEstimate) else np.asarray(h_hat, dtype=complex)
    if yo.shape != ya.shape:
        raise ValueError(f"ordinary and auxiliary grids differ in shape: {yo.shape} vs {ya.shape}")
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] != yo.shape[0] or h.shape[1] not in (1, yo.shape[1]):
        raise ValueError(f"estimate shape {h.shape} does not fit grid {yo.shape}")
    out = yo - ya * h
    if isinstance(y_ord, OfdmGrid):
        return y_ord.with_symbols(out)
    return OfdmGrid(out)


def distortion_basis(x: OfdmGrid | np.ndarray, h_ord: np.ndarray) -> np.ndarray:
    """Frequency-domain ``DFT[u |u|^2]`` with ``u = IDFT(X H_ord)``, per symbol.

    Over the cyclic-prefix-free body, ``u`` is the circular convolution of
    the transmitted symbol with the ordinary channel, which is what the LNA
    sees.
    """
    xm = _as_matrix(x)
    h = np.asarray(h_ord, dtype=complex)
    if h.ndim == 1:
        h = h[:, None]
    if h.shape[0] != xm.shape[0] or h.shape[1] not in (1, xm.shape[1]):
        raise ValueError(f"channel shape {h.shape} does not fit symbols {xm.shape}")
    u = np.fft.ifft(xm * h, axis=0, norm="ortho")
    return np.fft.fft(u * np.abs(u) ** 2, axis=0, norm="ortho")


@dataclass(frozen=True)
class TrainingPair:
    """Received ordinary/auxiliary grids of training symbols with the known
    transmitted subcarrier values ``x`` (same absolute scale as the SI)."""

    y_ord: OfdmGrid | np.ndarray
    y_aux: OfdmGrid | np.ndarray
    x: OfdmGrid | np.ndarray


@dataclass(frozen=True)
class NonlinEstimate:
    alpha3_hat: complex
    h_ord_hat: np.ndarray
    training_term: np.ndarray
    n_used: int = 0

    @classmethod
    def none(cls, n_subcarriers: int) -> NonlinEstimate:
        z = np.zeros(n_subcarriers, dtype=complex)
        return cls(0j, z, z, 0)


def estimate_alpha3(
    tr1: TrainingPair,
    tr2: TrainingPair,
    h_ord_hat: np.ndarray,
    h_hat: ChannelRatioEstimate,
    threshold: float = EXCLUSION_THRESHOLD,
    refine_iterations: int = 50,
    tolerance: float = 1e-12,
) -> NonlinEstimate:
    """Estimate the LNA third-order coefficient from two training symbols.

    ``tr1`` holds the M channel-estimation symbols that produced ``h_hat``.
    Because ``h_hat`` was formed on symbols that already contained receiver
    distortion, cancellation of ``tr2`` leaves
    ``alpha3 * (D2 - X2 * c)`` with ``c = mean_m D1_m / X1_m``; dividing by
    that denominator and averaging over subcarriers gives the estimate.
    A genie ``h_hat`` carries no such leakage and uses ``c = 0``.

    ``h_ord_hat`` derived from ``h_hat`` is itself offset by
    ``alpha3 * c``; each of the ``refine_iterations`` passes removes that
    offset with the current estimate and re-solves, stopping early once the
    estimate changes by less than ``tolerance`` (relative). Zero iterations
    gives the plain single-pass estimator.

    ``h_ord_hat`` may be (N,) or, for genie runs, (N, M + 1) holding the
    channel of each first-set symbol followed by the second symbol.
    """
    x1, x2 = _as_matrix(tr1.x), _as_matrix(tr2.x)
    if x2.shape[1] != 1:
        raise ValueError("second training set must contain exactly one symbol")
    if x1.shape[0] != x2.shape[0]:
        raise ValueError("training symbols differ in subcarrier count")
    if np.any(np.abs(x1) == 0):
        raise ValueError("first training symbols must be nonzero on every subcarrier")
    ratio = x2 / x1
    if np.allclose(ratio, ratio[0, 0]) and np.isclose(abs(ratio[0, 0]), 1.0):
        raise ValueError("degenerate training pair: second symbol is a unit-modulus multiple of the first")

    h_ord = np.asarray(h_ord_hat, dtype=complex)
    if h_ord.ndim == 2:
        h1, h2 = h_ord[:, :-1], h_ord[:, -1]
    else:
        h1 = h2 = h_ord
    y_dc = _as_matrix(cancel(tr2.y_ord, tr2.y_aux, h_hat))[:, 0]
    n_pass = 1 + (refine_iterations if h_hat.from_training and h_ord.ndim == 1 else 0)
    alpha3 = 0j
    for _ in range(n_pass):
        if h_hat.from_training:
            # the measured channel is H + alpha3 * c(H); peel off the leak
            h1 = h2 = h_ord - alpha3 * c if alpha3 else h_ord
            c = np.mean(distortion_basis(x1, h1) / x1, axis=1)
        else:
            c = np.zeros(x1.shape[0], dtype=complex)
        d2 = distortion_basis(x2, h2)[:, 0]
        den = d2 - x2[:, 0] * c
        ref = _rms(d2)
        if ref == 0 or _rms(den) < threshold * ref:
            raise ValueError("degenerate training pair: distortion denominator vanishes")
        ok = np.abs(den) >= threshold * _rms(den)
        if not ok.any():
            raise ValueError("all subcarriers excluded from the nonlinearity estimate")
        prev, alpha3 = alpha3, complex(np.mean(y_dc[ok] / den[ok]))
        if prev and abs(alpha3 - prev) <= tolerance * abs(alpha3):
            break
    return NonlinEstimate(alpha3, h2, c, int(ok.sum()))


def reconstruct_and_subtract(
    y_dc: OfdmGrid | np.ndarray, x_data: OfdmGrid | np.ndarray, est: NonlinEstimate
) -> OfdmGrid:
    """Remove the reconstructed receiver distortion from cancelled data symbols.

    The subtracted term is ``alpha3 * (D - X * c)``: besides the distortion
    itself it removes the distortion that leaked into the channel-ratio
    estimate during training.
    """
    y = _as_matrix(y_dc)
    x = _as_matrix(x_data)
    if x.shape != y.shape:
        raise ValueError(f"data grid {x.shape} does not match cancelled grid {y.shape}")
    if est.alpha3_hat == 0:
        out = y
    else:
        d = distortion_basis(x, est.h_ord_hat) - x * est.training_term[:, None]
        out = y - est.alpha3_hat * d
    if isinstance(y_dc, OfdmGrid):
        return y_dc.with_symbols(out)
    return OfdmGrid(out)


def estimate_direct_channel(training_ord: OfdmGrid | np.ndarray, x_training: OfdmGrid | np.ndarray) -> np.ndarray:
    """LS estimate of the SI channel from the known transmit symbols."""
    yo, x = _as_matrix(training_ord), _as_matrix(x_training)
    if yo.shape != x.shape:
        raise ValueError("training grid and known symbols differ in shape")
    h, _ = _masked_ratio_mean(yo, x, EXCLUSION_THRESHOLD)
    return h


def cancel_direct(y_ord: OfdmGrid | np.ndarray, x: OfdmGrid | np.ndarray, h: np.ndarray) -> OfdmGrid:
    """Conventional cancellation: ``Y_ord - X * H``."""
    return cancel(y_ord, x, h)
