"""Analytic residual-SI bound and full-/half-duplex rate computation."""

from __future__ import annotations

import math

import numpy as np

from .signal_core import db_to_lin


def residual_si_upper_bound(p_tx_dbm: float, p_nlos_db: float, p_pn_dbc: float) -> float:
    """Worst-case phase-noise residual ``2 P_tx P_nlos P_PN`` in dBm.

    Reached when the diffuse channel is uncorrelated across subcarriers; a
    purely line-of-sight channel (``p_nlos_db = -inf``) leaves nothing.
    """
    if math.isinf(p_nlos_db) and p_nlos_db < 0:
        return -math.inf
    return p_tx_dbm + p_nlos_db + p_pn_dbc + 10 * math.log10(2)


def full_duplex_rate(sinr) -> float:
    """Mean of ``log2(1 + SINR)`` over the given per-subcarrier SINRs (linear)."""
    return float(np.mean(np.log2(1 + np.asarray(sinr, dtype=float))))


def half_duplex_rate(snr) -> float:
    """Half the full-duplex formula: the channel is used in one direction at a time."""
    return 0.5 * full_duplex_rate(snr)


def rate_curve(
    interference_mw: np.ndarray, soi_gain: np.ndarray, snr_db, floor_mw: float
) -> np.ndarray:
    """Per-SNR average of ``log2(1 + P_soi |G_k|^2 / I_k)``.

    ``P_soi = SNR * floor_mw`` so that the half-duplex SNR on a unit-gain
    subcarrier equals the grid value. Returns one rate per SNR point.
    """
    p_soi = db_to_lin(np.atleast_1d(snr_db))[:, None] * floor_mw * np.asarray(soi_gain)[None, :]
    return np.mean(np.log2(1 + p_soi / np.asarray(interference_mw)[None, :]), axis=1)


def average_rate_gain(r_fd, r_hd) -> float:
    """Mean of ``(R_FD - R_HD) / R_HD`` over the SNR grid (fraction, not %)."""
    if r_fd is None or r_hd is None:
        return float("nan")
    r_fd, r_hd = np.asarray(r_fd, dtype=float), np.asarray(r_hd, dtype=float)
    return float(np.mean((r_fd - r_hd) / r_hd))
