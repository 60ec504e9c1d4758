"""One full-duplex link trial and the Monte Carlo runner around it.

A trial draws a QPSK frame, transmits it, passes it through a fresh SI
channel and both receive chains, and then cancels with the auxiliary
technique and with the conventional known-data baseline. Residuals are
measured per subcarrier with the signal of interest muted, so rates for any
SoI level can be computed analytically afterwards.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from . import cancellation as canc
from .channel import ChannelModelConfig, gen_channel
from .metrics import average_rate_gain, rate_curve
from .seeding import derive, rng, trial_seed
from .signal_core import FrameStructure, SymbolKind, dbm_to_mw, mw_to_dbm, random_frame_grid
from .transceiver import TransceiverConfig, receive, transmit_detailed

log = logging.getLogger(__name__)

HALF_DUPLEX_FLOOR_DBM = -90.0

Estimation = Literal["ls", "perfect", "stale"]


def default_soi_channel() -> ChannelModelConfig:
    return ChannelModelConfig(profile="TGn-D", rician_factor_db=-math.inf, total_gain_db=0.0, doppler_hz=0.0)


@dataclass(frozen=True)
class LinkConfig:
    """Everything that defines one simulation point.

    ``estimation`` selects how the channel ratio is obtained: ``"ls"`` from
    the training symbols, ``"perfect"`` the true ratio of every data symbol,
    ``"stale"`` the noise-free true ratio at training time (isolates the
    fading penalty). ``measure="last"`` measures only the final data symbol.
    """

    transceiver: TransceiverConfig = field(default_factory=TransceiverConfig)
    channel: ChannelModelConfig = field(default_factory=ChannelModelConfig)
    frame: FrameStructure = field(default_factory=FrameStructure)
    estimation: Estimation = "ls"
    suppress_rx_nonlinearity: bool = False
    measure: Literal["data", "last"] = "data"
    soi_channel: ChannelModelConfig = field(default_factory=default_soi_channel)
    snr_grid_db: tuple[float, ...] = ()
    half_duplex_floor_dbm: float = HALF_DUPLEX_FLOOR_DBM

    def __post_init__(self):
        if self.estimation not in ("ls", "perfect", "stale"):
            raise ValueError(f"unknown estimation mode {self.estimation!r}")
        if self.measure not in ("data", "last"):
            raise ValueError(f"unknown measurement mode {self.measure!r}")
        if self.frame.n_data < 1:
            raise ValueError("frame needs at least one data symbol")
        if self.estimation != "perfect" and self.frame.n_training < 1:
            raise ValueError("channel estimation needs at least one training symbol")
        if self.suppress_rx_nonlinearity:
            if self.frame.n_training < 1:
                raise ValueError("nonlinearity suppression needs at least one training symbol")
            if self.frame.n_nonlin_training == 0:
                object.__setattr__(self, "frame", replace(self.frame, n_nonlin_training=1))


@dataclass
class TrialResult:
    residual: np.ndarray
    conventional_residual: np.ndarray
    si_mw: float
    noise_mw: float
    aux_noise_mw: float
    terms_mw: dict[str, float]
    alpha3_true: complex = 0j
    alpha3_hat: complex = 0j
    rates_fd: np.ndarray | None = None
    rates_fd_conventional: np.ndarray | None = None
    rates_hd: np.ndarray | None = None


def _true_ratio(h_ord: np.ndarray, h_aux: np.ndarray, lna_a1: complex) -> np.ndarray:
    return (lna_a1 * h_ord / h_aux[None, :]).T


def run_trial(link: LinkConfig, seed) -> TrialResult:
    tcfg, frame = link.transceiver, link.frame
    grid = random_frame_grid(frame, rng(seed, "data"))
    tx = transmit_detailed(grid, tcfg, seed)
    ch = gen_channel(link.channel, frame.n_symbols, derive(seed, "si_channel"))
    aux = tcfg.aux_channel()
    rx = receive(tx.output, ch, aux, None, tcfg, seed, frame, tx)

    tr = grid.indices(SymbolKind.TRAINING)
    nl = grid.indices(SymbolKind.NONLIN_TRAINING)
    data = grid.indices(SymbolKind.DATA)
    meas = data if link.measure == "data" else data[-1:]

    yo, ya = rx.y_ord.symbols, rx.y_aux.symbols
    x = grid.symbols * math.sqrt(float(dbm_to_mw(tcfg.tx_power_dbm))) * tx.pa.alpha1
    h_aux = aux.freq_response(grid.n_subcarriers)
    h_ord = ch.freq_responses()
    ratio = _true_ratio(h_ord, h_aux, rx.lna.alpha1)

    if link.estimation == "ls":
        est = canc.estimate_channel_ratio(ya[:, tr], yo[:, tr])
    elif link.estimation == "stale":
        est = canc.ChannelRatioEstimate(ratio[:, tr].mean(axis=1), len(tr), from_training=False)
    else:
        est = canc.ChannelRatioEstimate(ratio[:, meas], 1, int(meas[0]), from_training=False)
    y_dc = canc.cancel(yo[:, meas], ya[:, meas], est).symbols

    alpha3_hat = 0j
    if link.suppress_rx_nonlinearity:
        if link.estimation in ("ls", "stale"):
            nl_ratio, h_ord_train, h_ord_data = est, est.h_hat * h_aux, None
        else:
            nl_ratio = canc.ChannelRatioEstimate(ratio[:, nl], 1, int(nl[0]), from_training=False)
            h_ord_train, h_ord_data = h_ord[np.concatenate([tr, nl])].T, h_ord[meas].T
        nl_est = canc.estimate_alpha3(
            canc.TrainingPair(yo[:, tr], ya[:, tr], x[:, tr]),
            canc.TrainingPair(yo[:, nl], ya[:, nl], x[:, nl]),
            h_ord_train,
            nl_ratio,
        )
        if h_ord_data is not None:
            nl_est = replace(nl_est, h_ord_hat=h_ord_data)
        alpha3_hat = nl_est.alpha3_hat
        y_dc = canc.reconstruct_and_subtract(y_dc, x[:, meas], nl_est).symbols

    if link.estimation == "perfect":
        h_conv = (rx.lna.alpha1 * h_ord[meas]).T
    elif link.estimation == "stale":
        h_conv = (rx.lna.alpha1 * h_ord[tr]).T.mean(axis=1)
    else:
        h_conv = canc.estimate_direct_channel(yo[:, tr], x[:, tr])
    y_conv = canc.cancel_direct(yo[:, meas], x[:, meas], h_conv).symbols

    res = np.mean(np.abs(y_dc) ** 2, axis=1)
    res_conv = np.mean(np.abs(y_conv) ** 2, axis=1)
    terms = {k: float(np.mean(np.abs(g.symbols[:, meas]) ** 2)) for k, g in rx.ground_truth.items()}

    out = TrialResult(
        residual=res,
        conventional_residual=res_conv,
        si_mw=float(dbm_to_mw(rx.info["ord_input_dbm"])),
        noise_mw=float(dbm_to_mw(rx.info["ord_noise_dbm"])),
        aux_noise_mw=float(dbm_to_mw(rx.info["aux_noise_dbm"])),
        terms_mw=terms,
        alpha3_true=rx.lna.alpha3,
        alpha3_hat=alpha3_hat,
    )
    if link.snr_grid_db:
        soi = gen_channel(link.soi_channel, 1, derive(seed, "soi_channel"))
        gain = np.abs(soi.freq_response(0)) ** 2
        snr = np.asarray(link.snr_grid_db, dtype=float)
        floor = float(dbm_to_mw(link.half_duplex_floor_dbm))
        out.rates_fd = rate_curve(res, gain, snr, floor)
        out.rates_fd_conventional = rate_curve(res_conv, gain, snr, floor)
        out.rates_hd = 0.5 * rate_curve(np.full_like(res, floor), gain, snr, floor)
    return out


@dataclass(frozen=True)
class RunResult:
    """Aggregate over trials. Powers are means over trials and subcarriers."""

    residual_si_dbm: float
    conventional_residual_dbm: float
    median_residual_dbm: float
    median_conventional_dbm: float
    si_dbm: float
    noise_floor_dbm: float
    aux_noise_dbm: float
    terms_dbm: dict[str, float]
    n_trials: int
    seed: int
    rates_fd: np.ndarray | None = None
    rates_fd_conventional: np.ndarray | None = None
    rates_hd: np.ndarray | None = None
    alpha3_rel_error: float = float("nan")

    @property
    def rate_gain(self) -> float:
        return average_rate_gain(self.rates_fd, self.rates_hd)

    @property
    def rate_gain_conventional(self) -> float:
        return average_rate_gain(self.rates_fd_conventional, self.rates_hd)


def _run_chunk(args) -> list[TrialResult]:
    link, seed, trials = args
    return [run_trial(link, trial_seed(seed, t)) for t in trials]


def run_trials(link: LinkConfig, n_trials: int, seed: int, workers: int = 1) -> list[TrialResult]:
    """Results come back in trial order whatever the worker count."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if workers <= 1:
        return _run_chunk((link, seed, range(n_trials)))
    n_chunks = min(n_trials, workers * 4)
    bounds = np.linspace(0, n_trials, n_chunks + 1).astype(int)
    jobs = [(link, seed, range(a, b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [r for chunk in pool.map(_run_chunk, jobs) for r in chunk]


def _mean_dbm(values) -> float:
    return float(mw_to_dbm(np.mean(values)))


def aggregate(results: list[TrialResult], seed: int) -> RunResult:
    per_trial = np.array([r.residual.mean() for r in results])
    per_trial_conv = np.array([r.conventional_residual.mean() for r in results])
    keys = results[0].terms_mw.keys()
    terms = {k: _mean_dbm([r.terms_mw[k] for r in results]) for k in keys}
    a3_err = [abs(r.alpha3_hat - r.alpha3_true) / abs(r.alpha3_true) for r in results if r.alpha3_true != 0]

    def mean_of(attr):
        vals = [getattr(r, attr) for r in results]
        return None if vals[0] is None else np.mean(vals, axis=0)

    return RunResult(
        residual_si_dbm=_mean_dbm(per_trial),
        conventional_residual_dbm=_mean_dbm(per_trial_conv),
        median_residual_dbm=float(mw_to_dbm(np.median(per_trial))),
        median_conventional_dbm=float(mw_to_dbm(np.median(per_trial_conv))),
        si_dbm=_mean_dbm([r.si_mw for r in results]),
        noise_floor_dbm=_mean_dbm([r.noise_mw for r in results]),
        aux_noise_dbm=_mean_dbm([r.aux_noise_mw for r in results]),
        terms_dbm=terms,
        n_trials=len(results),
        seed=seed,
        rates_fd=mean_of("rates_fd"),
        rates_fd_conventional=mean_of("rates_fd_conventional"),
        rates_hd=mean_of("rates_hd"),
        alpha3_rel_error=float(np.median(a3_err)) if a3_err else float("nan"),
    )


def simulate(link: LinkConfig, n_trials: int, seed: int, workers: int = 1) -> RunResult:
    return aggregate(run_trials(link, n_trials, seed, workers), seed)
