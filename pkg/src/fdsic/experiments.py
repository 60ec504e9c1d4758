"""Built-in scenarios and the experiment sweeps that produce each result table.

Every experiment returns an :class:`ExperimentResult`: a list of column names
(units are part of each name), rows in a fixed order, and any invariant
violations found while producing them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .channel import ChannelModelConfig
from .impairments import NoiseConfig, add_gaussian_noise, linear, quantize_detailed, third_order
from .metrics import average_rate_gain, residual_si_upper_bound
from .seeding import derive, rng
from .signal_core import (
    FrameStructure,
    dbm_to_mw,
    measure_power_dbm,
    mw_to_dbm,
    ofdm_modulate,
    random_frame_grid,
)
from .simulation import HALF_DUPLEX_FLOOR_DBM, LinkConfig, RunResult, simulate
from .transceiver import TransceiverConfig

log = logging.getLogger(__name__)

SNR_GRID_DB = tuple(float(s) for s in range(0, 45, 5))


@dataclass(frozen=True)
class ScenarioConfig:
    """A passive-suppression operating point.

    The passive suppression is applied as a negative SI channel gain, so the
    SI at the receiver input is ``tx_power_dbm - passive_suppression_db``.
    """

    name: str
    passive_suppression_db: float
    rician_factor_db: float
    tx_power_dbm: float = 20.0
    channel_profile: str = "TGn-D"
    doppler_hz: float = 5.0
    frame: FrameStructure = field(default_factory=FrameStructure)
    transceiver: TransceiverConfig = field(default_factory=TransceiverConfig)
    suppress_rx_nonlinearity: bool = True
    estimation: str = "ls"

    def channel(self) -> ChannelModelConfig:
        return ChannelModelConfig(
            profile=self.channel_profile,
            rician_factor_db=self.rician_factor_db,
            total_gain_db=-self.passive_suppression_db,
            doppler_hz=self.doppler_hz,
        )

    def link(self, tx_power_dbm: float | None = None, **overrides) -> LinkConfig:
        p = self.tx_power_dbm if tx_power_dbm is None else tx_power_dbm
        kw = dict(
            transceiver=replace(self.transceiver, tx_power_dbm=p),
            channel=self.channel(),
            frame=self.frame,
            estimation=self.estimation,
            suppress_rx_nonlinearity=self.suppress_rx_nonlinearity,
        )
        kw.update(overrides)
        return LinkConfig(**kw)


SCENARIOS = {
    "s1": ScenarioConfig("s1", passive_suppression_db=25.0, rician_factor_db=20.0),
    "s2": ScenarioConfig("s2", passive_suppression_db=45.0, rician_factor_db=0.0),
    "s3": ScenarioConfig("s3", passive_suppression_db=60.0, rician_factor_db=0.0),
}


def get_scenario(name: str) -> ScenarioConfig:
    try:
        return SCENARIOS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None


def measure_residual_si(
    scenario: ScenarioConfig, n_trials: int, seed: int, workers: int = 1, tx_power_dbm: float | None = None
) -> RunResult:
    """Full chain with the signal of interest muted."""
    return simulate(scenario.link(tx_power_dbm), n_trials, seed, workers)


def conventional_dc_baseline(
    scenario: ScenarioConfig, n_trials: int, seed: int, workers: int = 1, tx_power_dbm: float | None = None
) -> RunResult:
    """Known-data LS cancellation without the auxiliary receiver.

    The returned ``residual_si_dbm`` is the baseline's residual.
    """
    r = simulate(scenario.link(tx_power_dbm), n_trials, seed, workers)
    return replace(
        r,
        residual_si_dbm=r.conventional_residual_dbm,
        median_residual_dbm=r.median_conventional_dbm,
        rates_fd=r.rates_fd_conventional,
    )


@dataclass(frozen=True)
class RateCurves:
    snr_db: tuple[float, ...]
    proposed: np.ndarray
    conventional: np.ndarray
    half_duplex: np.ndarray

    @property
    def gain(self) -> float:
        return average_rate_gain(self.proposed, self.half_duplex)

    @property
    def gain_conventional(self) -> float:
        return average_rate_gain(self.conventional, self.half_duplex)


def achievable_rates(
    scenario: ScenarioConfig,
    snr_grid_db=SNR_GRID_DB,
    n_trials: int = 500,
    seed: int = 0,
    workers: int = 1,
    tx_power_dbm: float | None = None,
) -> RateCurves:
    snr = tuple(float(s) for s in snr_grid_db)
    if not snr:
        raise ValueError("SNR grid is empty")
    r = simulate(scenario.link(tx_power_dbm, snr_grid_db=snr), n_trials, seed, workers)
    return RateCurves(snr, r.rates_fd, r.rates_fd_conventional, r.rates_hd)


@dataclass
class ExperimentSettings:
    n_trials: int = 500
    seed: int = 0
    workers: int = 1
    scenario: str | None = None
    sweep: dict[str, tuple[float, ...]] = field(default_factory=dict)
    custom: dict[str, str] = field(default_factory=dict)

    def values(self, key: str, default) -> tuple[float, ...]:
        vals = tuple(self.sweep.get(key, default))
        if not vals:
            raise ValueError(f"sweep list {key!r} is empty")
        return vals


@dataclass
class ExperimentResult:
    name: str
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match) -> list[dict]:
        out = []
        for r in self.rows:
            d = dict(zip(self.columns, r))
            if all(d[k] == v for k, v in match.items()):
                out.append(d)
        return out


def _ideal_with(tx_power_dbm: float, **kw) -> TransceiverConfig:
    return TransceiverConfig.ideal(tx_power_dbm, **kw)


# ---------------------------------------------------------------- fig3


def fig3(s: ExperimentSettings) -> ExperimentResult:
    """Gaussian and quantization noise versus receiver input power."""
    res = ExperimentResult(
        "fig3",
        ["input_power_dbm", "gaussian_noise_dbm", "quantization_noise_dbm", "fd_noise_floor_dbm", "hd_noise_floor_dbm"],
    )
    cfg = NoiseConfig()
    frame = FrameStructure(n_training=0, n_data=1250)
    for p_in in s.values("input_power_dbm", tuple(range(-60, 0, 5))):
        grid = random_frame_grid(frame, rng(s.seed, "fig3", "data"))
        sig = ofdm_modulate(grid).scaled(math.sqrt(float(dbm_to_mw(p_in))))
        noisy, _ = add_gaussian_noise(sig, cfg, p_in, derive(s.seed, "fig3", "noise"))
        q = quantize_detailed(noisy, cfg).signal
        g_dbm = measure_power_dbm(noisy - sig)
        q_dbm = measure_power_dbm(q - noisy)
        fd = float(mw_to_dbm(dbm_to_mw(g_dbm) + dbm_to_mw(q_dbm)))
        res.rows.append((float(p_in), g_dbm, q_dbm, fd, HALF_DUPLEX_FLOOR_DBM))
        if q_dbm >= g_dbm:
            res.violations.append(f"quantization noise exceeds Gaussian noise at {p_in} dBm input")
        if p_in <= -30 and abs(fd - HALF_DUPLEX_FLOOR_DBM) > 0.3:
            res.violations.append(f"full-duplex floor {fd:.2f} dBm differs from half-duplex floor at {p_in} dBm")
    return res


# ---------------------------------------------------------------- fig4

PROFILE_LABEL = {"TGn-B": "B", "TGn-C": "C", "TGn-D": "D"}


def phase_noise_link(profile: str, nlos_power_dbm: float, tx_power_dbm: float = 20.0, rician_factor_db: float = 0.0):
    """Receiver phase noise only, perfect channel knowledge, diffuse power fixed."""
    tcfg = _ideal_with(tx_power_dbm, rx_phase_noise=TransceiverConfig().rx_phase_noise)
    k = float(dbm_to_mw(rician_factor_db))
    gain_db = nlos_power_dbm - tx_power_dbm + 10 * math.log10(1 + k)
    ch = ChannelModelConfig(profile, rician_factor_db=rician_factor_db, total_gain_db=gain_db)
    return LinkConfig(tcfg, ch, estimation="perfect")


def fig4(s: ExperimentSettings) -> ExperimentResult:
    """Phase-noise residual against the analytic bound for TGn B, C and D."""
    res = ExperimentResult("fig4", ["nlos_power_dbm", "model", "residual_dbm", "median_residual_dbm", "upper_bound_dbm"])
    p_tx = 20.0
    pn_dbc = TransceiverConfig().rx_phase_noise.target_inband_power_dbc
    for p_nlos in s.values("nlos_power_dbm", (-60.0, -50.0, -40.0, -30.0, -20.0)):
        medians = {}
        for prof in ("TGn-B", "TGn-C", "TGn-D"):
            r = simulate(phase_noise_link(prof, p_nlos, p_tx), s.n_trials, s.seed, s.workers)
            bound = residual_si_upper_bound(p_tx, p_nlos - p_tx, pn_dbc)
            lab = PROFILE_LABEL[prof]
            medians[lab] = r.median_residual_dbm
            res.rows.append((float(p_nlos), lab, r.residual_si_dbm, r.median_residual_dbm, bound))
            if r.residual_si_dbm > bound + 1.0:
                res.violations.append(f"model {lab} at {p_nlos} dBm exceeds the bound by more than 1 dB")
        if not medians["B"] < medians["C"] < medians["D"]:
            res.violations.append(f"coherence-bandwidth ordering broken at {p_nlos} dBm: {medians}")
    return res


# ---------------------------------------------------------------- fig5a/b


def _s1_geometry(s: ExperimentSettings) -> ScenarioConfig:
    return get_scenario(s.scenario or "s1")


def fig5a(s: ExperimentSettings) -> ExperimentResult:
    """Channel-estimation penalty versus number of averaged training symbols."""
    res = ExperimentResult(
        "fig5a", ["input_power_dbm", "estimation", "n_training", "residual_dbm", "penalty_db"]
    )
    sc = _s1_geometry(s)
    ch = replace(sc.channel(), doppler_hz=0.0)
    n_data = sc.frame.n_data
    for p_tx in s.values("tx_power_dbm", (0.0, 5.0, 10.0, 15.0, 20.0)):
        tcfg = replace(sc.transceiver, tx_power_dbm=p_tx, rx_lna_nonlinearity=linear())
        base = LinkConfig(tcfg, ch, FrameStructure(1, n_data), estimation="perfect")
        ref = simulate(base, s.n_trials, s.seed, s.workers)
        p_in = ref.si_dbm
        res.rows.append((p_in, "perfect", 0, ref.residual_si_dbm, 0.0))
        for m in s.values("n_training", (1, 2, 4)):
            m = int(m)
            r = simulate(replace(base, frame=FrameStructure(m, n_data), estimation="ls"), s.n_trials, s.seed, s.workers)
            pen = r.residual_si_dbm - ref.residual_si_dbm
            res.rows.append((p_in, "ls", m, r.residual_si_dbm, pen))
            if pen < -0.5:
                res.violations.append(f"LS with M={m} beats perfect knowledge by {-pen:.2f} dB at {p_in:.1f} dBm")
    return res


def fig5b(s: ExperimentSettings) -> ExperimentResult:
    """Penalty of holding the channel ratio fixed over frames of growing length."""
    res = ExperimentResult(
        "fig5b", ["input_power_dbm", "n_data", "residual_dbm", "perfect_residual_dbm", "degradation_db"]
    )
    sc = _s1_geometry(s)
    lengths = tuple(int(n) for n in s.values("n_data", (50, 100, 150)))
    for p_tx in s.values("tx_power_dbm", (0.0, 5.0, 10.0, 15.0, 20.0)):
        tcfg = replace(sc.transceiver, tx_power_dbm=p_tx, rx_lna_nonlinearity=linear())
        degs = []
        for n in lengths:
            frame = FrameStructure(sc.frame.n_training, n)
            perfect = simulate(LinkConfig(tcfg, sc.channel(), frame, "perfect", measure="last"), s.n_trials, s.seed, s.workers)
            stale = simulate(LinkConfig(tcfg, sc.channel(), frame, "stale", measure="last"), s.n_trials, s.seed, s.workers)
            deg = stale.residual_si_dbm - perfect.residual_si_dbm
            degs.append(deg)
            res.rows.append((perfect.si_dbm, n, stale.residual_si_dbm, perfect.residual_si_dbm, deg))
        if any(b < a - 0.5 for a, b in zip(degs, degs[1:])):
            res.violations.append(f"fading penalty not monotone in frame length at {p_tx} dBm transmit: {degs}")
    return res


# ---------------------------------------------------------------- fig6


def fig6(s: ExperimentSettings) -> ExperimentResult:
    """Residual SI versus LNA distortion level, with and without suppression."""
    res = ExperimentResult("fig6", ["distortion_power_dbm", "case", "residual_dbm", "alpha3_rel_error"])
    sc = _s1_geometry(s)
    p_tx = s.values("tx_power_dbm", (sc.tx_power_dbm,))[0]
    p_si = p_tx - sc.passive_suppression_db
    lin = simulate(sc.link(p_tx, transceiver=replace(sc.transceiver, tx_power_dbm=p_tx, rx_lna_nonlinearity=linear()),
                           suppress_rx_nonlinearity=False), s.n_trials, s.seed, s.workers)
    for p_d in s.values("distortion_power_dbm", tuple(float(v) for v in range(-65, -20, 5))):
        tcfg = replace(sc.transceiver, tx_power_dbm=p_tx, rx_lna_nonlinearity=third_order(p_d - p_si))
        off = simulate(sc.link(p_tx, transceiver=tcfg, suppress_rx_nonlinearity=False), s.n_trials, s.seed, s.workers)
        on = simulate(sc.link(p_tx, transceiver=tcfg, suppress_rx_nonlinearity=True), s.n_trials, s.seed, s.workers)
        res.rows.append((float(p_d), "linear", lin.residual_si_dbm, float("nan")))
        res.rows.append((float(p_d), "no_suppression", off.residual_si_dbm, float("nan")))
        res.rows.append((float(p_d), "suppression", on.residual_si_dbm, on.alpha3_rel_error))
        if on.residual_si_dbm > off.residual_si_dbm + 0.5:
            res.violations.append(f"suppression increases the residual at {p_d} dBm distortion")
    return res


# ---------------------------------------------------------------- fig7

COMPONENTS = ("gaussian", "quantization", "tx_phase_noise", "rx_phase_noise", "tx_nonlinearity", "rx_nonlinearity")


def component_transceiver(component: str, full: TransceiverConfig) -> TransceiverConfig:
    """Ideal chain with only ``component`` taken from ``full``."""
    ideal = TransceiverConfig.ideal(full.tx_power_dbm, aux_input_power_dbm=full.aux_input_power_dbm)
    quiet = NoiseConfig(adc_bits=None, mode="off")
    if component == "gaussian":
        return replace(ideal, aux_noise=replace(full.aux_noise, adc_bits=None),
                       ord_noise=replace(full.ord_noise, adc_bits=None))
    if component == "quantization":
        return replace(ideal, aux_noise=replace(full.aux_noise, mode="off"),
                       ord_noise=replace(full.ord_noise, mode="off"))
    if component == "tx_phase_noise":
        return replace(ideal, tx_phase_noise=full.tx_phase_noise)
    if component == "rx_phase_noise":
        return replace(ideal, rx_phase_noise=full.rx_phase_noise)
    if component == "tx_nonlinearity":
        return replace(ideal, tx_nonlinearity=full.tx_nonlinearity)
    if component == "rx_nonlinearity":
        return replace(ideal, rx_lna_nonlinearity=full.rx_lna_nonlinearity, aux_noise=quiet, ord_noise=quiet)
    raise ValueError(f"unknown impairment component {component!r}")


def decompose(sc: ScenarioConfig, p_tx: float, s: ExperimentSettings) -> dict[str, float]:
    """Residual per impairment (genie channel, common seeds), the estimation
    penalty, the total and the receiver noise floor, all in dBm."""
    full = replace(sc.transceiver, tx_power_dbm=p_tx)
    out = {}
    for comp in COMPONENTS:
        link = sc.link(p_tx, transceiver=component_transceiver(comp, full), estimation="perfect")
        out[comp] = simulate(link, s.n_trials, s.seed, s.workers).residual_si_dbm
    genie = simulate(sc.link(p_tx, estimation="perfect"), s.n_trials, s.seed, s.workers)
    total = simulate(sc.link(p_tx), s.n_trials, s.seed, s.workers)
    est_mw = dbm_to_mw(total.residual_si_dbm) - dbm_to_mw(genie.residual_si_dbm)
    out["channel_estimation"] = float(mw_to_dbm(est_mw)) if est_mw > 0 else -math.inf
    out["total_genie"] = genie.residual_si_dbm
    out["total"] = total.residual_si_dbm
    out["noise_floor"] = total.noise_floor_dbm
    return out


def _fig7(name: str, scenario: str, s: ExperimentSettings) -> ExperimentResult:
    res = ExperimentResult(name, ["tx_power_dbm", "component", "residual_dbm"])
    sc = get_scenario(s.scenario or scenario)
    for p_tx in s.values("tx_power_dbm", (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)):
        parts = decompose(sc, p_tx, s)
        for comp, v in parts.items():
            res.rows.append((float(p_tx), comp, v))
        summed = float(mw_to_dbm(sum(dbm_to_mw(parts[c]) for c in COMPONENTS)))
        if abs(summed - parts["total_genie"]) > 0.5:
            res.violations.append(
                f"{sc.name} at {p_tx} dBm: components sum to {summed:.2f} dBm, joint run gives {parts['total_genie']:.2f} dBm"
            )
    return res


# ---------------------------------------------------------------- fig8 / table1


def _fig8(name: str, scenario: str, s: ExperimentSettings) -> ExperimentResult:
    res = ExperimentResult(name, ["snr_db", "tx_power_dbm", "system", "rate_bps_hz"])
    sc = get_scenario(s.scenario or scenario)
    snr = s.values("snr_db", SNR_GRID_DB)
    for p_tx in s.values("tx_power_dbm", (5.0, 20.0)):
        rc = achievable_rates(sc, snr, s.n_trials, s.seed, s.workers, p_tx)
        for i, v in enumerate(rc.snr_db):
            res.rows.append((v, float(p_tx), "proposed_fd", float(rc.proposed[i])))
            res.rows.append((v, float(p_tx), "conventional_fd", float(rc.conventional[i])))
            res.rows.append((v, float(p_tx), "half_duplex", float(rc.half_duplex[i])))
    return res


def table1(s: ExperimentSettings) -> ExperimentResult:
    """Average full-duplex rate gain over half duplex, per scenario and power."""
    res = ExperimentResult("table1", ["scenario", "tx_power_dbm", "technique", "rate_gain_pct"])
    names = [s.scenario] if s.scenario else list(SCENARIOS)
    snr = s.values("snr_db", SNR_GRID_DB)
    for name in names:
        sc = get_scenario(name)
        for p_tx in s.values("tx_power_dbm", (5.0, 20.0)):
            rc = achievable_rates(sc, snr, s.n_trials, s.seed, s.workers, p_tx)
            res.rows.append((sc.name, float(p_tx), "proposed", 100 * rc.gain))
            res.rows.append((sc.name, float(p_tx), "conventional", 100 * rc.gain_conventional))
            if rc.gain < rc.gain_conventional:
                res.violations.append(f"{sc.name} at {p_tx} dBm: conventional beats proposed")
    return res


# ---------------------------------------------------------------- custom


CUSTOM_KEYS = {
    "passive_suppression_db": float,
    "rician_factor_db": float,
    "channel_profile": str,
    "doppler_hz": float,
    "n_training": int,
    "n_data": int,
    "estimation": str,
    "suppress_rx_nonlinearity": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
}


def custom_scenario(params: dict[str, str]) -> ScenarioConfig:
    unknown = set(params) - set(CUSTOM_KEYS)
    if unknown:
        raise ValueError(f"unknown scenario field(s): {sorted(unknown)}")
    kw = {}
    for key, conv in CUSTOM_KEYS.items():
        if key in params:
            try:
                kw[key] = conv(params[key])
            except ValueError as e:
                raise ValueError(f"invalid value for {key}: {params[key]!r}") from e
    frame = FrameStructure(kw.pop("n_training", 2), kw.pop("n_data", 50))
    kw.setdefault("passive_suppression_db", 45.0)
    kw.setdefault("rician_factor_db", 0.0)
    sc = ScenarioConfig("custom", frame=frame, **kw)
    sc.channel()
    sc.link()
    return sc


def custom(s: ExperimentSettings) -> ExperimentResult:
    """Residual SI of an arbitrary scenario over a transmit-power sweep."""
    res = ExperimentResult(
        "custom", ["tx_power_dbm", "si_dbm", "residual_dbm", "conventional_residual_dbm", "noise_floor_dbm"]
    )
    sc = custom_scenario(s.custom) if s.custom else get_scenario(s.scenario or "s2")
    for p_tx in s.values("tx_power_dbm", (5.0, 20.0)):
        r = simulate(sc.link(p_tx), s.n_trials, s.seed, s.workers)
        res.rows.append((float(p_tx), r.si_dbm, r.residual_si_dbm, r.conventional_residual_dbm, r.noise_floor_dbm))
    return res


EXPERIMENTS: dict[str, Callable[[ExperimentSettings], ExperimentResult]] = {
    "fig3": fig3,
    "fig4": fig4,
    "fig5a": fig5a,
    "fig5b": fig5b,
    "fig6": fig6,
    "fig7a": lambda s: _fig7("fig7a", "s1", s),
    "fig7b": lambda s: _fig7("fig7b", "s2", s),
    "fig7c": lambda s: _fig7("fig7c", "s3", s),
    "fig8a": lambda s: _fig8("fig8a", "s1", s),
    "fig8b": lambda s: _fig8("fig8b", "s2", s),
    "fig8c": lambda s: _fig8("fig8c", "s3", s),
    "table1": table1,
    "custom": custom,
}


def run(name: str, settings: ExperimentSettings) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}") from None
    log.info("running %s (%d trials, seed %d, %d workers)", name, settings.n_trials, settings.seed, settings.workers)
    return fn(settings)
