"""INI run configuration.

Example::

    [run]
    schema_version = 1
    experiment = fig4
    seed = 7
    n_trials = 500
    workers = 4

    [sweep]
    nlos_power_dbm = -60, -50, -40

    [scenario]            ; only for experiment = custom
    passive_suppression_db = 45
    rician_factor_db = 0

Every physical quantity carries its unit in the key name.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path

from .experiments import EXPERIMENTS, SCENARIOS, ExperimentSettings

SCHEMA_VERSION = 1

RUN_KEYS = {"schema_version", "experiment", "seed", "n_trials", "workers", "scenario"}
SWEEP_KEYS = {
    "tx_power_dbm",
    "input_power_dbm",
    "nlos_power_dbm",
    "n_training",
    "n_data",
    "distortion_power_dbm",
    "snr_db",
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    settings: ExperimentSettings
    text: str

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def _int(section: str, key: str, raw: str, minimum: int) -> int:
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None
    if v < minimum:
        raise ConfigError(f"[{section}] {key}: must be at least {minimum}, got {v}")
    return v


def _float_list(key: str, raw: str) -> tuple[float, ...]:
    items = [t.strip() for t in raw.replace(";", ",").split(",") if t.strip()]
    if not items:
        raise ConfigError(f"[sweep] {key}: sweep list is empty")
    try:
        return tuple(float(t) for t in items)
    except ValueError:
        raise ConfigError(f"[sweep] {key}: not a list of numbers: {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config: {e}") from None
    if not cp.has_section("run"):
        raise ConfigError("missing [run] section")
    run = cp["run"]
    unknown = set(run) - RUN_KEYS
    if unknown:
        raise ConfigError(f"[run] unknown field(s): {sorted(unknown)}")
    version = _int("run", "schema_version", run.get("schema_version", str(SCHEMA_VERSION)), 1)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"[run] schema_version: unsupported version {version}")
    name = run.get("experiment", "").strip()
    if not name:
        raise ConfigError("[run] experiment: missing")
    if name not in EXPERIMENTS:
        raise ConfigError(f"[run] experiment: unknown experiment {name!r}")
    scenario = run.get("scenario") or None
    if scenario is not None and scenario.lower() not in SCENARIOS:
        raise ConfigError(f"[run] scenario: unknown scenario {scenario!r}")

    sweep = {}
    if cp.has_section("sweep"):
        for key, raw in cp["sweep"].items():
            if key not in SWEEP_KEYS:
                raise ConfigError(f"[sweep] unknown field {key!r}")
            sweep[key] = _float_list(key, raw)
    custom = dict(cp["scenario"]) if cp.has_section("scenario") else {}
    if custom and name != "custom":
        raise ConfigError("[scenario] section is only valid with experiment = custom")
    if custom:
        from .experiments import custom_scenario

        try:
            custom_scenario(custom)
        except ValueError as e:
            raise ConfigError(f"[scenario] {e}") from None

    settings = ExperimentSettings(
        n_trials=_int("run", "n_trials", run.get("n_trials", "500"), 1),
        seed=_int("run", "seed", run.get("seed", "0"), 0),
        workers=_int("run", "workers", run.get("workers", "1"), 1),
        scenario=scenario,
        sweep=sweep,
        custom=custom,
    )
    return RunConfig(name, settings, text)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text)


def default_config_text(experiment: str, seed: int, n_trials: int, scenario: str | None) -> str:
    lines = ["[run]", f"schema_version = {SCHEMA_VERSION}", f"experiment = {experiment}", f"seed = {seed}",
             f"n_trials = {n_trials}"]
    if scenario:
        lines.append(f"scenario = {scenario}")
    return "\n".join(lines) + "\n"
