"""Run a configured experiment and write its CSV plus a JSON sidecar."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config
from .experiments import ExperimentResult, run

log = logging.getLogger(__name__)


class InvariantViolation(RuntimeError):
    def __init__(self, result: ExperimentResult):
        self.result = result
        super().__init__("; ".join(result.violations))


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return f"{v:.4f}"
    return str(v)


def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_outputs(result: ExperimentResult, cfg: RunConfig, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{result.name}.csv"
        csv_path.write_text(to_csv(result))
        meta = {
            "experiment": cfg.experiment,
            "config_hash": cfg.config_hash,
            "seed": cfg.settings.seed,
            "n_trials": cfg.settings.n_trials,
            "version": __version__,
            "columns": result.columns,
            "invariant_violations": result.violations,
        }
        (out / f"{result.name}.meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    except OSError as e:
        raise OSError(f"cannot write output to {out}: {e.strerror}") from e
    return csv_path


def run_config(cfg: RunConfig, out_dir: str | Path) -> Path:
    """Run, write, and raise :class:`InvariantViolation` if any check failed.

    The CSV is written before raising so the offending numbers can be
    inspected.
    """
    result = run(cfg.experiment, cfg.settings)
    path = write_outputs(result, cfg, out_dir)
    log.info("wrote %s (%d rows)", path, len(result.rows))
    if result.violations:
        for v in result.violations:
            log.error("invariant violated: %s", v)
        raise InvariantViolation(result)
    return path


def run_experiment(config_file: str | Path, output_path: str | Path) -> Path:
    return run_config(load_config(config_file), output_path)
