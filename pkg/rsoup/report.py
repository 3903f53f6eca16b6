"""
report.py - CSV / JSON writers and row builders

CSV floats are written with repr and JSON with sorted keys, so a rerun of
any command reproduces its files byte for byte.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return value


def write_csv(path, header: list, rows: list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.debug("wrote %s (%d rows)", path, len(rows))
    return path


def read_csv(path) -> tuple[list, list]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Not JSON serializable: {type(obj).__name__}")


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n"


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    logger.debug("wrote %s", path)
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- Row builders --
def coeff_columns(n: int, reward_ids: tuple, prefix: str = "lambda") -> list:
    return [prefix] if n == 2 else [f"{prefix}_{r}" for r in reward_ids]


def coeff_cells(coeffs: tuple) -> list:
    """Pairs are written by their second coefficient; larger simplices in full."""
    return [coeffs[1]] if len(coeffs) == 2 else list(coeffs)


def front_table(candidates: list, reward_ids: tuple, prefix: str = "lambda") -> tuple[list, list]:
    """Header and rows for soup candidates or front points (anything with coeffs/provenance/rewards)."""
    n = len(candidates[0].coeffs)
    header = [*coeff_columns(n, reward_ids, prefix), *reward_ids, "provenance"]
    rows = []
    for c in candidates:
        rewards = c.eval if hasattr(c, "eval") else c.rewards
        rows.append([*coeff_cells(c.coeffs), *(rewards[r] for r in reward_ids), c.provenance])
    return header, rows


def lmc_table(report) -> tuple[list, list]:
    header = ["lambda"]
    for r in report.reward_ids:
        header += [f"{r}_interpolated", f"{r}_linear", f"{r}_margin"]
    rows = []
    for i, lam in enumerate(report.lambdas):
        row = [lam]
        for k in range(len(report.reward_ids)):
            row += [report.interpolated[i, k], report.linear[i, k], report.margins[i, k]]
        rows.append(row)
    return header, rows


@dataclass(eq=False)
class ExperimentReport:
    """What a command produced, stamped with the code version and config hash."""
    command: str
    config_hash: str
    reward_ids: tuple
    runs: list | None = None
    points: list | None = None
    init: dict | None = None
    normalization: dict | None = None
    lmc: list | None = None
    comparison: dict | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        from . import __version__

        payload = {"version": __version__, "command": self.command, "config_hash": self.config_hash,
                   "reward_ids": list(self.reward_ids)}
        for key in ("runs", "points", "init", "normalization", "lmc", "comparison"):
            value = getattr(self, key)
            if value is not None:
                payload[key] = value
        payload.update(self.extra)
        return payload


def run_summary(record) -> dict:
    last = record.history[-1] if record.history else None
    return {"label": record.label, "weighting": list(record.weighting.coeffs),
            "reward_ids": list(record.weighting.reward_ids), "seed": record.config.seed,
            "updates": record.config.updates, "weight_distance": record.init_distance,
            "final_return": last.scalarized_return if last else None}
