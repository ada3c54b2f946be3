"""CSV and JSON emission.

Floats are written in shortest round-trip form (``repr``), so parsing the
text gives back the identical double. Line endings are LF.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from pathlib import Path

import numpy as np

SCHEMAS = {
    "dynamics": ("t", "p_t", "q_t", "p_hat", "q_hat", "p_bar", "q_bar", "payoff1", "payoff2"),
    "pmf": ("z", "mass"),
    "sensitivity": ("t", "s", "mean_response", "ci_halfwidth", "n_samples"),
    "oscillation": ("t", "fraction_deviating", "n_runs", "delta"),
    "regret": ("replica", "seed", "t", "regret", "normalized"),
    "time-average": ("replica", "t", "scaled_deviation"),
}


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x.is_integer() and abs(x) < 2 ** 53:
            return str(int(x))
        return repr(x)
    return str(x)


def emit_csv(rows, schema: str, path) -> Path:
    """Write ``rows`` (sequences or mappings keyed by column) under a named schema."""
    if schema not in SCHEMAS:
        raise ValueError(f"unknown CSV schema {schema!r}; known: {sorted(SCHEMAS)}")
    header = SCHEMAS[schema]
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                if isinstance(row, dict):
                    row = [row[k] for k in header]
                if len(row) != len(header):
                    raise ValueError(f"row has {len(row)} fields, schema {schema!r} has {len(header)}")
                w.writerow([format_value(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def trajectory_rows(traj):
    for r in traj.records:
        yield (r.t, r.p_t, r.q_t, r.p_hat, r.q_hat, r.p_bar, r.q_bar, r.cum_payoff_1, r.cum_payoff_2)


def _plain(x):
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def write_json(obj, path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
