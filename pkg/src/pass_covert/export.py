"""CSV traces, metrics tables and JSON run metadata.

Floats are written with 17 significant digits so a write/read round trip
reproduces every value exactly.
"""

from __future__ import annotations

import csv
import json
import subprocess
from pathlib import Path

import numpy as np

from . import __version__

BASE_COLUMNS = ["cpi", "true_x", "true_y", "true_vx", "true_vy", "est_x", "est_y",
                "est_vx", "est_vy", "rate_bps_hz", "kl", "sensing_w", "feasible"]
METRIC_COLUMNS = ["cpi", "method", "mean_rate_ma"]


def trace_columns(n_actions: int = 3) -> list:
    return BASE_COLUMNS + [f"a{i + 1}" for i in range(n_actions)]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _open(path, mode):
    path = Path(path)
    try:
        if "w" in mode:
            path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, newline="")
    except OSError as exc:
        raise OSError(f"cannot open {path}: {exc.strerror or exc}") from exc


def write_trace_csv(trace, path):
    n_act = trace.action.shape[1]
    with _open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(n_act))
        for t in range(len(trace)):
            row = [str(t)]
            row += [_fmt(v) for v in trace.true_xi[t]]
            row += [_fmt(v) for v in trace.est_xi[t]]
            row += [_fmt(trace.rate[t]), _fmt(trace.kl[t]), _fmt(trace.sensing_w[t]),
                    "1" if trace.feasible[t] else "0"]
            row += [_fmt(v) for v in trace.action[t]]
            w.writerow(row)


def read_trace_csv(path) -> dict:
    """Columns of a trace file as arrays (``cpi`` and ``feasible`` as ints)."""
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        if name in ("cpi", "feasible"):
            cols[name] = np.array(vals, dtype=int)
        else:
            cols[name] = np.array(vals, dtype=float)
    return cols


def write_metrics_csv(mean_traces: dict, path):
    """``mean_traces`` maps method name to its moving-averaged mean rate trace."""
    with _open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for method, trace in mean_traces.items():
            for t, v in enumerate(trace):
                w.writerow([str(t), method, _fmt(v)])


def read_metrics_csv(path) -> dict:
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))[1:]
    out = {}
    for cpi, method, value in rows:
        out.setdefault(method, []).append(float(value))
    return {k: np.array(v) for k, v in out.items()}


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if res.returncode == 0 and res.stdout.strip():
            return f"{__version__}+g{res.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_sidecar(path, config, seed: int, **extra):
    meta = {"config": config.to_dict(), "seed": int(seed), "version": version_string()}
    meta.update(extra)
    with _open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")
