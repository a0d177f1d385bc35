"""Deterministic CSV/JSON emitters.

Floating-point values are printed with 17 significant digits so that
byte-identical outputs certify bit-identical runs.
"""

import json
from pathlib import Path


def fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, fieldnames, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(fieldnames)]
    for row in rows:
        lines.append(",".join(fmt(row[k]) for k in fieldnames))
    path.write_text("\n".join(lines) + "\n")
    return path


class _Round17(json.JSONEncoder):
    def default(self, o):
        try:
            import numpy as np

            if isinstance(o, (np.integer,)):
                return int(o)
            if isinstance(o, (np.floating,)):
                return float(o)
            if isinstance(o, np.ndarray):
                return o.tolist()
        except ImportError:  # pragma: no cover
            pass
        return super().default(o)


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, cls=_Round17)
                    + "\n")
    return path


def snapshot_rows(replica):
    """Rows for the snapshot CSV: t, particle_id, x[, y[, z]]."""
    rows = []
    for t, cfg in replica.snapshots:
        d = cfg.domain.dimension
        for i in range(len(cfg)):
            row = {"t": t, "particle_id": int(cfg.ids[i])}
            for k, name in zip(range(d), ("x", "y", "z")):
                row[name] = float(cfg.points[i, k])
            rows.append(row)
    return rows


def snapshot_fieldnames(dimension):
    return ["t", "particle_id"] + ["x", "y", "z"][:dimension]


def moment_rows(estimates):
    """Rows for the moment CSV: t, n, bin_lo, bin_hi, k_hat, stderr."""
    rows = []
    for est in estimates:
        if est.bin_edges is None:
            for v, e in zip(est.values, est.stderr):
                rows.append({"t": est.t, "n": est.order, "bin_lo": 0.0,
                             "bin_hi": 0.0, "k_hat": float(v),
                             "stderr": float(e)})
        else:
            for i, (v, e) in enumerate(zip(est.values, est.stderr)):
                rows.append({"t": est.t, "n": est.order,
                             "bin_lo": float(est.bin_edges[i]),
                             "bin_hi": float(est.bin_edges[i + 1]),
                             "k_hat": float(v), "stderr": float(e)})
    return rows


def bound_rows(results):
    """Rows for the bound CSV: t, n, bound, worst_value, margin, pass."""
    rows = []
    for res in results:
        for r in res.rows:
            rows.append({"t": r.t, "n": r.order, "bound": r.bound,
                         "worst_value": r.worst_value, "margin": r.margin,
                         "pass": r.passed})
    return rows
