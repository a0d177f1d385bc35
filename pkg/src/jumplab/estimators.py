"""Moment estimators over replica snapshots and the bound checks.

The density estimator is the mean particle count per volume; the pair
estimator is the ordered-pair distance histogram normalized by volume
and shell volume, which is flat at density^2 for Poisson samples.  The
sub-Poissonian check compares estimates (or deterministic fields)
against the envelope C^n exp(n t alpha); the variance check evaluates
the count-variance combination that any true correlation pair must
keep nonnegative.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import min_image, shell_volume


@dataclass
class MomentEstimate:
    """One estimated moment: scalar for order 1, radial profile for 2."""

    order: int
    t: float
    values: np.ndarray
    stderr: np.ndarray
    sample_count: int
    bin_edges: np.ndarray = None

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("estimates are produced for orders 1 and 2")
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        self.stderr = np.atleast_1d(np.asarray(self.stderr, dtype=float))
        if np.any(self.stderr < 0):
            raise ValueError("standard errors must be nonnegative")
        if self.bin_edges is not None:
            self.bin_edges = np.asarray(self.bin_edges, dtype=float)
            if np.any(np.diff(self.bin_edges) <= 0):
                raise ValueError("bin edges must be strictly increasing")


@dataclass
class PairHistogram:
    """Unordered pair-distance counts with the matching shell volumes."""

    bin_edges: np.ndarray
    counts: np.ndarray
    shell_volumes: np.ndarray

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(self.shell_volumes <= 0):
            raise ValueError("shell volumes must be positive")


def configs_at(replicas, t):
    return [rep.at(t) for rep in replicas]


def density_estimate(configs, t):
    """Mean count per volume with the across-replica standard error."""
    if not configs:
        raise ValueError("need at least one snapshot")
    vol = configs[0].domain.volume
    counts = np.array([len(c) for c in configs], dtype=float)
    vals = counts / vol
    mean = float(vals.mean())
    if len(vals) > 1:
        err = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    else:
        err = 0.0
    return MomentEstimate(order=1, t=t, values=[mean], stderr=[err],
                          sample_count=len(configs))


def pair_distances(config):
    """Min-image distances of all unordered pairs."""
    n = len(config)
    if n < 2:
        return np.empty(0)
    pts = config.points
    diffs = min_image(pts[:, None, :], pts[None, :, :], config.domain)
    r = np.sqrt(np.sum(diffs * diffs, axis=2))
    iu = np.triu_indices(n, k=1)
    return r[iu]


def pair_histogram(config, bin_edges):
    """Histogram of unordered pair distances into the given bins."""
    d = config.domain.dimension
    edges = np.asarray(bin_edges, dtype=float)
    if edges[-1] > config.domain.side_length / 2 + 1e-12:
        raise ValueError("bins beyond L/2 are ambiguous under min-image")
    counts, _ = np.histogram(pair_distances(config), bins=edges)
    shells = np.array([shell_volume(d, edges[i], edges[i + 1])
                       for i in range(len(edges) - 1)])
    return PairHistogram(bin_edges=edges, counts=counts, shell_volumes=shells)


def pair_correlation_estimate(configs, t, bin_edges):
    """Radial pair-correlation estimate from replica snapshots.

    Ordered-pair count per volume per shell volume; for Poisson data
    every bin sits at density^2 within noise.  Radialization assumes a
    translation-invariant law; use the vector variant otherwise.
    """
    if not configs:
        raise ValueError("need at least one snapshot")
    edges = np.asarray(bin_edges, dtype=float)
    vol = configs[0].domain.volume
    per_rep = []
    shells = None
    for c in configs:
        h = pair_histogram(c, edges)
        shells = h.shell_volumes
        per_rep.append(2.0 * h.counts / (vol * shells))
    arr = np.array(per_rep)
    vals = arr.mean(axis=0)
    if len(configs) > 1:
        errs = arr.std(axis=0, ddof=1) / math.sqrt(len(configs))
    else:
        errs = np.zeros_like(vals)
    return MomentEstimate(order=2, t=t, values=vals, stderr=errs,
                          sample_count=len(configs), bin_edges=edges)


def density_profile_estimate(configs, t, cells_per_axis):
    """Gridded (non-radial) order-1 variant: per-cell count density."""
    if not configs:
        raise ValueError("need at least one snapshot")
    dom = configs[0].domain
    d = dom.dimension
    edges = np.linspace(0.0, dom.side_length, cells_per_axis + 1)
    cellvol = (dom.side_length / cells_per_axis) ** d
    per_rep = []
    for c in configs:
        h, _ = np.histogramdd(c.points, bins=[edges] * d)
        per_rep.append(h.ravel() / cellvol)
    arr = np.array(per_rep)
    vals = arr.mean(axis=0)
    if len(configs) > 1:
        errs = arr.std(axis=0, ddof=1) / math.sqrt(len(configs))
    else:
        errs = np.zeros_like(vals)
    return MomentEstimate(order=1, t=t, values=vals, stderr=errs,
                          sample_count=len(configs))


def separation_vector_estimate(configs, t, bins_per_axis):
    """Gridded (non-radial) order-2 variant: ordered separations binned
    by vector components over [-L/2, L/2)^d; values per volume per cell."""
    if not configs:
        raise ValueError("need at least one snapshot")
    dom = configs[0].domain
    d = dom.dimension
    L = dom.side_length
    edges = np.linspace(-L / 2, L / 2, bins_per_axis + 1)
    cellvol = (L / bins_per_axis) ** d
    per_rep = []
    for c in configs:
        n = len(c)
        if n < 2:
            per_rep.append(np.zeros(bins_per_axis ** d))
            continue
        pts = c.points
        diffs = min_image(pts[:, None, :], pts[None, :, :], dom)
        mask = ~np.eye(n, dtype=bool)
        seps = diffs[mask].reshape(-1, d)
        h, _ = np.histogramdd(seps, bins=[edges] * d)
        per_rep.append(h.ravel() / (dom.volume * cellvol))
    arr = np.array(per_rep)
    vals = arr.mean(axis=0)
    errs = (arr.std(axis=0, ddof=1) / math.sqrt(len(configs))
            if len(configs) > 1 else np.zeros_like(vals))
    return MomentEstimate(order=2, t=t, values=vals, stderr=errs,
                          sample_count=len(configs))


def third_factorial_moment(configs, t):
    """Mean of N(N-1)(N-2) per volume cubed: the integrated order-3
    moment density (scalar diagnostic behind the order-3 flag)."""
    if not configs:
        raise ValueError("need at least one snapshot")
    vol = configs[0].domain.volume
    vals = np.array([len(c) * (len(c) - 1) * (len(c) - 2) for c in configs],
                    dtype=float) / vol ** 3
    mean = float(vals.mean())
    err = (float(vals.std(ddof=1) / math.sqrt(len(vals)))
           if len(vals) > 1 else 0.0)
    return mean, err


@dataclass
class BoundCheckRow:
    t: float
    order: int
    bound: float
    worst_value: float
    margin: float
    passed: bool


@dataclass
class BoundCheckResult:
    rows: list

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    @property
    def worst_margin(self):
        return min((r.margin for r in self.rows), default=math.inf)


def _bound_rows(entries, C, alpha, slack_fn):
    rows = []
    for (t, order, values, stderr) in entries:
        bound = C ** order * math.exp(order * t * alpha)
        values = np.atleast_1d(values)
        slack = slack_fn(stderr)
        upper_margin = float(np.min(bound + slack - values))
        lower_margin = float(np.min(values + slack))
        margin = min(upper_margin, lower_margin)
        worst = float(np.max(values))
        rows.append(BoundCheckRow(t=t, order=order, bound=bound,
                                  worst_value=worst, margin=margin,
                                  passed=margin >= 0.0))
    return rows


def sub_poissonian_check_estimates(estimates, C, alpha):
    """Check 0 <= k_hat^(n) <= C^n exp(n t alpha) with 3 sigma slack.

    Never raises on violation: the verdict and worst margin are
    returned for the caller to act on.
    """
    entries = [(e.t, e.order, e.values, e.stderr) for e in estimates]
    rows = _bound_rows(entries, C, alpha, lambda err: 3.0 * np.atleast_1d(err))
    return BoundCheckResult(rows=rows)


def sub_poissonian_check_field(field, C, alpha, t, slack=1e-8):
    """Deterministic-field variant with absolute slack (default 1e-8)."""
    entries = [(t, n, arr, None) for n, arr in field.order_arrays().items()]
    rows = _bound_rows(entries, C, alpha, lambda _: slack)
    return BoundCheckResult(rows=rows)


def pair_count_identity_gap(configs, bin_edges):
    """|sum over bins of k_hat^2 shellvol - <N(N-1)>/vol|: exact
    bookkeeping when the bins cover every min-image distance (d=1 with
    bins up to L/2)."""
    est = pair_correlation_estimate(configs, 0.0, bin_edges)
    lhs = float(np.sum(est.values * np.array(
        [shell_volume(configs[0].domain.dimension, bin_edges[i],
                      bin_edges[i + 1]) for i in range(len(bin_edges) - 1)])))
    counts = np.array([len(c) * (len(c) - 1) for c in configs], dtype=float)
    rhs = float(counts.mean() / configs[0].domain.volume)
    return abs(lhs - rhs)


def variance_positivity_value(k1_value, k2_of_r, window_lo, window_hi,
                              grid_pts=16):
    """Count-variance combination over a window by grid quadrature:
    double integral of k2 plus integral of k1 minus its square."""
    lo = np.atleast_1d(np.asarray(window_lo, dtype=float))
    hi = np.atleast_1d(np.asarray(window_hi, dtype=float))
    d = len(lo)
    axes = [lo[k] + (np.arange(grid_pts) + 0.5) * (hi[k] - lo[k]) / grid_pts
            for k in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    cellvol = float(np.prod((hi - lo) / grid_pts))
    diffs = nodes[:, None, :] - nodes[None, :, :]
    r = np.sqrt(np.sum(diffs * diffs, axis=2))
    double_int = float(np.sum(k2_of_r(r))) * cellvol * cellvol
    vol = float(np.prod(hi - lo))
    single_int = k1_value * vol
    return double_int + single_int - single_int ** 2


def piecewise_radial(est):
    """Piecewise-constant radial lookup from an order-2 estimate."""
    edges = est.bin_edges
    values = est.values

    def lookup(r):
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(edges, r, side="right") - 1, 0,
                      len(values) - 1)
        out = values[idx]
        return np.where(r <= edges[-1] + 1e-12, out, values[-1])

    return lookup


@dataclass
class VarianceCheckResult:
    value: float
    sigma: float
    passed: bool


def variance_positivity_check(k1_est, k2_est, window_lo, window_hi,
                              grid_pts=16, deterministic_slack=1e-8):
    """Pass iff the window count-variance combination is nonnegative
    within 3 sigma (statistical) or the absolute slack (deterministic)."""
    lo = np.atleast_1d(np.asarray(window_lo, dtype=float))
    hi = np.atleast_1d(np.asarray(window_hi, dtype=float))
    if np.all(hi == lo):
        return VarianceCheckResult(value=0.0, sigma=0.0, passed=True)
    k1 = float(k1_est.values[0])
    lookup = piecewise_radial(k2_est)
    value = variance_positivity_value(k1, lookup, lo, hi, grid_pts=grid_pts)
    vol = float(np.prod(hi - lo))
    dk1 = abs(vol - 2.0 * k1 * vol * vol) * float(k1_est.stderr[0])
    dk2 = float(np.sqrt(np.sum((k2_est.stderr * vol * vol) ** 2)))
    sigma = math.hypot(dk1, dk2)
    slack = 3.0 * sigma if sigma > 0 else deterministic_slack
    return VarianceCheckResult(value=value, sigma=sigma,
                               passed=value >= -slack)
