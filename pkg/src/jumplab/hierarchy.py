"""Lattice realization of the correlation-function evolution.

Stores correlation functions up to order N_max (2 by default, 3
optional) on a periodic lattice and evolves them under the jump
dynamics' correlation operator: a gain term that moves one cluster
point through the jump kernel and a loss term that integrates proposed
targets, each dressed with the repulsion factors exp(-phi) over the
cluster and a crowding correction that resums the unseen remainder of
the configuration through the expansion weight exp(-phi) - 1.  The
crowding correction is truncated at order M_Q; correlation orders above
N_max are supplied by an explicit, switchable closure.

Two representations are available: translation-invariant ("ti", scalar
density plus a profile over separations, the default) and full-grid
("grid", per-site arrays, required for order-3 fields and for
non-invariant initial data).

Lattice quadrature convention: sums over proposal and correction sites
run over the whole lattice, including tuples with coincident sites, so
stored arrays carry values on coincidence tuples as the natural
almost-everywhere extension (one quadrature cell's weight, the same
order as the discretization error).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .scheduler import horizon_T, horizon_Tbar

POISSON_TAIL = "poisson-tail"
ZERO_TAIL = "zero-tail"

INTERACTING = "interacting"
FREE = "free"


class HorizonError(RuntimeError):
    """Requested step time at or beyond the convergence horizon."""


class OverflowGuardError(RuntimeError):
    """Field values exceeded the configured guard (closure breakdown)."""


@dataclass(frozen=True)
class ClosureRule:
    """How correlation orders above n_max are supplied.

    ``poisson-tail`` factorizes excess points through the density
    (exact on Poisson fields); ``zero-tail`` sets them to zero.
    """

    kind: str = POISSON_TAIL
    n_max: int = 2

    def __post_init__(self):
        if self.kind not in (POISSON_TAIL, ZERO_TAIL):
            raise ValueError(f"unknown closure kind {self.kind!r}")
        if self.n_max not in (2, 3):
            raise ValueError("n_max must be 2 or 3")


@dataclass
class FieldDelta:
    """Time derivative of a field; the empty-cluster component is zero."""

    k1: object
    k2: np.ndarray
    k3: np.ndarray = None

    def scaled(self, c):
        return FieldDelta(
            k1=self.k1 * c, k2=self.k2 * c,
            k3=None if self.k3 is None else self.k3 * c)

    def plus(self, other, c=1.0):
        return FieldDelta(
            k1=self.k1 + c * other.k1, k2=self.k2 + c * other.k2,
            k3=None if self.k3 is None else self.k3 + c * other.k3)

    def max_abs(self):
        vals = [float(np.max(np.abs(np.atleast_1d(self.k1)))),
                float(np.max(np.abs(self.k2)))]
        if self.k3 is not None:
            vals.append(float(np.max(np.abs(self.k3))))
        return max(vals)

    def order_arrays(self):
        out = {1: np.atleast_1d(np.asarray(self.k1, dtype=float)), 2: self.k2}
        if self.k3 is not None:
            out[3] = self.k3
        return out


@dataclass
class CorrelationField:
    """Correlation functions of orders <= n_max on a lattice.

    ``k0`` is pinned to 1 (the empty-cluster value of any state) and the
    dynamics preserves it exactly.  In "ti" mode ``k1`` is a scalar and
    ``k2`` an array over separation indices; in "grid" mode ``k1`` is
    per-site, ``k2`` per site pair and ``k3`` (order 3) per site triple.
    ``qy_order`` is the truncation order M_Q of the crowding correction.
    """

    kernels: object
    mode: str
    k1: object
    k2: np.ndarray
    k3: np.ndarray = None
    closure: ClosureRule = ClosureRule()
    qy_order: int = 1
    k0: float = 1.0

    def __post_init__(self):
        if self.mode not in ("ti", "grid"):
            raise ValueError("mode must be 'ti' or 'grid'")
        if self.qy_order < 0:
            raise ValueError("qy_order must be nonnegative")
        if self.k0 != 1.0:
            raise ValueError("the empty-cluster value is identically 1")
        s = self.grid.n_sites
        if self.mode == "ti":
            self.k1 = float(self.k1)
            self.k2 = np.asarray(self.k2, dtype=float)
            if self.k2.shape != (s,):
                raise ValueError("ti mode stores k2 over separation indices")
            if self.closure.n_max == 3:
                raise ValueError("order-3 fields require grid mode")
        else:
            self.k1 = np.asarray(self.k1, dtype=float)
            self.k2 = np.asarray(self.k2, dtype=float)
            if self.k1.shape != (s,) or self.k2.shape != (s, s):
                raise ValueError("grid mode stores per-site arrays")
            if self.closure.n_max == 3:
                if self.k3 is None:
                    raise ValueError("n_max=3 needs a k3 array")
                if s > 64:
                    raise ValueError("order-3 fields are limited to <=64 sites")
                self.k3 = np.asarray(self.k3, dtype=float)
                if self.k3.shape != (s, s, s):
                    raise ValueError("k3 must be (S, S, S)")
        if not np.all(np.isfinite(self.k2)):
            raise ValueError("field values must be finite")

    @property
    def grid(self):
        return self.kernels.grid

    @property
    def n_max(self):
        return self.closure.n_max

    def copy(self):
        return replace(
            self,
            k1=(self.k1 if self.mode == "ti" else self.k1.copy()),
            k2=self.k2.copy(),
            k3=None if self.k3 is None else self.k3.copy())

    def shifted(self, delta, c=1.0):
        """New field with values k + c * delta; k0 stays exactly 1."""
        return replace(
            self,
            k1=self.k1 + c * delta.k1,
            k2=self.k2 + c * delta.k2,
            k3=None if self.k3 is None else self.k3 + c * delta.k3)

    def closure_density(self):
        """Density used by the poisson tail (scalar in ti mode)."""
        return self.k1

    def value(self, sites):
        """Field value on a tuple of site indices, closure applied."""
        return _field_value(self, tuple(int(s) for s in sites),
                            self.closure_density())

    def order_arrays(self):
        out = {1: np.atleast_1d(np.asarray(self.k1, dtype=float)), 2: self.k2}
        if self.k3 is not None:
            out[3] = self.k3
        return out

    def max_abs(self):
        return max(float(np.max(np.abs(arr)))
                   for arr in self.order_arrays().values())


def _density_at(closure_k1, z):
    if np.ndim(closure_k1) == 0:
        return float(closure_k1)
    return float(closure_k1[z])


def _field_value(field, sites, closure_k1):
    n = len(sites)
    if n == 0:
        return field.k0
    n_max = field.n_max
    if n > n_max:
        if field.closure.kind == ZERO_TAIL:
            return 0.0
        head = _field_value(field, sites[:n_max], closure_k1)
        for z in sites[n_max:]:
            head *= _density_at(closure_k1, z)
        return head
    if field.mode == "ti":
        if n == 1:
            return float(field.k1)
        sep = int(field.grid.sep_matrix[sites[0], sites[1]])
        return float(field.k2[sep])
    if n == 1:
        return float(field.k1[sites[0]])
    if n == 2:
        return float(field.k2[sites[0], sites[1]])
    return float(field.k3[sites[0], sites[1], sites[2]])


def apply_qy(field, y, eta):
    """Crowding-corrected field value at the cluster eta, seen from y.

    Truncates at order ``field.qy_order`` the resummation of
    k(eta united with unseen points) against the expansion weights
    exp(-phi(y - .)) - 1.  With phi == 0 or M_Q = 0 this is exactly the
    plain field value on eta.  ``eta`` holds at most n_max sites.
    """
    eta = tuple(int(s) for s in eta)
    if len(eta) > field.n_max:
        raise ValueError("cluster larger than the stored truncation order")
    grid = field.grid
    lk = field.kernels
    hd = grid.cell_volume
    closure_k1 = field.closure_density()
    t_row = lk.t_sep[grid.sep_matrix[int(y)]]  # t(y - z) over sites z
    total = _field_value(field, eta, closure_k1)
    s = grid.n_sites
    if field.qy_order >= 1:
        vals = np.array(
            [_field_value(field, eta + (z,), closure_k1) for z in range(s)])
        total += hd * float(t_row @ vals)
    if field.qy_order >= 2:
        acc = 0.0
        for z1 in range(s):
            w1 = t_row[z1]
            if w1 == 0.0:
                continue
            vals = np.array(
                [_field_value(field, eta + (z1, z2), closure_k1)
                 for z2 in range(s)])
            acc += w1 * float(t_row @ vals)
        total += 0.5 * hd * hd * acc
    if field.qy_order >= 3:
        raise NotImplementedError("crowding correction truncated at M_Q <= 2")
    return total


def _qf_vector(field, q):
    """Tail factor of the crowding correction on a size-n_max cluster."""
    qf = np.ones_like(q)
    if field.closure.kind == ZERO_TAIL:
        return qf
    if field.qy_order >= 1:
        qf = qf + q
    if field.qy_order >= 2:
        qf = qf + 0.5 * q * q
    return qf


def _apply_grid(field, closure_k1, free=False):
    lk = field.kernels
    grid = lk.grid
    s = grid.n_sites
    sep = grid.sep_matrix
    hd = grid.cell_volume
    W = hd * lk.a_sep[sep]
    if free:
        Tau = np.ones((s, s))
        Tm = np.zeros((s, s))
        GW = W
    else:
        Tau = lk.tau_sep[sep]
        Tm = lk.t_sep[sep]
        GW = W if lk.kspec.exclude_self_term else W * Tau

    k1 = np.asarray(field.k1, dtype=float)
    K2 = field.k2
    mq = field.qy_order
    poisson = field.closure.kind == POISSON_TAIL
    k1cl = np.broadcast_to(np.asarray(closure_k1, dtype=float), (s,))
    q = np.zeros(s) if free else hd * (Tm @ k1cl)
    qf = np.ones(s) if free else _qf_vector(field, q)

    n3 = field.closure.n_max == 3
    K3 = field.k3 if n3 else None

    # level 1: crowding-corrected value on singletons, Q1[y, x]
    Q1 = np.repeat(k1[None, :], s, axis=0)
    if mq >= 1 and not free:
        B = hd * (K2 @ Tm)        # B[x, y] = hd sum_z K2[x, z] t(y - z)
        if n3:
            Q1 = Q1 + B.T
            if mq >= 2:
                tmp = np.einsum("xzw,yw->xzy", K3, Tm)
                C3 = hd * hd * np.einsum("xzy,yz->xy", tmp, Tm)
                Q1 = Q1 + 0.5 * C3.T
        else:
            coef = np.ones(s)
            if mq >= 2 and poisson:
                coef = coef + 0.5 * q
            Q1 = Q1 + B.T * coef[:, None]
    gain1 = np.einsum("ux,ux->u", GW, Q1)
    if free:
        dk1 = gain1
    else:
        loss1 = np.einsum("uy,yu->u", GW, Q1)
        dk1 = gain1 - loss1

    # level 2
    if n3:
        Q2 = np.repeat(K2[None, :, :], s, axis=0)
        if mq >= 1 and not free:
            D3 = hd * np.einsum("abz,yz->yab", K3, Tm)
            coef = np.ones(s)
            if mq >= 2 and poisson:
                coef = coef + 0.5 * q
            Q2 = Q2 + D3 * coef[:, None, None]
        g = np.einsum("ux,uvx->uv", GW, Q2)
        gain2 = Tau * (g + g.T)
        if free:
            dk2 = gain2
        else:
            l2 = np.einsum("uy,yv,yuv->uv", GW, Tau, Q2)
            dk2 = gain2 - (l2 + l2.T)
    else:
        P = GW @ K2
        gain2 = Tau * (qf[:, None] * P + qf[None, :] * P.T)
        if free:
            dk2 = gain2
        else:
            R = (GW * qf[None, :]) @ Tau
            dk2 = gain2 - K2 * (R + R.T)

    dk3 = None
    if n3:
        E = np.einsum("ux,vwx->uvw", GW, K3)
        Gn = Tau[:, :, None] * Tau[:, None, :] * qf[:, None, None] * E
        # removed slots: (u,v,w) -> Gn[u,v,w], Gn[v,u,w], Gn[w,u,v]
        gain3 = Gn + Gn.transpose(1, 0, 2) + Gn.transpose(1, 2, 0)
        if free:
            dk3 = gain3
        else:
            F = np.einsum("uy,yv,yw,y->uvw", GW, Tau, Tau, qf)
            dk3 = gain3 - K3 * (F + F.transpose(1, 0, 2) + F.transpose(1, 2, 0))

    return FieldDelta(k1=dk1, k2=dk2, k3=dk3)


def _apply_ti(field, closure_k1, free=False):
    lk = field.kernels
    grid = lk.grid
    hd = grid.cell_volume
    sub = grid.sub_matrix
    k1 = float(field.k1)
    k2 = field.k2
    mq = field.qy_order
    poisson = field.closure.kind == POISSON_TAIL

    if free:
        gw = hd * lk.a_sep
        dk1 = float(gw.sum()) * k1
        dk2 = 2.0 * grid.convolve(gw, k2)
        return FieldDelta(k1=dk1, k2=dk2, k3=None)

    tau = lk.tau_sep
    tvec = lk.t_sep
    gw = hd * lk.a_sep if lk.kspec.exclude_self_term else hd * lk.a_sep * tau

    k1cl = float(closure_k1) if np.ndim(closure_k1) == 0 else float(
        np.mean(closure_k1))
    q_sc = k1cl * (hd * float(tvec.sum()))
    if field.closure.kind == ZERO_TAIL:
        qf = 1.0
    else:
        qf = 1.0
        if mq >= 1:
            qf += q_sc
        if mq >= 2:
            qf += 0.5 * q_sc * q_sc

    # level 1: gain and loss cancel for translation-invariant fields;
    # both sides are computed so the cancellation is measured, not assumed
    coef = 0.0
    if mq >= 1:
        coef = 1.0
        if mq >= 2 and poisson:
            coef += 0.5 * q_sc
    if coef != 0.0:
        k2sub = k2[sub]                  # k2sub[a, b] = k2[a - b]
        m1g = hd * (k2sub.T @ tvec)      # m1g[s] = hd sum_z t(z) k2(z - s)
        m1l = hd * (tvec[sub] @ k2)      # m1l[s] = hd sum_z t(s - z) k2(z)
        gain1 = float(gw @ (k1 + coef * m1g))
        loss1 = float(gw @ (k1 + coef * m1l))
    else:
        gain1 = float(gw.sum()) * k1
        loss1 = float(gw.sum()) * k1
    dk1 = gain1 - loss1

    # level 2: convolution gain against the jump weights, pointwise loss
    conv_gk2 = grid.convolve(gw, k2)
    conv_gtau = grid.convolve(gw, tau)
    dk2 = 2.0 * qf * (tau * conv_gk2 - k2 * conv_gtau)
    return FieldDelta(k1=dk1, k2=dk2, k3=None)


def apply_ldelta(field, closure_density=None):
    """Time derivative of the field under the interacting dynamics.

    ``closure_density`` optionally freezes the density used by the
    poisson tail (the series stepper passes the base field's density so
    iterated applications form a linear operator); by default the
    field's own density is used.  The empty-cluster derivative is
    identically zero, so k0 = 1 is conserved exactly.
    """
    cd = field.closure_density() if closure_density is None else closure_density
    if field.mode == "ti":
        return _apply_ti(field, cd, free=False)
    return _apply_grid(field, cd, free=False)


def apply_lbar(field):
    """Free comparison operator: the gain term with phi set to zero.

    Maps nonnegative fields to nonnegative derivatives; its exponential
    dominates the interacting evolution started below a constant field.
    """
    if field.mode == "ti":
        return _apply_ti(field, field.closure_density(), free=True)
    return _apply_grid(field, field.closure_density(), free=True)


@dataclass(frozen=True)
class ScaleNormReport:
    theta: float
    norm_value: float


def scale_norm(field_or_delta, theta):
    """Weighted sup over stored orders n >= 1 of |k^(n)| e^(-theta n)."""
    arrays = field_or_delta.order_arrays()
    value = 0.0
    for n, arr in arrays.items():
        mx = float(np.max(np.abs(arr))) if np.size(arr) else 0.0
        value = max(value, mx * math.exp(-theta * n))
    return ScaleNormReport(theta=float(theta), norm_value=value)


def free_solution(C, alpha, t, n):
    """Constant-field evolution under the free comparison operator:
    C^n exp(t alpha n), the global domination envelope."""
    if C <= 0:
        raise ValueError("C must be positive")
    if t < 0 or n < 0:
        raise ValueError("t and n must be nonnegative")
    return C ** n * math.exp(t * alpha * n)


@dataclass(frozen=True)
class TaylorDiagnostics:
    t: float
    horizon: float
    n_terms: int
    last_term_norm: float
    theta_low: float
    theta_high: float
    tail_bound: float


def _series_horizon(field, which, theta_low, theta_high):
    lk = field.kernels
    if which == FREE:
        return horizon_Tbar(theta_high, theta_low, lk.alpha)
    return horizon_T(theta_high, theta_low, lk.alpha, lk.mean_phi)


def taylor_semigroup_step(field, t, order, which=INTERACTING,
                          theta_low=None, theta_high=None):
    """One truncated series step: sum over n of t^n/n! L^n on the field.

    Refuses t at or beyond the horizon of the scale pair (theta_low,
    theta_high), where the series has no convergence guarantee.  The
    poisson closure density is frozen at the input field, making the
    iterated operator linear; in translation-invariant mode the density
    is conserved by the dynamics, so this agrees with the literal
    operator.  Returns (field, diagnostics); the diagnostics carry the
    norm of the last retained term at theta_high as the truncation
    measure.
    """
    if order < 1:
        raise ValueError("series order must be >= 1")
    if theta_low is None or theta_high is None:
        raise ValueError("a scale pair (theta_low < theta_high) is required")
    if not theta_low < theta_high:
        raise ValueError("theta_low must be below theta_high")
    if t < 0:
        raise ValueError("t must be nonnegative")
    horizon = _series_horizon(field, which, theta_low, theta_high)
    if t >= horizon:
        raise HorizonError(
            f"step time {t} is not below the horizon {horizon} of the scale "
            f"pair ({theta_low}, {theta_high}); no convergence guarantee")
    result = field.copy()
    if t == 0.0:
        return result, TaylorDiagnostics(
            t=0.0, horizon=horizon, n_terms=0, last_term_norm=0.0,
            theta_low=theta_low, theta_high=theta_high, tail_bound=0.0)
    frozen = field.closure_density()
    if which == FREE:
        op = apply_lbar
    else:
        def op(f):
            return apply_ldelta(f, closure_density=frozen)
    term_field = field.copy()
    last_norm = 0.0
    for n in range(1, order + 1):
        delta = op(term_field).scaled(t / n)
        term_field = replace(field, k1=delta.k1, k2=delta.k2, k3=delta.k3)
        result = result.shifted(delta, 1.0)
        last_norm = scale_norm(delta, theta_high).norm_value
    ratio = t / horizon
    tail_bound = last_norm * ratio / (1.0 - ratio) if ratio < 1 else math.inf
    return result, TaylorDiagnostics(
        t=t, horizon=horizon, n_terms=order, last_term_norm=last_norm,
        theta_low=theta_low, theta_high=theta_high, tail_bound=tail_bound)


def rk4_step(field, dt, which=INTERACTING):
    """Classical fourth-order step of the literal (unfrozen) dynamics."""
    op = apply_lbar if which == FREE else apply_ldelta
    f1 = op(field)
    f2 = op(field.shifted(f1, dt / 2.0))
    f3 = op(field.shifted(f2, dt / 2.0))
    f4 = op(field.shifted(f3, dt))
    incr = f1.plus(f2, 2.0).plus(f3, 2.0).plus(f4, 1.0)
    return field.shifted(incr, dt / 6.0)


def integrate_rk4(field, t_end, dt, which=INTERACTING, guard=1e12,
                  record_every=1):
    """Fixed-step trajectory; aborts when any value exceeds the guard.

    The empty-cluster value is asserted equal to 1 at every step (a
    violation raises; the dynamics never touches it).
    """
    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end nonnegative")
    # shrink the step so it divides t_end exactly; the endpoint must be hit
    n_steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    h = t_end / n_steps
    out = [(0.0, field.copy())]
    cur = field
    for i in range(1, n_steps + 1):
        cur = rk4_step(cur, h, which=which)
        if cur.k0 != 1.0:
            raise RuntimeError("empty-cluster value drifted from 1")
        mx = cur.max_abs()
        if mx > guard:
            raise OverflowGuardError(
                f"field magnitude {mx} exceeded the guard {guard} at step {i}")
        if i % record_every == 0 or i == n_steps:
            out.append((t_end if i == n_steps else i * h, cur.copy()))
    return out


def poisson_field(lattice_kernels, kappa, mode="ti", closure=None, qy_order=1):
    """Constant field kappa^n: the correlation functions of Poisson(kappa)."""
    closure = closure or ClosureRule()
    s = lattice_kernels.grid.n_sites
    if mode == "ti":
        return CorrelationField(
            kernels=lattice_kernels, mode="ti", k1=float(kappa),
            k2=np.full(s, float(kappa) ** 2), closure=closure,
            qy_order=qy_order)
    k3 = np.full((s, s, s), float(kappa) ** 3) if closure.n_max == 3 else None
    return CorrelationField(
        kernels=lattice_kernels, mode="grid", k1=np.full(s, float(kappa)),
        k2=np.full((s, s), float(kappa) ** 2), k3=k3, closure=closure,
        qy_order=qy_order)


def random_unit_ball_field(lattice_kernels, theta, rng, mode="ti",
                           closure=None, qy_order=1, nonnegative=False):
    """Random field with weighted sup norm at most 1 at the given scale.

    Values of order n are bounded by exp(theta n); the symmetry of the
    stored arrays is enforced.  Used by the operator-bound and
    certificate soundness suites.
    """
    closure = closure or ClosureRule()
    grid = lattice_kernels.grid
    s = grid.n_sites
    lo = 0.0 if nonnegative else -1.0

    def draw(shape):
        return rng.uniform(lo, 1.0, size=shape)

    e1, e2, e3 = math.exp(theta), math.exp(2 * theta), math.exp(3 * theta)
    if mode == "ti":
        k2 = draw(s) * e2
        k2 = 0.5 * (k2 + k2[grid.neg_index])
        return CorrelationField(
            kernels=lattice_kernels, mode="ti", k1=float(draw(())) * e1,
            k2=k2, closure=closure, qy_order=qy_order)
    k1 = draw(s) * e1
    k2 = draw((s, s)) * e2
    k2 = 0.5 * (k2 + k2.T)
    k3 = None
    if closure.n_max == 3:
        k3 = draw((s, s, s)) * e3
        k3 = (k3 + k3.transpose(0, 2, 1) + k3.transpose(1, 0, 2)
              + k3.transpose(1, 2, 0) + k3.transpose(2, 0, 1)
              + k3.transpose(2, 1, 0)) / 6.0
    return CorrelationField(
        kernels=lattice_kernels, mode="grid", k1=k1, k2=k2, k3=k3,
        closure=closure, qy_order=qy_order)
