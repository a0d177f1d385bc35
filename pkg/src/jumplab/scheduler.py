"""Scale-of-Banach-spaces arithmetic: horizons, the Lambert-W
characterization of the optimal scale step, the global continuation
ladder, and norm certificates for the truncated series propagator.

The weighted sup norms lose "a little scale" per operator application;
the series propagator between scales theta_low < theta_high converges
for times below an explicit horizon.  Maximizing the horizon over the
upper scale leads to the transcendental equation delta e^delta =
e^(-theta)/mean_phi, solved by the principal Lambert-W branch; the
ladder restarts the series at a fixed fraction of the optimal horizon
and its cumulative time provably diverges, although with no stated
rate (the steps shrink double-exponentially as the scale grows).
"""

import math
from dataclasses import dataclass, field

_W_TOL = 1e-14
_W_MAX_ITER = 100


def lambert_w0(x):
    """Principal Lambert-W branch on x >= 0: returns w with w e^w = x.

    Halley iteration started from log(1 + x); fixed relative residual
    tolerance 1e-14, at most 100 iterations.
    """
    if x < 0:
        raise ValueError("lambert_w0 is only needed for x >= 0")
    if x == 0.0:
        return 0.0
    w = math.log1p(x)
    for _ in range(_W_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= _W_TOL * max(x, 1e-300):
            return w
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w -= f / denom
    return w


@dataclass(frozen=True)
class ScaleParams:
    """Model constants feeding the scale arithmetic.

    ``alpha`` is the total jump-kernel mass, ``mean_phi`` the potential
    integral, ``C`` the initial bound constant (the initial field obeys
    k <= C^n) and ``epsilon`` in (0, 1) the ladder damping.
    """

    alpha: float
    mean_phi: float
    C: float
    epsilon: float = 0.1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.mean_phi > 0:
            raise ValueError("mean_phi must be positive")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")

    @property
    def theta_star(self):
        return math.log(self.C)

    @classmethod
    def from_kernels(cls, kspec, C, epsilon=0.1):
        return cls(alpha=kspec.alpha, mean_phi=kspec.mean_phi, C=C,
                   epsilon=epsilon)

    @classmethod
    def from_lattice(cls, lattice_kernels, C, epsilon=0.1):
        return cls(alpha=lattice_kernels.alpha,
                   mean_phi=lattice_kernels.mean_phi, C=C, epsilon=epsilon)


def horizon_T(theta_high, theta_low, alpha, mean_phi):
    """Convergence horizon of the interacting series between two scales:
    ((theta_high - theta_low) / 2 alpha) exp(-mean_phi e^theta_high)."""
    if not theta_low < theta_high:
        raise ValueError("theta_low must be below theta_high")
    if alpha <= 0 or mean_phi < 0:
        raise ValueError("need alpha > 0 and mean_phi >= 0")
    return (theta_high - theta_low) / (2.0 * alpha) * math.exp(
        -mean_phi * math.exp(theta_high))


def horizon_Tbar(theta_high, theta_low, alpha):
    """Horizon of the free comparison series: (gap) / (2 alpha).

    Never smaller than the interacting horizon for the same pair.
    """
    if not theta_low < theta_high:
        raise ValueError("theta_low must be below theta_high")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return (theta_high - theta_low) / (2.0 * alpha)


def delta_theta(theta, params):
    """Optimal scale increment: the positive root of
    delta e^delta = e^(-theta) / mean_phi.

    Strictly decreasing in theta and vanishing as theta grows."""
    return lambert_w0(math.exp(-theta) / params.mean_phi)


def tau_theta(theta, params):
    """Best achievable horizon from scale theta:
    sup over upper scales of horizon_T, attained at theta + delta(theta);
    equals (delta / 2 alpha) exp(-1/delta)."""
    delta = delta_theta(theta, params)
    if delta <= 0.0:
        return 0.0
    return delta / (2.0 * params.alpha) * math.exp(-1.0 / delta)


def theta_of_t(t, params):
    """Scale reached by the domination envelope at time t: log C + t alpha."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.log(params.C) + t * params.alpha


class LadderAnomalyError(RuntimeError):
    """The continuation ladder hit its safety cap before the target."""


@dataclass
class ScaleLadder:
    """The continuation ladder: scales theta*_n, steps s_n and horizons.

    ``theta_star[n]`` is the scale after n steps (theta*_0 = log C),
    ``steps[n-1]`` the n-th step duration (1 - epsilon) tau(theta*_{n-1}),
    ``cumulative[n-1]`` the running sum, ``taus``/``deltas`` the per-step
    horizon data, and ``theta_high[n-1]`` the upper scale
    theta*_{n-1} + delta(theta*_{n-1}) certified for that step.
    """

    params: ScaleParams
    t_target: float
    theta_star: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    cumulative: list = field(default_factory=list)
    taus: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    theta_high: list = field(default_factory=list)
    reached_target: bool = False
    anomaly: str = ""

    @property
    def n_steps(self):
        return len(self.steps)

    def rows(self):
        """Per-step records: n, theta_star, delta, tau, s_n, cumulative."""
        out = []
        for n in range(self.n_steps):
            out.append({
                "n": n + 1,
                "theta_star": self.theta_star[n],
                "delta": self.deltas[n],
                "tau": self.taus[n],
                "s_n": self.steps[n],
                "cumulative": self.cumulative[n],
            })
        return out


def build_ladder(params, t_target, max_steps=10 ** 6):
    """Iterate the continuation recursion until the cumulative time
    reaches t_target.

    Each step advances by (1 - epsilon) tau(theta*) and lifts the scale
    along log C + alpha t.  The cumulative sum diverges, so any target
    is reached after finitely many steps in exact arithmetic; because
    tau decays double-exponentially in the scale, the step count blows
    up sharply with alpha * t_target, and the safety cap (default 10^6)
    reports an anomaly rather than truncating silently.  Steps that
    underflow to zero are likewise reported as an anomaly.
    """
    if t_target <= 0:
        raise ValueError("t_target must be positive")
    ladder = ScaleLadder(params=params, t_target=float(t_target))
    theta = params.theta_star
    ladder.theta_star.append(theta)
    cum = 0.0
    while cum < t_target:
        if ladder.n_steps >= max_steps:
            ladder.anomaly = (
                f"step cap {max_steps} reached at cumulative time {cum}; "
                f"tau has decayed to {ladder.taus[-1] if ladder.taus else 'n/a'}")
            return ladder
        delta = delta_theta(theta, params)
        tau = tau_theta(theta, params)
        s = (1.0 - params.epsilon) * tau
        if s <= 0.0:
            ladder.anomaly = (
                f"step size underflowed to zero at scale {theta} "
                f"(cumulative time {cum}); float64 cannot represent tau")
            return ladder
        cum += s
        ladder.deltas.append(delta)
        ladder.taus.append(tau)
        ladder.theta_high.append(theta + delta)
        ladder.steps.append(s)
        ladder.cumulative.append(cum)
        theta = theta_of_t(cum, params)
        ladder.theta_star.append(theta)
    ladder.reached_target = True
    return ladder


@dataclass(frozen=True)
class Certificate:
    """Auditable record behind one accepted series step.

    ``norm_bound`` (horizon / (horizon - t)) bounds the propagator norm
    between the two scales; ``single_application_bound`` is the
    one-application operator bound 2 alpha exp(mean_phi e^theta_low) /
    (e (theta_high - theta_low)); ``per_factor_bounds`` lists the ladder
    factor bounds n / (e horizon) entering the n-th series term.
    """

    theta_low: float
    theta_high: float
    t: float
    horizon: float
    valid: bool
    norm_bound: float
    single_application_bound: float
    geometric_ratio: float
    per_factor_bounds: tuple

    def as_dict(self):
        return {
            "theta_low": self.theta_low,
            "theta_high": self.theta_high,
            "t": self.t,
            "horizon": self.horizon,
            "valid": self.valid,
            "norm_bound": self.norm_bound,
            "single_application_bound": self.single_application_bound,
            "geometric_ratio": self.geometric_ratio,
            "per_factor_bounds": list(self.per_factor_bounds),
        }


def norm_certificate(theta_low, theta_high, t, params, n_factors=10):
    """Certificate for propagating time t between two scales.

    Valid iff t is strictly below the horizon; invalid certificates are
    returned (never raised) so callers can embed the refusal arithmetic
    in their outputs.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    horizon = horizon_T(theta_high, theta_low, params.alpha, params.mean_phi)
    valid = t < horizon
    norm_bound = horizon / (horizon - t) if valid else math.inf
    single = (2.0 * params.alpha
              * math.exp(params.mean_phi * math.exp(theta_low))
              / (math.e * (theta_high - theta_low)))
    factors = tuple(n / (math.e * horizon) for n in range(1, n_factors + 1))
    return Certificate(
        theta_low=float(theta_low), theta_high=float(theta_high), t=float(t),
        horizon=horizon, valid=valid, norm_bound=norm_bound,
        single_application_bound=single, geometric_ratio=t / horizon,
        per_factor_bounds=factors)
