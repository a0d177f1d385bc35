"""Periodic torus geometry and finite point configurations.

All positions live in the half-open box [0, L)^d and all displacement
arithmetic goes through the minimum-image convention, so every radial
formula written for free space can be evaluated on the torus unchanged.
"""

from dataclasses import dataclass, field

import numpy as np

_SPHERE_SURFACE = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


@dataclass(frozen=True)
class TorusDomain:
    """Periodic box [0, L)^d with d in {1, 2, 3}."""

    dimension: int
    side_length: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if not self.side_length > 0:
            raise ValueError(f"side_length must be positive, got {self.side_length}")

    @property
    def volume(self):
        return self.side_length ** self.dimension

    def wrap(self, points):
        """Map coordinates into [0, L) componentwise."""
        points = np.asarray(points, dtype=float)
        L = self.side_length
        return points - L * np.floor(points / L)

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        return bool(np.all(points >= 0.0) and np.all(points < self.side_length))


def min_image(p, q, domain):
    """Minimum-image representative of p - q.

    Every component of the result lies in [-L/2, L/2), so the Euclidean
    norm of the result is at most L*sqrt(d)/2.  Total function: any real
    inputs are first reduced modulo L.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    L = domain.side_length
    diff = p - q
    return diff - L * np.floor(diff / L + 0.5)


def min_image_distance(p, q, domain):
    d = min_image(p, q, domain)
    return float(np.sqrt(np.sum(d * d, axis=-1)))


def ball_volume(dimension, radius):
    """Volume of the d-ball, d in {1, 2, 3}."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if dimension == 1:
        return 2.0 * radius
    if dimension == 2:
        return np.pi * radius * radius
    if dimension == 3:
        return 4.0 * np.pi * radius ** 3 / 3.0
    raise ValueError(f"unsupported dimension {dimension}")


def shell_volume(dimension, r_lo, r_hi):
    """Volume of the spherical shell r_lo <= r <= r_hi."""
    if r_hi < r_lo:
        raise ValueError("shell bounds out of order")
    return ball_volume(dimension, r_hi) - ball_volume(dimension, r_lo)


def sphere_surface(dimension):
    return _SPHERE_SURFACE[dimension]


@dataclass
class Configuration:
    """Finite point configuration on the torus.

    ``points`` is an (n, d) float array with every coordinate in [0, L);
    ``ids`` carries one stable integer identifier per point (identifiers
    survive jumps, so trajectories of individual particles can be
    followed across snapshots).
    """

    domain: TorusDomain
    points: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, self.domain.dimension)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.shape[1] != self.domain.dimension:
            raise ValueError(
                f"points have dimension {pts.shape[1]}, domain has {self.domain.dimension}"
            )
        if pts.size and (pts.min() < 0.0 or pts.max() >= self.domain.side_length):
            raise ValueError("coordinates must lie in [0, L)")
        self.points = pts
        if self.ids is None:
            self.ids = np.arange(len(pts), dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)
            if len(self.ids) != len(pts):
                raise ValueError("ids and points must have equal length")
            if len(np.unique(self.ids)) != len(self.ids):
                raise ValueError("ids must be unique")

    def __len__(self):
        return len(self.points)

    def copy(self):
        return Configuration(self.domain, self.points.copy(), self.ids.copy())

    def index_of(self, particle_id):
        hits = np.nonzero(self.ids == particle_id)[0]
        if len(hits) != 1:
            raise KeyError(f"id {particle_id} not present exactly once")
        return int(hits[0])
