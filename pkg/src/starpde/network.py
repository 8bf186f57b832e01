"""Star-network geometry, tensor grids, network-valued fields and discrete norms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GridError(ValueError):
    """Raised when a grid cannot be built with the requested parameters."""


@dataclass(frozen=True)
class StarNetwork:
    """``ray_count`` copies of ``[0, ray_length]`` glued at x = 0."""

    ray_count: int
    ray_length: float

    def __post_init__(self):
        if int(self.ray_count) != self.ray_count or self.ray_count < 2:
            raise ValueError(f"ray_count must be an integer >= 2, got {self.ray_count}")
        if not self.ray_length > 0:
            raise ValueError(f"ray_length must be positive, got {self.ray_length}")


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid over [0, T] x [0, R] x [0, K].

    Spacings and node arrays are computed once at construction.
    """

    network: StarNetwork
    horizon: float
    l_max: float
    n_t: int
    n_x: int
    n_l: int
    dt: float = field(init=False)
    dx: float = field(init=False)
    dl: float = field(init=False)
    t: np.ndarray = field(init=False, repr=False, compare=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)
    l: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "dt", self.horizon / self.n_t)
        set_(self, "dx", self.network.ray_length / self.n_x)
        set_(self, "dl", self.l_max / self.n_l)
        set_(self, "t", _nodes(self.horizon, self.n_t))
        set_(self, "x", _nodes(self.network.ray_length, self.n_x))
        set_(self, "l", _nodes(self.l_max, self.n_l))
        for arr in (self.t, self.x, self.l):
            arr.flags.writeable = False

    @property
    def ray_count(self) -> int:
        return self.network.ray_count

    @property
    def inv_dt(self) -> float:
        """Coefficient multiplying u^k - u^{k-1} in the implicit step."""
        return self.n_t / self.horizon

    @property
    def inv_dl(self) -> float:
        return self.n_l / self.l_max


def _nodes(length: float, count: int) -> np.ndarray:
    # k * L / n exactly, not a cumulative sum of spacings
    return np.arange(count + 1, dtype=float) * length / count


def build_grid(
    network: StarNetwork,
    T: float,
    K: float,
    n_t: int,
    n_x: int,
    n_l: int,
    min_nt: int = 1,
    min_nl: int = 1,
) -> GridSpec:
    """Build the (t, x, l) grid and enforce the admissibility thresholds.

    ``min_nt`` / ``min_nl`` come from
    :func:`starpde.bounds.admissible_steps` (time) and the analogous
    threshold on |r| (local time).
    """
    if not (T > 0 and K > 0):
        raise GridError(f"horizon and l_max must be positive, got T={T}, K={K}")
    for name, val in (("n_t", n_t), ("n_x", n_x), ("n_l", n_l)):
        if int(val) != val or val < 1:
            raise GridError(f"{name} must be a positive integer, got {val}")
    if n_x < 2:
        raise GridError("n_x must be >= 2 (three-point junction stencil)")
    if n_t < min_nt:
        raise GridError(
            f"n_t below admissibility threshold: n_t={n_t} < {min_nt} "
            "= T*max(floor(|c|_inf)+1, |c|_inf^2)"
        )
    if n_l < min_nl:
        raise GridError(
            f"n_l below admissibility threshold: n_l={n_l} < {min_nl} "
            "= K*max(floor(|r|_inf)+1, |r|_inf^2)"
        )
    return GridSpec(network, float(T), float(K), int(n_t), int(n_x), int(n_l))


class NetworkField:
    """Scalar field on the star network at fixed (t, l).

    The junction value is stored once; ``values[:, 0]`` is rebuilt from it,
    so per-ray traces at x = 0 always agree.
    """

    __slots__ = ("_junction", "_interior")

    def __init__(self, junction_value: float, interior: np.ndarray):
        interior = np.array(interior, dtype=float)
        if interior.ndim != 2:
            raise ValueError("interior must have shape (ray_count, n_x)")
        interior.flags.writeable = False
        self._junction = float(junction_value)
        self._interior = interior

    @classmethod
    def from_values(cls, values: np.ndarray, tol: float = 0.0) -> "NetworkField":
        """Build from a dense (I, n_x + 1) array whose column 0 must agree."""
        values = np.asarray(values, dtype=float)
        j = values[0, 0]
        if np.max(np.abs(values[:, 0] - j)) > tol:
            raise ValueError("ray traces at the junction disagree")
        return cls(j, values[:, 1:])

    @classmethod
    def constant(cls, value: float, ray_count: int, n_x: int) -> "NetworkField":
        return cls(value, np.full((ray_count, n_x), float(value)))

    @property
    def junction_value(self) -> float:
        return self._junction

    @property
    def interior(self) -> np.ndarray:
        return self._interior

    @property
    def ray_count(self) -> int:
        return self._interior.shape[0]

    @property
    def n_x(self) -> int:
        return self._interior.shape[1]

    @property
    def values(self) -> np.ndarray:
        out = np.empty((self.ray_count, self.n_x + 1))
        out[:, 0] = self._junction
        out[:, 1:] = self._interior
        return out

    def __add__(self, other):
        if isinstance(other, NetworkField):
            return NetworkField(self._junction + other._junction, self._interior + other._interior)
        return NetworkField(self._junction + other, self._interior + other)

    def __sub__(self, other):
        if isinstance(other, NetworkField):
            return NetworkField(self._junction - other._junction, self._interior - other._interior)
        return NetworkField(self._junction - other, self._interior - other)

    def __mul__(self, s: float):
        return NetworkField(self._junction * s, self._interior * s)

    __rmul__ = __mul__

    def with_junction(self, value: float) -> "NetworkField":
        return NetworkField(value, self._interior)

    def __repr__(self):
        return f"NetworkField(junction={self._junction!r}, shape={self._interior.shape})"


def sup_norm(field: NetworkField | np.ndarray) -> float:
    """Maximum absolute value over all rays and nodes."""
    if isinstance(field, NetworkField):
        return max(abs(field.junction_value), float(np.max(np.abs(field.interior))))
    return float(np.max(np.abs(field)))


def lipschitz_seminorm(samples: Sequence[float], spacing: float) -> float:
    """Largest adjacent difference quotient of uniformly spaced samples."""
    s = np.asarray(samples, dtype=float)
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    return float(np.max(np.abs(np.diff(s))) / spacing)


def holder_quotient(
    samples: Sequence[float],
    spacing: float | Sequence[float],
    exponent: float,
    max_distance: float | None = None,
) -> float:
    """max |f(s) - f(t)| / |s - t|**exponent over all sample pairs.

    ``spacing`` is either the uniform step or the explicit sample
    coordinates. ``max_distance`` restricts to pairs with |s - t| <= max_distance.
    """
    s = np.asarray(samples, dtype=float)
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    if not 0 < exponent < 1:
        raise ValueError("exponent must lie in (0, 1)")
    if np.ndim(spacing) == 0:
        if not spacing > 0:
            raise ValueError("spacing must be positive")
        coords = np.arange(s.size) * float(spacing)
    else:
        coords = np.asarray(spacing, dtype=float)
        if coords.shape != s.shape or np.any(np.diff(coords) <= 0):
            raise ValueError("coordinates must be strictly increasing and match samples")
    best = 0.0
    for lag in range(1, s.size):
        dist = coords[lag:] - coords[:-lag]
        keep = np.ones(dist.shape, bool) if max_distance is None else dist <= max_distance * (1 + 1e-12)
        if not keep.any():
            break
        q = np.abs(s[lag:] - s[:-lag])[keep] / dist[keep] ** exponent
        best = max(best, float(np.max(q)))
    return best


def junction_continuity_check(
    field: NetworkField | np.ndarray,
    tol: float = 0.0,
    junction_value: float | None = None,
) -> bool:
    """True iff every ray trace at x = 0 is within ``tol`` of the junction value.

    Accepts a :class:`NetworkField` or a raw (I, n_x + 1) array together
    with an explicit ``junction_value``.
    """
    if isinstance(field, NetworkField):
        values, j = field.values, field.junction_value
    else:
        values = np.asarray(field, dtype=float)
        if junction_value is None:
            raise ValueError("junction_value is required for raw arrays")
        j = junction_value
    return bool(np.max(np.abs(values[:, 0] - j)) <= tol)


@dataclass(frozen=True)
class SolutionCube:
    """Discrete solution u[p][k][i][j] over l-levels, time, rays and space.

    ``junction[p, k]`` is the single stored junction value; ``interior``
    holds nodes j = 1..n_x of every ray.
    """

    grid: GridSpec
    junction: np.ndarray  # (n_l + 1, n_t + 1)
    interior: np.ndarray  # (n_l + 1, n_t + 1, I, n_x)

    def __post_init__(self):
        g = self.grid
        if self.junction.shape != (g.n_l + 1, g.n_t + 1):
            raise ValueError(f"junction has shape {self.junction.shape}")
        if self.interior.shape != (g.n_l + 1, g.n_t + 1, g.ray_count, g.n_x):
            raise ValueError(f"interior has shape {self.interior.shape}")
        self.junction.flags.writeable = False
        self.interior.flags.writeable = False

    def field(self, p: int, k: int) -> NetworkField:
        return NetworkField(self.junction[p, k], self.interior[p, k])

    def values(self) -> np.ndarray:
        """Dense (n_l + 1, n_t + 1, I, n_x + 1) array; column 0 repeats the junction."""
        g = self.grid
        out = np.empty((g.n_l + 1, g.n_t + 1, g.ray_count, g.n_x + 1))
        out[..., 0] = self.junction[:, :, None]
        out[..., 1:] = self.interior
        return out
