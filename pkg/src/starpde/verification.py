"""Manufactured solutions, error norms, observed orders and property checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .localtime import run_backward
from .network import GridSpec, SolutionCube, StarNetwork, build_grid
from .problem import (ClassicalProblemData, CoefficientField, ProblemData, ProblemError,
                      as_field)
from .rothe import Trajectory


@dataclass(frozen=True)
class ManufacturedCase:
    """Problem data induced by a closed-form solution, plus that solution."""

    data: ProblemData | ClassicalProblemData
    exact: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    description: str = ""
    params: dict = field(default_factory=dict)


def _scalar_fn(value) -> Callable:
    """A function of l from a callable, an expression string in l or a number."""
    if callable(value) and not isinstance(value, CoefficientField):
        return value
    fld = as_field(value)
    return lambda l: fld(0.0, 0.0, l)


def manufactured_cosine(
    h,
    dh,
    *,
    network: StarNetwork,
    horizon: float = 1.0,
    l_max: float = 1.0,
    a=1.0,
    b=0.0,
    c=0.0,
    r=0.0,
    alpha=1.0,
    a_floor: float | None = None,
    alpha_floor: float | None = None,
    name: str = "manufactured_cosine",
) -> ManufacturedCase:
    """u_i(t, x, l) = exp(-t) cos(pi x / R) h(l) on every ray.

    ``h`` and ``dh`` are h and h' as callables of l (or expression strings
    in l). h(K) must equal 1 so the terminal data match g at t = 0.
    Coefficients a, b, c, r, alpha may be numbers, expressions or callables.
    """
    h, dh = _scalar_fn(h), _scalar_fn(dh)
    K = float(l_max)
    hK = float(np.asarray(h(np.array(K))))
    if abs(hK - 1.0) > 1e-12:
        raise ProblemError(f"h(K) = {hK!r} must equal 1 within 1e-12")
    R = network.ray_length
    k = math.pi / R
    fa, fb, fc, fr = (as_field(v) for v in (a, b, c, r))

    def exact(t, x, l):
        return np.exp(-t) * np.cos(k * x) * h(l)

    def f(t, x, l):
        u = exact(t, x, l)
        return (-1.0 + fa(t, x, l) * k**2 + fc(t, x, l)) * u - fb(t, x, l) * k * np.exp(-t) * np.sin(k * x) * h(l)

    def phi(t, x, l):
        return (dh(l) - fr(t, x, l) * h(l)) * np.exp(-t)

    def psi(t, x, l):
        return exact(t, x, K)

    def g(t, x, l):
        return exact(0.0, x, l)

    def dl_g0(t, x, l):
        return dh(l)

    if a_floor is None:
        a_floor = _float_or_none(a)
    if alpha_floor is None:
        alpha_floor = _float_or_none(alpha)
    if a_floor is None or alpha_floor is None:
        raise ProblemError("a_floor / alpha_floor required for non-constant a or alpha")
    data = ProblemData.create(
        network, horizon, K, a=fa, b=fb, c=fc, f=f, alpha=alpha, r=fr, phi=phi,
        psi=psi, g=g, dl_g0=dl_g0, a_floor=a_floor, alpha_floor=alpha_floor, name=name,
    )
    params = {"R": R, "K": K, "T": horizon, "a": _src(a), "b": _src(b), "c": _src(c), "r": _src(r)}
    return ManufacturedCase(data, exact, "exp(-t) cos(pi x / R) h(l)", params)


def manufactured_classical(
    *,
    network: StarNetwork,
    horizon: float = 1.0,
    a=1.0,
    b=0.0,
    c=0.0,
    alpha=1.0,
    lam=1.0,
    a_floor: float | None = None,
    alpha_floor: float | None = None,
    lambda_floor: float | None = None,
    name: str = "manufactured_classical",
) -> ManufacturedCase:
    """u_i(t, x) = exp(-t) cos(pi x / R) for the Robin-Kirchhoff problem.

    The flux vanishes at the junction, so gamma(t) = -lambda(t) exp(-t).
    """
    R = network.ray_length
    k = math.pi / R
    fa, fb, fc, flam = (as_field(v) for v in (a, b, c, lam))

    def exact(t, x, l=0.0):
        return np.exp(-t) * np.cos(k * x)

    def f(t, x, l):
        u = exact(t, x)
        return (-1.0 + fa(t, x, l) * k**2 + fc(t, x, l)) * u - fb(t, x, l) * k * np.exp(-t) * np.sin(k * x)

    def gamma(t, x, l):
        return -flam(t, 0.0, 0.0) * np.exp(-t)

    floors = [a_floor if a_floor is not None else _float_or_none(a),
              alpha_floor if alpha_floor is not None else _float_or_none(alpha),
              lambda_floor if lambda_floor is not None else _float_or_none(lam)]
    if any(v is None for v in floors):
        raise ProblemError("floors required for non-constant a, alpha or lambda")
    data = ClassicalProblemData.create(
        network, horizon, a=fa, b=fb, c=fc, f=f, alpha=alpha, lam=flam, gamma=gamma,
        g=lambda t, x, l: exact(0.0, x), a_floor=floors[0], alpha_floor=floors[1],
        lambda_floor=floors[2], name=name,
    )
    return ManufacturedCase(data, exact, "exp(-t) cos(pi x / R)", {"R": R, "T": horizon})


def _float_or_none(v):
    return float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else None


def _src(v):
    return v if isinstance(v, (int, float, str)) else getattr(as_field(v), "source", None)


_MANUFACTURED_KEYS = {"name", "kind", "rays", "R", "T", "K", "a", "b", "c", "r", "alpha",
                      "h", "dh", "a_floor", "alpha_floor", "grid", "norms", "description"}


def manufactured_from_dict(doc: dict) -> ManufacturedCase:
    unknown = set(doc) - _MANUFACTURED_KEYS
    if unknown:
        raise ProblemError(f"unknown fields for kind 'manufactured_cosine': {sorted(unknown)}")
    try:
        network = StarNetwork(int(doc["rays"]), float(doc.get("R", 1.0)))
        case = manufactured_cosine(
            doc["h"], doc["dh"], network=network, horizon=doc.get("T", 1.0),
            l_max=doc.get("K", 1.0), a=doc.get("a", 1.0), b=doc.get("b", 0.0),
            c=doc.get("c", 0.0), r=doc.get("r", 0.0), alpha=doc.get("alpha", 1.0),
            a_floor=doc.get("a_floor"), alpha_floor=doc.get("alpha_floor"),
            name=doc.get("name", "manufactured_cosine"),
        )
    except KeyError as exc:
        raise ProblemError(f"missing required field {exc.args[0]!r}") from None
    if doc.get("norms"):
        case = ManufacturedCase(case.data.replace(declared_norms=dict(doc["norms"])),
                                case.exact, case.description, case.params)
    return case


_CLASSICAL_MANUFACTURED_KEYS = {"name", "kind", "rays", "R", "T", "a", "b", "c", "alpha", "lambda",
                                "a_floor", "alpha_floor", "lambda_floor", "grid", "norms", "description"}


def manufactured_classical_from_dict(doc: dict) -> ManufacturedCase:
    unknown = set(doc) - _CLASSICAL_MANUFACTURED_KEYS
    if unknown:
        raise ProblemError(f"unknown fields for kind 'manufactured_classical': {sorted(unknown)}")
    try:
        network = StarNetwork(int(doc["rays"]), float(doc.get("R", 1.0)))
    except KeyError as exc:
        raise ProblemError(f"missing required field {exc.args[0]!r}") from None
    case = manufactured_classical(
        network=network, horizon=doc.get("T", 1.0), a=doc.get("a", 1.0), b=doc.get("b", 0.0),
        c=doc.get("c", 0.0), alpha=doc.get("alpha", 1.0), lam=doc.get("lambda", 1.0),
        a_floor=doc.get("a_floor"), alpha_floor=doc.get("alpha_floor"),
        lambda_floor=doc.get("lambda_floor"), name=doc.get("name", "manufactured_classical"),
    )
    if doc.get("norms"):
        case = ManufacturedCase(case.data.replace(declared_norms=dict(doc["norms"])),
                                case.exact, case.description, case.params)
    return case


def case_from_dict(doc: dict) -> ManufacturedCase:
    kind = doc.get("kind")
    if kind == "manufactured_cosine":
        return manufactured_from_dict(doc)
    if kind == "manufactured_classical":
        return manufactured_classical_from_dict(doc)
    raise ProblemError(f"kind {kind!r} has no closed-form solution")


# -- errors and orders --------------------------------------------------------


def exact_on_grid(exact, grid: GridSpec, kind: str = "cube") -> np.ndarray:
    """Exact solution at the nodes, shaped like ``values()`` of a cube or trajectory."""
    I = grid.ray_count
    if kind == "cube":
        L, T, X = grid.l[:, None, None, None], grid.t[None, :, None, None], grid.x[None, None, None, :]
        shape = (grid.n_l + 1, grid.n_t + 1, I, grid.n_x + 1)
    else:
        L, T, X = 0.0, grid.t[:, None, None], grid.x[None, None, :]
        shape = (grid.n_t + 1, I, grid.n_x + 1)
    return np.broadcast_to(np.asarray(exact(T, X, L), dtype=float), shape)


def error_norms(solution: SolutionCube | Trajectory | np.ndarray, exact, grid: GridSpec | None = None) -> dict:
    """Sup and RMS of node-wise differences; ``exact`` is a callable or an array."""
    if isinstance(solution, (SolutionCube, Trajectory)):
        vals = solution.values()
        grid = solution.grid
        kind = "cube" if isinstance(solution, SolutionCube) else "trajectory"
    else:
        vals = np.asarray(solution, dtype=float)
        kind = "cube" if vals.ndim == 4 else "trajectory"
    ref = exact_on_grid(exact, grid, kind) if callable(exact) else np.asarray(exact, dtype=float)
    err = vals - ref
    return {"sup": float(np.max(np.abs(err))), "rms": float(np.sqrt(np.mean(err**2)))}


def convergence_order(errors, spacings) -> float:
    """Least-squares slope of log(error) against log(spacing)."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(spacings, dtype=float)
    if e.size < 3 or e.size != h.size:
        raise ValueError("need at least three (error, spacing) pairs of equal length")
    if np.any(np.diff(h) >= 0):
        raise ValueError("spacings must be strictly decreasing")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and spacings must be positive")
    slope = np.polyfit(np.log(h), np.log(e), 1)[0]
    return float(slope)


# -- comparison ---------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonResult:
    passed: bool
    worst_violation: float  # max(original - perturbed), <= 0 when monotone
    location: tuple
    min_increase: float
    tolerance: float

    def to_dict(self):
        return {"passed": self.passed, "worst_violation": self.worst_violation,
                "location": list(self.location), "min_increase": self.min_increase,
                "tolerance": self.tolerance}


def _shift(fields, delta, sign):
    d = as_field(delta)
    out = []
    for fld in fields:
        out.append(CoefficientField(lambda t, x, l, fld=fld: fld(t, x, l) + sign * d(t, x, l)))
    return tuple(out)


def perturbed_data(data: ProblemData, bump=0.0, drop=0.0) -> ProblemData:
    """f + bump on every ray and phi - drop."""
    return data.replace(f=_shift(data.f, bump, 1.0), phi=_shift((data.phi,), drop, -1.0)[0])


def comparison_test(data: ProblemData, grid: GridSpec, bump=0.0, drop=0.0,
                    scheme: str = "upwind", tol: float = 1e-10,
                    base: SolutionCube | None = None) -> ComparisonResult:
    """Solve with (f, phi) and (f + bump, phi - drop); the second must dominate.

    The perturbed run skips the compatibility checks: lowering phi breaks
    the junction compatibility of the data by design.
    """
    if scheme != "upwind":
        raise ValueError("the comparison property is guaranteed for the upwind scheme only")
    if base is None:
        base = run_backward(data, grid, scheme)
    pert = run_backward(perturbed_data(data, bump, drop), grid, scheme, check=False)
    diff = base.values() - pert.values()
    idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
    worst = float(diff[idx])
    return ComparisonResult(worst <= tol, worst, tuple(int(i) for i in idx),
                            float(-np.max(diff)), tol)


# -- interpolation inequality ------------------------------------------------


def axis_holder(values: np.ndarray, coords: np.ndarray, axis: int, exponent: float,
                max_distance: float = 1.0) -> float:
    """Largest |v(s) - v(s')| / |s - s'|^exponent along ``axis`` over node pairs."""
    v = np.moveaxis(np.asarray(values, float), axis, 0)
    s = np.asarray(coords, float)
    best = 0.0
    for d in range(1, v.shape[0]):
        dist = s[d:] - s[:-d]
        keep = dist <= max_distance + 1e-12
        if not keep.any():
            break
        diff = np.abs(v[d:] - v[:-d])[keep]
        w = dist[keep].reshape((-1,) + (1,) * (v.ndim - 1)) ** exponent
        best = max(best, float(np.max(diff / w)))
    return best


def interpolation_constant(nu_a: float, nu3: float, gamma_exp: float) -> float:
    """2 nu3 (nu_a/(g nu3))^{g/(1+g)} + 2 nu_a (g nu3/nu_a)^{-1/(1+g)}."""
    g = gamma_exp
    return (2 * nu3 * (nu_a / (g * nu3)) ** (g / (1 + g))
            + 2 * nu_a * (g * nu3 / nu_a) ** (-1 / (1 + g)))


@dataclass(frozen=True)
class HolderCheck:
    status: str  # "pass", "fail" or "vacuous"
    nu: tuple[float, float, float]
    quotient: float
    bound: float
    exponent: float

    @property
    def passed(self) -> bool:
        return self.status != "fail"


def holder_interpolation_check(
    values: np.ndarray,
    t: np.ndarray,
    x: np.ndarray,
    l: np.ndarray,
    alpha: float,
    beta: float,
    gamma_exp: float,
    tol: float = 0.1,
    degenerate: float = 1e-8,
) -> dict[str, HolderCheck]:
    """Check both conclusions of the interpolation inequality on samples.

    ``values`` is indexed [l, t, ray, x]. nu1 and nu2 are the measured
    t- and l-Hoelder constants of u, nu3 the x-Hoelder constant of d_x u
    (centred differences inside, second-order one-sided at the ends).
    """
    u = np.asarray(values, dtype=float)
    dx = float(x[1] - x[0])
    ux = np.gradient(u, dx, axis=-1, edge_order=2) if u.shape[-1] >= 3 else np.gradient(u, dx, axis=-1)
    nu1 = axis_holder(u, t, 1, alpha) if len(t) > 1 else 0.0
    nu2 = axis_holder(u, l, 0, beta) if len(l) > 1 else 0.0
    nu3 = axis_holder(ux, x, 3, gamma_exp, max_distance=np.inf)
    out = {}
    for key, nu_a, coords, axis, expo in (("t", nu1, t, 1, alpha), ("l", nu2, l, 0, beta)):
        e = expo * gamma_exp / (1 + gamma_exp)
        if nu_a <= degenerate or nu3 <= degenerate or len(coords) < 2:
            out[key] = HolderCheck("vacuous", (nu1, nu2, nu3), 0.0, math.inf, e)
            continue
        q = axis_holder(ux, coords, axis, e)
        bound = interpolation_constant(nu_a, nu3, gamma_exp)
        out[key] = HolderCheck("pass" if q <= bound * (1 + tol) else "fail", (nu1, nu2, nu3), q, bound, e)
    return out


# -- refinement sweeps ----------------------------------------------------------


AXES = ("t", "x", "l")


def refinement_grids(network: StarNetwork, horizon: float, l_max: float, base=(16, 32, 16),
                     levels: int = 3, axis: str = "all") -> list[GridSpec]:
    """Dyadic refinements of one axis (others at their finest) or of all axes."""
    n_fine = tuple(n * 2 ** (levels - 1) for n in base)
    grids = []
    for s in range(levels):
        m = 2**s
        if axis == "all":
            n = tuple(v * m for v in base)
        else:
            i = AXES.index(axis)
            n = list(n_fine)
            n[i] = base[i] * m
            n = tuple(n)
        grids.append(build_grid(network, horizon, l_max, n[0], n[1], n[2]))
    return grids


def restrict(values: np.ndarray, fine: GridSpec, coarse: GridSpec) -> np.ndarray:
    """Fine cube values at the coarse grid's nodes (nested dyadic grids)."""
    sl = fine.n_l // coarse.n_l
    st = fine.n_t // coarse.n_t
    sx = fine.n_x // coarse.n_x
    return values[::sl, ::st, :, ::sx]


def richardson_differences(cubes: list[SolutionCube]) -> list[float]:
    """sup |u_h - u_{h/2}| at common nodes for successive grids."""
    out = []
    for coarse, fine in zip(cubes[:-1], cubes[1:]):
        out.append(float(np.max(np.abs(coarse.values() - restrict(fine.values(), fine.grid, coarse.grid)))))
    return out


def observed_order(differences, ratio: float = 2.0, spacings=None) -> float:
    """Order from successive-grid differences.

    Two differences give the three-grid estimate log(d0/d1)/log(ratio);
    more are fitted by least squares against the coarse spacings.
    """
    d = np.asarray(differences, dtype=float)
    if d.size < 2:
        raise ValueError("need at least two successive differences")
    if d.size == 2:
        if np.any(d <= 0):
            raise ValueError("differences must be positive")
        return float(np.log(d[0] / d[1]) / np.log(ratio))
    h = spacings if spacings is not None else ratio ** -np.arange(d.size, dtype=float)
    return convergence_order(d, h[: d.size])


@dataclass(frozen=True)
class AxisSweep:
    axis: str
    grids: tuple
    spacings: tuple
    errors: tuple  # sup error against the exact solution
    differences: tuple  # sup |u_h - u_{h/2}| on common nodes
    order: float  # from the differences
    order_vs_exact: float | None

    def rows(self):
        for s, (g, h, e) in enumerate(zip(self.grids, self.spacings, self.errors)):
            d = self.differences[s] if s < len(self.differences) else float("nan")
            yield (self.axis, g.n_t, g.n_x, g.n_l, h, e, d)


def _spacing(grid: GridSpec, axis: str) -> float:
    return {"t": grid.dt, "x": grid.dx, "l": grid.dl}[axis]


def axis_sweep(case: ManufacturedCase, axis: str, base=(16, 32, 16), levels: int = 3,
               scheme: str = "centered", mapper=map) -> AxisSweep:
    """Refine one axis dyadically with the other two at their finest."""
    d = case.data
    grids = refinement_grids(d.network, d.horizon, d.l_max, base, levels, axis)
    cubes = list(mapper(lambda g: run_backward(d, g, scheme), grids))
    errors = tuple(error_norms(c, case.exact)["sup"] for c in cubes)
    diffs = tuple(richardson_differences(cubes))
    spacings = tuple(_spacing(g, axis if axis != "all" else "l") for g in grids)
    fit = convergence_order(errors, spacings) if levels >= 3 and min(errors) > 0 else None
    return AxisSweep(axis, tuple(grids), spacings, errors, diffs, observed_order(diffs), fit)


def convergence_study(case: ManufacturedCase, base=(16, 32, 16), levels: int = 3,
                      scheme: str = "centered", threads: int = 1) -> dict[str, AxisSweep]:
    """Per-axis sweeps in t, x and l; ``threads`` > 1 solves grids concurrently."""
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            return {ax: axis_sweep(case, ax, base, levels, scheme, pool.map) for ax in AXES}
    return {ax: axis_sweep(case, ax, base, levels, scheme) for ax in AXES}


SWEEP_HEADER = ("axis", "n_t", "n_x", "n_l", "spacing", "sup_error", "difference_to_next")
