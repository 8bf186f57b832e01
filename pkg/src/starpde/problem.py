"""Problem data for the local-time and classical Kirchhoff systems.

Coefficients are black-box evaluators ``f(t, x, l)`` (numpy-broadcasting).
Two-variable data such as alpha(t, l), r, phi are evaluated with x = 0,
psi(t, x) with l = K and g(x, l) with t = 0, so every field shares one
calling convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .expressions import Expression, compile_expression
from .network import GridSpec, StarNetwork

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class ProblemError(ValueError):
    """Malformed problem definition or non-finite coefficient values."""


@dataclass(frozen=True)
class CoefficientField:
    evaluator: Evaluator
    declared_sup: float | None = None
    declared_lip: float | None = None

    def __call__(self, t, x, l) -> np.ndarray:
        t, x, l = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float), np.asarray(l, float))
        return np.broadcast_to(np.asarray(self.evaluator(t, x, l), dtype=float), t.shape)

    @property
    def source(self) -> str | None:
        return self.evaluator.source if isinstance(self.evaluator, Expression) else None


def as_field(value) -> CoefficientField:
    """Coerce a number, expression string, callable or field to a CoefficientField."""
    if isinstance(value, CoefficientField):
        return value
    if isinstance(value, dict):
        extra = set(value) - {"expr", "sup", "lip"}
        if extra or "expr" not in value:
            raise ProblemError(f"coefficient objects take keys expr/sup/lip, got {sorted(value)}")
        return CoefficientField(
            compile_expression(value["expr"]), value.get("sup"), value.get("lip")
        )
    if isinstance(value, (str, int, float)) and not isinstance(value, bool):
        return CoefficientField(compile_expression(value))
    if callable(value):
        return CoefficientField(value)
    raise ProblemError(f"cannot interpret {value!r} as a coefficient")


def per_ray(value, ray_count: int, name: str) -> tuple[CoefficientField, ...]:
    if isinstance(value, (list, tuple)):
        if len(value) != ray_count:
            raise ProblemError(f"{name}: expected {ray_count} per-ray entries, got {len(value)}")
        return tuple(as_field(v) for v in value)
    f = as_field(value)
    return (f,) * ray_count


@dataclass(frozen=True)
class ProblemData:
    """One instance of the local-time Kirchhoff system on a star network."""

    network: StarNetwork
    horizon: float
    l_max: float
    a: tuple[CoefficientField, ...]
    b: tuple[CoefficientField, ...]
    c: tuple[CoefficientField, ...]
    f: tuple[CoefficientField, ...]
    alpha: tuple[CoefficientField, ...]
    r: CoefficientField
    phi: CoefficientField
    psi: tuple[CoefficientField, ...]
    g: tuple[CoefficientField, ...]
    a_floor: float
    alpha_floor: float
    dl_g0: CoefficientField | None = None  # analytic d/dl g(0, l), evaluated as f(0, 0, l)
    declared_norms: dict = field(default_factory=dict)
    name: str = "problem"

    @classmethod
    def create(cls, network, horizon, l_max, *, a, b, c, f, alpha, r, phi, psi, g,
               a_floor, alpha_floor, dl_g0=None, declared_norms=None, name="problem"):
        """Build from loose inputs: scalars/strings/callables, per-ray or shared."""
        I = network.ray_count
        if not (a_floor > 0 and alpha_floor > 0):
            raise ProblemError("a_floor and alpha_floor must be positive")
        return cls(
            network, float(horizon), float(l_max),
            per_ray(a, I, "a"), per_ray(b, I, "b"), per_ray(c, I, "c"), per_ray(f, I, "f"),
            per_ray(alpha, I, "alpha"), as_field(r), as_field(phi),
            per_ray(psi, I, "psi"), per_ray(g, I, "g"),
            float(a_floor), float(alpha_floor),
            None if dl_g0 is None else as_field(dl_g0),
            dict(declared_norms or {}), name,
        )

    def replace(self, **changes) -> "ProblemData":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class ClassicalProblemData:
    """Data of the parabolic system with a Robin-Kirchhoff junction (no l)."""

    network: StarNetwork
    horizon: float
    a: tuple[CoefficientField, ...]
    b: tuple[CoefficientField, ...]
    c: tuple[CoefficientField, ...]
    f: tuple[CoefficientField, ...]
    alpha: tuple[CoefficientField, ...]
    lam: CoefficientField
    gamma: CoefficientField
    g: tuple[CoefficientField, ...]
    a_floor: float
    alpha_floor: float
    lambda_floor: float
    declared_norms: dict = field(default_factory=dict)
    name: str = "classical"

    @classmethod
    def create(cls, network, horizon, *, a, b, c, f, alpha, lam, gamma, g,
               a_floor, alpha_floor, lambda_floor, declared_norms=None, name="classical"):
        I = network.ray_count
        if not (a_floor > 0 and alpha_floor > 0 and lambda_floor > 0):
            raise ProblemError("a_floor, alpha_floor and lambda_floor must be positive")
        return cls(
            network, float(horizon),
            per_ray(a, I, "a"), per_ray(b, I, "b"), per_ray(c, I, "c"), per_ray(f, I, "f"),
            per_ray(alpha, I, "alpha"), as_field(lam), as_field(gamma), per_ray(g, I, "g"),
            float(a_floor), float(alpha_floor), float(lambda_floor),
            dict(declared_norms or {}), name,
        )

    def replace(self, **changes) -> "ClassicalProblemData":
        from dataclasses import replace
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class CoefficientTables:
    """Coefficients at grid nodes, indexed [p, k, i, j] like the solution cube."""

    a: np.ndarray      # (n_l+1, n_t+1, I, n_x+1)
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray
    alpha: np.ndarray  # (n_l+1, n_t+1, I)
    r: np.ndarray      # (n_l+1, n_t+1)
    phi: np.ndarray
    psi: np.ndarray    # (n_t+1, I, n_x+1)
    g: np.ndarray      # (n_l+1, I, n_x+1)
    dl_g0: np.ndarray | None  # (n_l+1,)


def _finite(name: str, arr: np.ndarray, axes: Sequence[str]) -> np.ndarray:
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = tuple(int(v) for v in np.argwhere(bad)[0])
        where = ", ".join(f"{a}={v}" for a, v in zip(axes, idx))
        raise ProblemError(f"non-finite value of {name} at node ({where})")
    return arr


def _eval_rays(fields, name, L, T, X, axes):
    cache: dict[int, np.ndarray] = {}
    out = []
    for fld in fields:
        key = id(fld)
        if key not in cache:
            cache[key] = np.array(fld(T, X, L), dtype=float)
        out.append(cache[key])
    arr = np.stack(out, axis=-2)
    return _finite(name, arr, axes)


def sample_coefficients(data: ProblemData, grid: GridSpec) -> CoefficientTables:
    """Evaluate every coefficient once per grid node (shared fields once overall)."""
    _check_grid(data.network, grid)
    t, x, l = grid.t, grid.x, grid.l
    L3, T3, X3 = l[:, None, None], t[None, :, None], x[None, None, :]
    axes4 = ("p", "k", "i", "j")
    a = _eval_rays(data.a, "a", L3, T3, X3, axes4)
    b = _eval_rays(data.b, "b", L3, T3, X3, axes4)
    c = _eval_rays(data.c, "c", L3, T3, X3, axes4)
    f = _eval_rays(data.f, "f", L3, T3, X3, axes4)
    L2, T2 = l[:, None], t[None, :]
    alpha = _eval_rays(data.alpha, "alpha", L2[..., None], T2[..., None], 0.0, ("p", "k", "i", "_"))[..., 0]
    r = _finite("r", np.array(data.r(T2, 0.0, L2)), ("p", "k"))
    phi = _finite("phi", np.array(data.phi(T2, 0.0, L2)), ("p", "k"))
    psi = _eval_rays(data.psi, "psi", data.l_max, t[:, None], x[None, :], ("k", "i", "j"))
    g = _eval_rays(data.g, "g", l[:, None], 0.0, x[None, :], ("p", "i", "j"))
    dl_g0 = None
    if data.dl_g0 is not None:
        dl_g0 = _finite("dl_g0", np.array(data.dl_g0(0.0, 0.0, l)), ("p",))
    return CoefficientTables(a, b, c, f, alpha, r, phi, psi, g, dl_g0)


@dataclass(frozen=True)
class ClassicalTables:
    """Classical-problem coefficients at nodes, indexed [k, i, j]."""

    a: np.ndarray      # (n_t+1, I, n_x+1)
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray
    alpha: np.ndarray  # (n_t+1, I)
    lam: np.ndarray    # (n_t+1,)
    gamma: np.ndarray
    g: np.ndarray      # (I, n_x+1)


def sample_classical(data: ClassicalProblemData, grid: GridSpec) -> ClassicalTables:
    _check_grid(data.network, grid)
    t, x = grid.t, grid.x
    axes = ("k", "i", "j")
    T2, X2 = t[:, None], x[None, :]
    a = _eval_rays(data.a, "a", 0.0, T2, X2, axes)
    b = _eval_rays(data.b, "b", 0.0, T2, X2, axes)
    c = _eval_rays(data.c, "c", 0.0, T2, X2, axes)
    f = _eval_rays(data.f, "f", 0.0, T2, X2, axes)
    alpha = _eval_rays(data.alpha, "alpha", 0.0, t[:, None], 0.0, ("k", "i", "_"))[..., 0]
    lam = _finite("lambda", np.array(data.lam(t, 0.0, 0.0)), ("k",))
    gamma = _finite("gamma", np.array(data.gamma(t, 0.0, 0.0)), ("k",))
    g = _eval_rays(data.g, "g", 0.0, 0.0, x[None, :], ("_", "i", "j"))[0]
    return ClassicalTables(a, b, c, f, alpha, lam, gamma, g)


def _check_grid(network: StarNetwork, grid: GridSpec):
    if grid.network != network:
        raise ProblemError(f"grid network {grid.network} does not match data network {network}")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    margin: float
    passed: bool
    location: str = ""
    kind: str = "equality"  # "floor": margin = min(value - floor); "equality": margin = max |residual|

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, "margin": self.margin,
                "passed": self.passed, "location": self.location}


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[AssumptionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def failures(self) -> list[AssumptionCheck]:
        return [e for e in self.entries if not e.passed]

    def to_dict(self):
        return {"passed": self.passed, "entries": [e.to_dict() for e in self.entries]}


def _floor_check(name, values, floor, axes, tol):
    margin_arr = values - floor
    idx = np.unravel_index(int(np.argmin(margin_arr)), margin_arr.shape)
    m = float(margin_arr[idx])
    loc = ", ".join(f"{a}={int(v)}" for a, v in zip(axes, idx))
    return AssumptionCheck(name, m, m >= -tol, loc, "floor")


def _eq_check(name, residual, axes, tol):
    res = np.abs(residual)
    if res.size == 0:
        return AssumptionCheck(name, 0.0, True, "", "equality")
    idx = np.unravel_index(int(np.argmax(res)), res.shape)
    m = float(res[idx])
    loc = ", ".join(f"{a}={int(v)}" for a, v in zip(axes, idx))
    return AssumptionCheck(name, m, m <= tol, loc, "equality")


def forward_derivative(v0, v1, v2, h):
    """Second-order one-sided derivative into increasing coordinate."""
    return (-3.0 * v0 + 4.0 * v1 - v2) / (2.0 * h)


def backward_derivative(vn, vn1, vn2, h):
    return (3.0 * vn - 4.0 * vn1 + vn2) / (2.0 * h)


def dl_junction(g0: np.ndarray, dl: float) -> np.ndarray:
    """Second-order difference approximation of d/dl of a junction trace.

    One-sided at both ends, centred inside.
    """
    n = g0.size - 1
    out = np.empty_like(g0)
    if n >= 2:
        out[0] = forward_derivative(g0[0], g0[1], g0[2], dl)
        out[-1] = backward_derivative(g0[-1], g0[-2], g0[-3], dl)
        out[1:-1] = (g0[2:] - g0[:-2]) / (2 * dl)
    else:
        out[:] = (g0[1] - g0[0]) / dl
    return out


def default_diff_tol(grid: GridSpec, g_scale: float) -> float:
    return 10.0 * (grid.dx**2 + grid.dl**2) * max(g_scale, 1.0)


def validate_assumptions(
    data: ProblemData,
    grid: GridSpec,
    tol: float = 1e-8,
    diff_tol: float | None = None,
    tables: CoefficientTables | None = None,
) -> ValidationReport:
    """Check ellipticity, sign and compatibility conditions on grid nodes.

    ``tol`` applies to floors and exact identities; ``diff_tol`` to
    conditions whose derivatives are approximated by differences
    (default ``10 (dx^2 + dl^2) max(|g|_inf, 1)``).
    """
    tb = tables if tables is not None else sample_coefficients(data, grid)
    if diff_tol is None:
        diff_tol = default_diff_tol(grid, float(np.max(np.abs(tb.g))))
    dx = grid.dx
    entries = [
        _floor_check("ellipticity a >= a_floor", tb.a, data.a_floor, ("p", "k", "i", "j"), tol),
        _floor_check("junction weights alpha >= alpha_floor", tb.alpha, data.alpha_floor, ("p", "k", "i"), tol),
        _floor_check("r >= 0", tb.r, 0.0, ("p", "k"), tol),
    ]
    g = tb.g  # (n_l+1, I, n_x+1)
    g0 = g[:, 0, 0]
    dlg = tb.dl_g0 if tb.dl_g0 is not None else dl_junction(g0, grid.dl)
    dxg0 = forward_derivative(g[:, :, 0], g[:, :, 1], g[:, :, 2], dx)  # (n_l+1, I)
    compat = dlg + np.sum(tb.alpha[:, 0, :] * dxg0, axis=1) - tb.r[:, 0] * g0 - tb.phi[:, 0]
    entries.append(_eq_check("junction compatibility of g", compat[:-1], ("p",), diff_tol))
    dxgR = backward_derivative(g[:, :, -1], g[:, :, -2], g[:, :, -3], dx)
    entries.append(_eq_check("Neumann compatibility of g at R", dxgR[:-1], ("p", "i"), diff_tol))
    entries.append(_eq_check("terminal compatibility g(x, K) = psi(0, x)",
                             g[-1] - tb.psi[0], ("i", "j"), tol))
    entries.append(_eq_check("g junction continuity", g[:, :, 0] - g[:, :1, 0], ("p", "i"), tol))
    entries.append(_eq_check("psi junction continuity", tb.psi[:, :, 0] - tb.psi[:, :1, 0], ("k", "i"), tol))
    return ValidationReport(tuple(entries))


def validate_classical(
    data: ClassicalProblemData,
    grid: GridSpec,
    tol: float = 1e-8,
    diff_tol: float | None = None,
    tables: ClassicalTables | None = None,
) -> ValidationReport:
    """Check ellipticity, floors and compatibility of classical data on grid nodes."""
    tb = tables if tables is not None else sample_classical(data, grid)
    if diff_tol is None:
        diff_tol = 10.0 * grid.dx**2 * max(float(np.max(np.abs(tb.g))), 1.0)
    dx = grid.dx
    g = tb.g
    entries = [
        _floor_check("ellipticity a >= a_floor", tb.a, data.a_floor, ("k", "i", "j"), tol),
        _floor_check("junction weights alpha >= alpha_floor", tb.alpha, data.alpha_floor, ("k", "i"), tol),
        _floor_check("lambda >= lambda_floor", tb.lam, data.lambda_floor, ("k",), tol),
    ]
    dxg0 = forward_derivative(g[:, 0], g[:, 1], g[:, 2], dx)
    compat = -tb.lam[0] * g[0, 0] + np.sum(tb.alpha[0] * dxg0) - tb.gamma[0]
    entries.append(_eq_check("junction compatibility of g", np.array([compat]), ("_",), diff_tol))
    dxgR = backward_derivative(g[:, -1], g[:, -2], g[:, -3], dx)
    entries.append(_eq_check("Neumann compatibility of g at R", dxgR, ("i",), diff_tol))
    entries.append(_eq_check("g junction continuity", g[:, 0] - g[0, 0], ("i",), tol))
    return ValidationReport(tuple(entries))


def check_declared_bounds(data, tables) -> list[str]:
    """Declared sup/Lipschitz values that sampled data exceeds (sup only is checkable)."""
    problems = []
    names = ("a", "b", "c", "f", "alpha")
    for name in names:
        arr = getattr(tables, name)
        for i, fld in enumerate(getattr(data, name)):
            if fld.declared_sup is not None:
                sl = arr[..., i] if name == "alpha" else arr[..., i, :]
                s = float(np.max(np.abs(sl)))
                if s > fld.declared_sup * (1 + 1e-12):
                    problems.append(f"{name}[{i}]: sampled sup {s:.6g} exceeds declared {fld.declared_sup:.6g}")
    return problems


# ---------------------------------------------------------------------------
# JSON documents

_COMMON_KEYS = {"name", "kind", "rays", "R", "T", "a", "b", "c", "f", "alpha",
                "a_floor", "alpha_floor", "norms", "grid", "description"}
_LOCAL_KEYS = _COMMON_KEYS | {"K", "r", "phi", "psi", "g", "dl_g0"}
_CLASSICAL_KEYS = _COMMON_KEYS | {"lambda", "gamma", "g", "lambda_floor"}


def problem_from_dict(doc: dict):
    """Build ProblemData / ClassicalProblemData / manufactured data from a document.

    Unknown keys are rejected.
    """
    kind = doc.get("kind", "local_time")
    if kind in ("manufactured_cosine", "manufactured_classical"):
        from .verification import case_from_dict
        return case_from_dict(doc).data
    allowed = {"local_time": _LOCAL_KEYS, "classical": _CLASSICAL_KEYS}.get(kind)
    if allowed is None:
        raise ProblemError(f"unknown problem kind {kind!r}")
    unknown = set(doc) - allowed
    if unknown:
        raise ProblemError(f"unknown fields for kind {kind!r}: {sorted(unknown)}")
    try:
        network = StarNetwork(int(doc["rays"]), float(doc.get("R", 1.0)))
        common = dict(a=doc["a"], b=doc.get("b", 0), c=doc.get("c", 0), f=doc.get("f", 0),
                      alpha=doc["alpha"], a_floor=doc["a_floor"], alpha_floor=doc["alpha_floor"],
                      declared_norms=doc.get("norms"), name=doc.get("name", kind))
        if kind == "classical":
            return ClassicalProblemData.create(
                network, doc.get("T", 1.0), lam=doc["lambda"], gamma=doc["gamma"], g=doc["g"],
                lambda_floor=doc["lambda_floor"], **common)
        return ProblemData.create(
            network, doc.get("T", 1.0), doc.get("K", 1.0), r=doc.get("r", 0), phi=doc.get("phi", 0),
            psi=doc["psi"], g=doc["g"], dl_g0=doc.get("dl_g0"), **common)
    except KeyError as exc:
        raise ProblemError(f"missing required field {exc.args[0]!r}") from None


def load_problem(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return problem_from_dict(doc), doc
