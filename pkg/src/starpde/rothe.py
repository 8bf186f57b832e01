"""Rothe time-marching for the classical Robin-Kirchhoff parabolic system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import admissibility_threshold, sampled_sup_lip
from .elliptic import EllipticStepSpec, SolverError, solve_step
from .network import GridError, GridSpec, NetworkField
from .problem import (ClassicalProblemData, ClassicalTables, ValidationReport,
                      sample_classical, validate_classical)


class AssumptionError(ValueError):
    """Raised when a solver is called on data whose validation report fails."""

    def __init__(self, report: ValidationReport):
        self.report = report
        names = ", ".join(f"{e.name} (margin {e.margin:.3g} at {e.location})" for e in report.failures())
        super().__init__(f"assumption check failed: {names}")


@dataclass(frozen=True)
class Trajectory:
    """u^0..u^{n_t} of one Rothe march; junction values stored once per step."""

    grid: GridSpec
    junction: np.ndarray  # (n_t + 1,)
    interior: np.ndarray  # (n_t + 1, I, n_x)
    scheme: str = "upwind"
    tables: ClassicalTables | None = None

    def __len__(self):
        return self.junction.size

    def field(self, k: int) -> NetworkField:
        return NetworkField(self.junction[k], self.interior[k])

    @property
    def fields(self) -> list[NetworkField]:
        return [self.field(k) for k in range(len(self))]

    def values(self) -> np.ndarray:
        """Dense (n_t + 1, I, n_x + 1) array."""
        out = np.empty(self.interior.shape[:2] + (self.interior.shape[2] + 1,))
        out[..., 0] = self.junction[:, None]
        out[..., 1:] = self.interior
        return out


def step_spec(tables: ClassicalTables, grid: GridSpec, k: int, prev: NetworkField,
              min_inv_dt: float | None = None) -> EllipticStepSpec:
    """Elliptic step E_k with every coefficient frozen at t_k."""
    return EllipticStepSpec(
        inv_dt=grid.inv_dt, dx=grid.dx,
        a=tables.a[k], b=tables.b[k], c=tables.c[k], f=tables.f[k],
        lam=float(tables.lam[k]), alpha=tables.alpha[k], gamma=float(tables.gamma[k]),
        prev=prev, min_inv_dt=min_inv_dt, k=k,
    )


def march_tables(tables: ClassicalTables, grid: GridSpec, scheme: str = "upwind") -> Trajectory:
    """March E_1..E_{n_t} from u^0 = tables.g on already-sampled coefficients."""
    thr = admissibility_threshold(float(np.max(np.abs(tables.c))))
    if grid.inv_dt < thr:
        raise GridError(
            f"n_t below admissibility threshold: n_t/T = {grid.inv_dt} < {thr} "
            "= max(floor(|c|_inf)+1, |c|_inf^2)"
        )
    g = tables.g
    if np.max(np.abs(g[:, 0] - g[0, 0])) > 0:
        raise SolverError("initial data is not continuous at the junction")
    n_t = grid.n_t
    junction = np.empty(n_t + 1)
    interior = np.empty((n_t + 1, grid.ray_count, grid.n_x))
    junction[0], interior[0] = g[0, 0], g[:, 1:]
    prev = NetworkField(junction[0], interior[0])
    for k in range(1, n_t + 1):
        u = solve_step(step_spec(tables, grid, k, prev, thr), scheme)
        junction[k], interior[k] = u.junction_value, u.interior
        prev = u
    return Trajectory(grid, junction, interior, scheme, tables)


def march_classical(
    data: ClassicalProblemData,
    grid: GridSpec,
    scheme: str = "upwind",
    report: ValidationReport | None = None,
    check: bool = True,
) -> Trajectory:
    """u^0 = g, then solve E_k for k = 1..n_t with data evaluated at t_k.

    Unless ``check`` is False, the data must pass :func:`validate_classical`.
    """
    tables = sample_classical(data, grid)
    if check:
        if report is None:
            report = validate_classical(data, grid, tables=tables)
        if not report.passed:
            raise AssumptionError(report)
    if grid.horizon != data.horizon:
        raise ValueError(f"grid horizon {grid.horizon} differs from data horizon {data.horizon}")
    return march_tables(tables, grid, scheme)


def interpolant_v(traj: Trajectory, t: float) -> NetworkField:
    """Piecewise-linear-in-time interpolant of the trajectory."""
    grid = traj.grid
    if not 0.0 <= t <= grid.horizon:
        raise ValueError(f"t={t} outside [0, {grid.horizon}]")
    s = t / grid.dt
    k = min(int(np.floor(s)), grid.n_t - 1)
    w = s - k
    if w == 0.0:
        return traj.field(k)
    if k + 1 == grid.n_t and w == 1.0:
        return traj.field(grid.n_t)
    j = (1 - w) * traj.junction[k] + w * traj.junction[k + 1]
    inner = (1 - w) * traj.interior[k] + w * traj.interior[k + 1]
    return NetworkField(j, inner)


def discrete_time_derivative(traj: Trajectory) -> dict:
    """Per-step sup norms of n(u^k - u^{k-1}) and of the junction quotient."""
    if len(traj) < 2:
        raise ValueError("trajectory needs at least two time levels")
    n = traj.grid.inv_dt
    dj = n * np.abs(np.diff(traj.junction))
    di = n * np.max(np.abs(np.diff(traj.interior, axis=0)), axis=(1, 2))
    field_q = np.maximum(di, dj)
    return {
        "field": field_q,
        "junction": dj,
        "field_max": float(np.max(field_q)),
        "junction_max": float(np.max(dj)),
    }


def centered_gradient(values: np.ndarray, dx: float) -> np.ndarray:
    """Centred d/dx at interior nodes; values has nodes on the last axis."""
    return (values[..., 2:] - values[..., :-2]) / (2 * dx)


def observed_norms(traj: Trajectory) -> dict:
    """Discrete quantities bounded by C0, C1, C2 and Theta v C(g)."""
    dtd = discrete_time_derivative(traj)
    vals = traj.values()
    return {
        "sup": float(np.max(np.abs(vals))),
        "time_quotient": dtd["field_max"],
        "gradient": float(np.max(np.abs(centered_gradient(vals, traj.grid.dx)))),
        "junction_quotient": dtd["junction_max"],
    }


def sample_norms(data: ClassicalProblemData, grid: GridSpec, tables: ClassicalTables | None = None) -> dict:
    """Norms entering C0..C3 and Theta, sampled on the grid; declared values take precedence."""
    tb = tables if tables is not None else sample_classical(data, grid)
    h3 = (grid.dt, None, grid.dx)  # [k, i, j]
    norms = {"R": data.network.ray_length, "a_floor": data.a_floor,
             "alpha_floor": data.alpha_floor, "lambda_floor": data.lambda_floor}
    for name in ("a", "b", "c", "f"):
        s, lip = sampled_sup_lip(getattr(tb, name), h3)
        norms[f"{name}_sup"], norms[f"{name}_W"] = s, s + lip
    norms["alpha_sup"] = float(np.max(np.abs(tb.alpha)))
    for key, arr in (("lambda", tb.lam), ("gamma", tb.gamma)):
        s, lip = sampled_sup_lip(arr, (grid.dt,))
        norms[f"{key}_lip"], norms[f"{key}_W"] = lip, s + lip
        if key == "gamma":
            norms["gamma_sup"] = s
    gx = np.gradient(tb.g, grid.dx, axis=-1, edge_order=2)
    gxx = np.gradient(gx, grid.dx, axis=-1, edge_order=2)
    norms["g_sup"] = float(np.max(np.abs(tb.g)))
    norms["gx_sup"] = float(np.max(np.abs(gx)))
    norms["gxx_sup"] = float(np.max(np.abs(gxx)))
    norms.update({k: float(v) for k, v in data.declared_norms.items()})
    return norms
