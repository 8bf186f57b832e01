"""Backward induction in the local-time variable l.

Level n_l is the terminal data psi. Each lower level p solves a classical
Robin-Kirchhoff parabolic problem whose junction data are

    lambda_p(t) = n_l/K + r(t, l_p)
    gamma_p(t)  = phi(t, l_p) + beta_p - (n_l/K) u^{p+1}(t, 0)

so that the discrete relation

    (n_l/K)(u^{p+1}(t,0) - u^p(t,0)) + sum_i alpha_i d_x u_i^p(t,0) - r u^p(t,0) = phi + beta_p

holds at every t_k, k >= 1. The constants beta_p make the level problem
compatible with its initial data g(., l_p).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import admissibility_threshold, sampled_sup_lip
from .elliptic import SolverError, junction_flux
from .network import GridError, GridSpec, SolutionCube
from .problem import (ClassicalTables, CoefficientTables, ProblemData, ValidationReport,
                      sample_coefficients, validate_assumptions)
from .rothe import AssumptionError, Trajectory, centered_gradient, march_tables


@dataclass(frozen=True)
class BetaConstants:
    beta: np.ndarray  # (n_l,)
    dl_g0: np.ndarray  # d/dl g(0, l_p) used, (n_l + 1,)
    analytic: bool

    def __len__(self):
        return self.beta.size


def _junction_trace(data: ProblemData, l: np.ndarray) -> np.ndarray:
    return np.asarray(data.g[0](0.0, 0.0, l), dtype=float)


def _refined_derivative(data: ProblemData, l: np.ndarray, h: float) -> np.ndarray:
    """Second-order d/dl g(0, l) with step h, one-sided where l +- h leaves [0, K]."""
    K = data.l_max
    out = np.empty_like(l)
    lo, hi = l - h < -1e-14, l + h > K + 1e-14
    mid = ~(lo | hi)
    gp, gm = _junction_trace(data, l + h), _junction_trace(data, l - h)
    out[mid] = (gp[mid] - gm[mid]) / (2 * h)
    if lo.any():
        g0, g1, g2 = (_junction_trace(data, l[lo] + s * h) for s in (0, 1, 2))
        out[lo] = (-3 * g0 + 4 * g1 - g2) / (2 * h)
    if hi.any():
        g0, g1, g2 = (_junction_trace(data, l[hi] - s * h) for s in (0, 1, 2))
        out[hi] = (3 * g0 - 4 * g1 + g2) / (2 * h)
    return out


def beta_constants(data: ProblemData, grid: GridSpec, tables: CoefficientTables | None = None) -> BetaConstants:
    """beta_p = (n_l/K)(g(0, l_{p+1}) - g(0, l_p)) - d_l g(0, l_p), p < n_l.

    Uses ``data.dl_g0`` when given, otherwise a centred difference with
    spacing dl/16.
    """
    l = grid.l
    g0 = tables.g[:, 0, 0] if tables is not None else _junction_trace(data, l)
    if data.dl_g0 is not None:
        dlg = np.asarray(data.dl_g0(0.0, 0.0, l), dtype=float)
        analytic = True
    else:
        dlg = _refined_derivative(data, l, grid.dl / 16.0)
        analytic = False
    beta = grid.inv_dl * np.diff(g0) - dlg[:-1]
    return BetaConstants(beta, dlg, analytic)


def level_tables(tables: CoefficientTables, grid: GridSpec, p: int, beta_p: float,
                 next_junction: np.ndarray) -> ClassicalTables:
    """Classical-problem tables of level p."""
    n = grid.inv_dl
    return ClassicalTables(
        a=tables.a[p], b=tables.b[p], c=tables.c[p], f=tables.f[p],
        alpha=tables.alpha[p],
        lam=n + tables.r[p],
        gamma=tables.phi[p] + beta_p - n * np.asarray(next_junction, float),
        g=tables.g[p],
    )


def solve_level(p: int, next_junction: np.ndarray, tables: CoefficientTables, grid: GridSpec,
                beta_p: float, scheme: str = "upwind") -> Trajectory:
    if not 0 <= p < grid.n_l:
        raise ValueError(f"level {p} outside 0..{grid.n_l - 1}")
    if np.shape(next_junction) != (grid.n_t + 1,):
        raise ValueError(f"next_junction must have {grid.n_t + 1} entries")
    try:
        return march_tables(level_tables(tables, grid, p, beta_p, next_junction), grid, scheme)
    except SolverError as exc:
        raise SolverError(f"level p={p}: {exc}") from exc


def check_level_steps(grid: GridSpec, r_sup: float):
    thr = admissibility_threshold(r_sup)
    if grid.inv_dl < thr:
        raise GridError(
            f"n_l below admissibility threshold: n_l/K = {grid.inv_dl} < {thr} "
            "= max(floor(|r|_inf)+1, |r|_inf^2)"
        )


def run_backward(
    data: ProblemData,
    grid: GridSpec,
    scheme: str = "upwind",
    naive_beta: bool = False,
    check: bool = True,
    tables: CoefficientTables | None = None,
    report: ValidationReport | None = None,
) -> SolutionCube:
    """Level n_l := psi, then levels n_l-1 .. 0 in turn.

    ``naive_beta`` drops the compatibility constants (negative test only).
    """
    if grid.horizon != data.horizon or grid.l_max != data.l_max:
        raise ValueError("grid (T, K) differs from the problem's")
    tb = tables if tables is not None else sample_coefficients(data, grid)
    if check:
        if report is None:
            report = validate_assumptions(data, grid, tables=tb)
        if not report.passed:
            raise AssumptionError(report)
    check_level_steps(grid, float(np.max(np.abs(tb.r))))
    beta = np.zeros(grid.n_l) if naive_beta else beta_constants(data, grid, tb).beta
    n_l, n_t, I, n_x = grid.n_l, grid.n_t, grid.ray_count, grid.n_x
    junction = np.empty((n_l + 1, n_t + 1))
    interior = np.empty((n_l + 1, n_t + 1, I, n_x))
    junction[n_l] = tb.psi[:, 0, 0]
    interior[n_l] = tb.psi[:, :, 1:]
    for p in range(n_l - 1, -1, -1):
        traj = solve_level(p, junction[p + 1], tb, grid, float(beta[p]), scheme)
        junction[p], interior[p] = traj.junction, traj.interior
    return SolutionCube(grid, junction, interior)


def kirchhoff_residual(cube: SolutionCube, data: ProblemData, grid: GridSpec,
                       tables: CoefficientTables | None = None) -> dict:
    """(n_l/K)(u^{p+1}(t,0) - u^p(t,0)) + sum alpha d_x u^p(t,0) - r u^p(t,0) - phi.

    ``table`` is indexed [p, k] for p < n_l; ``sup`` is taken over
    p <= n_l - 2 and ``sup_all`` over every level.
    """
    tb = tables if tables is not None else sample_coefficients(data, grid)
    vals = cube.values()  # (n_l+1, n_t+1, I, n_x+1)
    u0 = cube.junction
    flux = junction_flux(vals[:-1], grid.dx)  # (n_l, n_t+1, I)
    res = (grid.inv_dl * (u0[1:] - u0[:-1]) + np.sum(tb.alpha[:-1] * flux, axis=-1)
           - tb.r[:-1] * u0[:-1] - tb.phi[:-1])
    head = np.abs(res[:-1]) if res.shape[0] > 1 else np.zeros(1)
    return {"table": res, "sup": float(np.max(head)), "sup_all": float(np.max(np.abs(res)))}


def observed_norms(cube: SolutionCube) -> dict:
    """Discrete norms bounded by M0, M1, M4, plus reported-only quantities."""
    grid = cube.grid
    vals = cube.values()
    jt = np.abs(np.diff(cube.junction, axis=1)) * grid.inv_dt
    lq = np.max(np.abs(np.diff(vals, axis=0)), axis=(1, 2, 3)) * grid.inv_dl  # per p
    out = {
        "sup": float(np.max(np.abs(vals))),
        "junction_time_lip": float(np.max(jt)) if jt.size else 0.0,
        "l_quotient_last": float(lq[-1]),
        "gradient_reported": float(np.max(np.abs(centered_gradient(vals, grid.dx)))),
        "time_lip_reported": float(np.max(np.abs(np.diff(vals, axis=1)))) * grid.inv_dt,
    }
    if lq.size >= 2:
        out["l_quotient"] = float(np.max(lq[:-1]))
    return out


def sample_norms(data: ProblemData, grid: GridSpec, tables: CoefficientTables | None = None) -> dict:
    """Norms entering M0, M1, M4, sampled on the grid; declared values take precedence."""
    tb = tables if tables is not None else sample_coefficients(data, grid)
    h4 = (grid.dl, grid.dt, None, grid.dx)  # [p, k, i, j]
    norms = {"T": data.horizon, "I": grid.ray_count, "a_floor": data.a_floor}
    for name in ("a", "b", "c", "f"):
        s, lip = sampled_sup_lip(getattr(tb, name), h4)
        norms[f"{name}_sup"], norms[f"{name}_W"] = s, s + lip
    norms["alpha_sup"] = float(np.max(np.abs(tb.alpha)))
    for name in ("r", "phi"):
        s, lip = sampled_sup_lip(getattr(tb, name), (grid.dl, grid.dt))
        norms[f"{name}_sup"], norms[f"{name}_lip"] = s, lip
    norms["psi_sup"] = float(np.max(np.abs(tb.psi)))
    norms["psi0_lip"] = sampled_sup_lip(tb.psi[:, 0, 0], (grid.dt,))[1]
    norms["psix_sup"] = float(np.max(np.abs(np.gradient(tb.psi, grid.dx, axis=-1, edge_order=2))))
    gx = np.gradient(tb.g, grid.dx, axis=-1, edge_order=2)
    gxx = np.gradient(gx, grid.dx, axis=-1, edge_order=2)
    norms["g_sup"] = float(np.max(np.abs(tb.g)))
    norms["gx_sup"] = float(np.max(np.abs(gx)))
    norms["gxx_sup"] = float(np.max(np.abs(gxx)))
    dlg = beta_constants(data, grid, tb).dl_g0
    norms["dlg0_sup"] = float(np.max(np.abs(dlg)))
    norms.update({k: float(v) for k, v in data.declared_norms.items()})
    return norms
