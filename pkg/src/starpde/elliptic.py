"""One implicit elliptic step on the star network.

Unknowns are the shared junction value u(0) and nodes j = 1..n_x of every
ray. Interior rows use centred second differences and either centred or
upwind first differences; the Neumann row at x = R eliminates a ghost node;
the junction row is

    -lam * u(0) + sum_i alpha_i * (-3 u(0) + 4 u_i1 - u_i2) / (2 dx) = gamma

with the u_i2 term folded in through row j = 1 of ray i, so the matrix keeps
an arrow shape: tridiagonal ray blocks plus one dense junction row/column.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, solve_banded

from .bounds import admissibility_threshold
from .network import NetworkField

SCHEMES = ("upwind", "centered")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class EllipticStepSpec:
    """Data of one step ``E_k``.

    Coefficient tables have shape (I, n_x + 1) and are evaluated at t_k;
    ``inv_dt`` is the factor n in n (u^k - u^{k-1}).
    """

    inv_dt: float
    dx: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray
    lam: float
    alpha: np.ndarray
    gamma: float
    prev: NetworkField
    a_floor: float | None = None
    alpha_floor: float | None = None
    min_inv_dt: float | None = None
    k: int | None = None

    @property
    def ray_count(self) -> int:
        return self.a.shape[0]

    @property
    def n_x(self) -> int:
        return self.a.shape[1] - 1


@dataclass(frozen=True)
class ArrowBandedSystem:
    """Tridiagonal ray blocks coupled through a single junction unknown.

    For ray i and unknown m (node j = m + 1): ``lower[i, m]`` multiplies node
    j - 1 (the junction when m = 0), ``upper[i, m]`` node j + 1.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray
    junction_diag: float
    junction_coupling: np.ndarray
    junction_rhs: float

    @property
    def dimension(self) -> int:
        return self.diag.size + 1

    def to_dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense matrix and right-hand side, junction first then ray by ray."""
        I, n = self.diag.shape
        N = I * n + 1
        A = np.zeros((N, N))
        b = np.zeros(N)
        A[0, 0] = self.junction_diag
        b[0] = self.junction_rhs
        for i in range(I):
            off = 1 + i * n
            A[0, off] = self.junction_coupling[i]
            for m in range(n):
                row = off + m
                A[row, row] = self.diag[i, m]
                A[row, 0 if m == 0 else row - 1] += self.lower[i, m]
                if m < n - 1:
                    A[row, row + 1] = self.upper[i, m]
                b[row] = self.rhs[i, m]
        return A, b


def _check_spec(spec: EllipticStepSpec):
    where = "" if spec.k is None else f" (step k={spec.k})"
    for name in ("a", "b", "c", "f"):
        arr = getattr(spec, name)
        if not np.all(np.isfinite(arr)):
            raise SolverError(f"non-finite {name} table{where}")
    if not (np.isfinite(spec.lam) and np.isfinite(spec.gamma) and np.all(np.isfinite(spec.alpha))):
        raise SolverError(f"non-finite junction data{where}")
    if spec.n_x < 2:
        raise SolverError("need n_x >= 2")
    if spec.a_floor is not None and np.min(spec.a) < spec.a_floor:
        raise SolverError(f"a below a_floor{where}")
    if spec.alpha_floor is not None and np.min(spec.alpha) < spec.alpha_floor:
        raise SolverError(f"alpha below alpha_floor{where}")
    thr = spec.min_inv_dt
    if thr is None:
        thr = admissibility_threshold(float(np.max(np.abs(spec.c))))
    if spec.inv_dt < thr:
        raise SolverError(
            f"inverse step {spec.inv_dt} below admissibility threshold {thr} "
            f"= max(floor(|c|_inf)+1, |c|_inf^2){where}"
        )


def ray_rows(spec: EllipticStepSpec, scheme: str = "upwind"):
    """Per-ray (lower, diag, upper, rhs) for nodes j = 1..n_x."""
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    dx, n = spec.dx, spec.inv_dt
    a, b, c, f = (arr[:, 1:] for arr in (spec.a, spec.b, spec.c, spec.f))
    A = a / dx**2
    if scheme == "centered":
        lower = -A - b / (2 * dx)
        upper = -A + b / (2 * dx)
        diag = n + 2 * A + c
    else:
        bp, bm = np.maximum(b, 0.0), np.minimum(b, 0.0)
        lower = -A - bp / dx
        upper = -A + bm / dx
        diag = n + 2 * A + c + (bp - bm) / dx
    # Neumann row: ghost node u_{n+1} = u_{n-1}, convection vanishes with u'(R) = 0
    lower[:, -1] = -2 * A[:, -1]
    diag[:, -1] = n + 2 * A[:, -1] + c[:, -1]
    upper[:, -1] = 0.0
    rhs = f + n * spec.prev.interior
    return lower, diag, upper, rhs


def assemble_step(spec: EllipticStepSpec, scheme: str = "upwind") -> ArrowBandedSystem:
    _check_spec(spec)
    lower, diag, upper, rhs = ray_rows(spec, scheme)
    L1, D1, U1, r1 = lower[:, 0], diag[:, 0], upper[:, 0], rhs[:, 0]
    if np.any(U1 == 0.0):
        raise SolverError("cannot fold the junction stencil: zero coupling in row j=1")
    w = np.asarray(spec.alpha, float) / (2 * spec.dx)
    # junction row multiplied by -1 so its diagonal is positive
    j_diag = spec.lam + float(np.sum(w * (3.0 - L1 / U1)))
    j_coup = -w * (4.0 + D1 / U1)
    j_rhs = -spec.gamma - float(np.sum(w * r1 / U1))
    return ArrowBandedSystem(lower, diag, upper, rhs, j_diag, j_coup, j_rhs)


def solve_arrow_banded(system: ArrowBandedSystem) -> NetworkField:
    """Direct O(I n_x) solve: rays first, then the scalar junction equation.

    All rays go through one banded LAPACK call as a block-diagonal
    tridiagonal system with two right-hand sides: the load and the
    junction column.
    """
    lower, diag, upper = system.lower, system.diag, system.upper
    I, n = diag.shape
    ab = np.zeros((3, I * n))
    up = upper.copy()
    up[:, -1] = 0.0
    lo = lower.copy()
    lo[:, 0] = 0.0
    ab[0, 1:] = up.ravel()[:-1]
    ab[1] = diag.ravel()
    ab[2, :-1] = lo.ravel()[1:]
    rhs = np.zeros((I, n, 2))
    rhs[..., 0] = system.rhs
    rhs[:, 0, 1] = lower[:, 0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            sol = solve_banded((1, 1), ab, rhs.reshape(I * n, 2), check_finite=False)
    except (np.linalg.LinAlgError, LinAlgWarning, ValueError) as exc:
        raise SolverError(f"ray elimination failed: {exc}") from None
    sol = sol.reshape(I, n, 2)
    y, z = sol[..., 0], sol[..., 1]
    q = system.junction_coupling
    denom = system.junction_diag - float(np.sum(q * z[:, 0]))
    if denom == 0.0 or not np.isfinite(denom):
        raise SolverError("degenerate junction reduction")
    u0 = (system.junction_rhs - float(np.sum(q * y[:, 0]))) / denom
    return NetworkField(u0, y - z * u0)


def solve_step(spec: EllipticStepSpec, scheme: str = "upwind") -> NetworkField:
    return solve_arrow_banded(assemble_step(spec, scheme))


def junction_flux(values: np.ndarray, dx: float) -> np.ndarray:
    """One-sided second-order d/dx at x = 0 into each ray; values is (..., I, n_x+1)."""
    return (-3.0 * values[..., 0] + 4.0 * values[..., 1] - values[..., 2]) / (2.0 * dx)


def elliptic_residual(field: NetworkField, spec: EllipticStepSpec, scheme: str = "upwind") -> dict:
    """Residuals of all discrete equations (unfolded stencils) at ``field``."""
    u = field.values
    dx, n = spec.dx, spec.inv_dt
    prev = spec.prev.values
    uj, um, up = u[:, 1:-1], u[:, :-2], u[:, 2:]
    a, b, c, f = (arr[:, 1:-1] for arr in (spec.a, spec.b, spec.c, spec.f))
    if scheme == "centered":
        conv = b * (up - um) / (2 * dx)
    else:
        conv = np.where(b > 0, b * (uj - um) / dx, b * (up - uj) / dx)
    interior = n * (uj - prev[:, 1:-1]) - a * (up - 2 * uj + um) / dx**2 + conv + c * uj - f
    uN, uN1 = u[:, -1], u[:, -2]
    neumann = (n * (uN - prev[:, -1]) - spec.a[:, -1] * 2 * (uN1 - uN) / dx**2
               + spec.c[:, -1] * uN - spec.f[:, -1])
    kirch = -spec.lam * field.junction_value + float(np.sum(spec.alpha * junction_flux(u, dx))) - spec.gamma
    return {
        "interior_sup": float(np.max(np.abs(interior))) if interior.size else 0.0,
        "kirchhoff_abs": abs(kirch),
        "neumann_abs": float(np.max(np.abs(neumann))),
    }
