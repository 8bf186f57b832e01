import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starpde.elliptic import (EllipticStepSpec, SolverError, assemble_step, elliptic_residual,
                              junction_flux, solve_arrow_banded, solve_step)
from starpde.network import NetworkField


def hyperbolic_spec(n_x, I=2, **kw):
    dx = 1.0 / n_x
    shape = (I, n_x + 1)
    args = dict(inv_dt=1.0, dx=dx, a=np.ones(shape), b=np.zeros(shape), c=np.zeros(shape),
                f=np.zeros(shape), lam=1.0, alpha=np.full(I, 0.5), gamma=-1.0,
                prev=NetworkField(0.0, np.zeros((I, n_x))))
    args.update(kw)
    return EllipticStepSpec(**args)


# u = A cosh(1 - x) on each ray; -A cosh 1 - A sinh 1 = -1 gives u(0) = cosh(1)/e
HYPERBOLIC_U0 = math.cosh(1.0) / math.e


def test_hyperbolic_oracle_value():
    assert HYPERBOLIC_U0 == pytest.approx((1 + math.exp(-2)) / 2, rel=1e-15)


@pytest.mark.parametrize("scheme", ["centered", "upwind"])
def test_hyperbolic_junction_value(scheme):
    u = solve_step(hyperbolic_spec(200), scheme)
    assert abs(u.junction_value - HYPERBOLIC_U0) < 1e-3
    x = np.linspace(0, 1, 201)
    assert np.max(np.abs(u.values - np.cosh(1 - x) / math.e)) < 1e-3


def test_hyperbolic_second_order():
    errs = [abs(solve_step(hyperbolic_spec(n), "centered").junction_value - HYPERBOLIC_U0)
            for n in (50, 100, 200, 400)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.3)


def test_matches_dense_solve():
    rng = np.random.default_rng(0)
    I, n = 3, 12
    shape = (I, n + 1)
    spec = hyperbolic_spec(n, I=I, a=1 + rng.random(shape), b=rng.normal(size=shape),
                           c=rng.random(shape), f=rng.normal(size=shape),
                           alpha=0.5 + rng.random(I), gamma=0.3, lam=2.0, inv_dt=4.0,
                           prev=NetworkField(0.2, rng.normal(size=(I, n))))
    for scheme in ("upwind", "centered"):
        system = assemble_step(spec, scheme)
        A, rhs = system.to_dense()
        dense = np.linalg.solve(A, rhs)
        u = solve_arrow_banded(system)
        assert u.junction_value == pytest.approx(dense[0], abs=1e-12)
        assert np.allclose(u.interior.ravel(), dense[1:], atol=1e-12)
        res = elliptic_residual(u, spec, scheme)
        assert max(res.values()) < 1e-9


def test_residual_responds_to_junction_perturbation():
    spec = hyperbolic_spec(40)
    u = solve_step(spec, "upwind")
    eps = 1e-3
    res = elliptic_residual(u.with_junction(u.junction_value + eps), spec)
    # the value and the one-sided flux both move: (lam + 3 sum(alpha) / (2 dx)) eps
    expected = (spec.lam + 3 * spec.alpha.sum() / (2 * spec.dx)) * eps
    assert res["kirchhoff_abs"] == pytest.approx(expected, rel=1e-6)


def test_junction_flux_exact_on_quadratic():
    x = np.linspace(0, 1, 11)
    v = np.stack([x**2 + 2 * x, 3 * x]) + 1
    assert np.allclose(junction_flux(v, 0.1), [2.0, 3.0])


def test_threshold_enforced():
    n_x = 8
    spec = hyperbolic_spec(n_x, c=np.full((2, n_x + 1), 2.5), inv_dt=5.0)
    with pytest.raises(SolverError, match="admissibility threshold"):
        solve_step(spec)
    solve_step(hyperbolic_spec(n_x, c=np.full((2, n_x + 1), 2.5), inv_dt=6.25))


def test_nonfinite_rejected():
    f = np.zeros((2, 5))
    f[1, 2] = np.nan
    with pytest.raises(SolverError, match="non-finite f"):
        solve_step(hyperbolic_spec(4, f=f))


def test_scheme_name_checked():
    with pytest.raises(ValueError):
        solve_step(hyperbolic_spec(4), "weno")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n_x=st.integers(3, 20), I=st.integers(1, 4))
def test_upwind_matrix_is_m_matrix(seed, n_x, I):
    """Under the mesh condition the upwind system has a non-negative inverse."""
    rng = np.random.default_rng(seed)
    shape = (I, n_x + 1)
    a = 0.5 + rng.random(shape)
    spec = hyperbolic_spec(n_x, I=I, a=a, b=rng.normal(scale=3, size=shape), c=rng.random(shape),
                           alpha=0.1 + rng.random(I), lam=rng.random() + 0.1, inv_dt=1.0 + 4 * rng.random())
    b = spec.b[:, 1:]
    mesh = (spec.inv_dt + spec.c[:, 1:] + np.abs(b) / spec.dx) * spec.dx**2 / a[:, 1:]
    if np.any(mesh >= 2):
        return
    A, _ = assemble_step(spec, "upwind").to_dense()
    off = A - np.diag(np.diag(A))
    assert np.all(off <= 1e-12)
    assert np.all(np.linalg.inv(A) >= -1e-10)
