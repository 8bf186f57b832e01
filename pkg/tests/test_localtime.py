import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import constant_one
from starpde.bounds import certify, local_time_constants
from starpde.localtime import (beta_constants, kirchhoff_residual, level_tables, observed_norms,
                               run_backward, sample_norms, solve_level)
from starpde.network import GridError, StarNetwork, build_grid
from starpde.problem import ProblemData, sample_coefficients
from starpde.rothe import AssumptionError
from starpde.verification import manufactured_cosine


def quad_trace(net, dl_g0=None):
    return ProblemData.create(net, 1, 1, a=1, b=0, c=0, f=0, alpha=1, r=0, phi=0,
                              psi="l^2", g="l^2", dl_g0=dl_g0, a_floor=1, alpha_floor=1)


@pytest.mark.parametrize("dl_g0", ["2*l", None])
def test_beta_for_square_trace(star3, dl_g0):
    grid = build_grid(star3, 1.0, 1.0, 2, 4, 10)
    beta = beta_constants(quad_trace(star3, dl_g0), grid)
    # 10 ((l + 0.1)^2 - l^2) - 2 l = 0.1
    assert beta.analytic == (dl_g0 is not None)
    assert np.allclose(beta.beta, 0.1, atol=1e-12 if dl_g0 else 1e-9, rtol=0)
    assert len(beta) == 10


@pytest.mark.parametrize("trace,expected", [("3", 0.0), ("l", 0.0), ("2*l - 1", 0.0)])
def test_beta_vanishes_for_affine_traces(star3, trace, expected):
    data = ProblemData.create(star3, 1, 1, a=1, b=0, c=0, f=0, alpha=1, r=0, phi=0,
                              psi=trace, g=trace, a_floor=1, alpha_floor=1)
    grid = build_grid(star3, 1.0, 1.0, 2, 4, 7)
    assert np.allclose(beta_constants(data, grid).beta, expected, atol=1e-9)


def test_constant_one_cube(star3):
    grid = build_grid(star3, 1.0, 1.0, 16, 32, 16)
    data = constant_one(star3)
    cube = run_backward(data, grid)
    assert np.max(np.abs(cube.values() - 1.0)) <= 1e-10
    assert kirchhoff_residual(cube, data, grid)["sup_all"] < 1e-9


def test_zero_cube(star3):
    grid = build_grid(star3, 1.0, 1.0, 4, 8, 4)
    data = constant_one(star3, psi=0, g=0)
    assert np.all(run_backward(data, grid).values() == 0.0)


def test_level_junction_data(star3):
    grid = build_grid(star3, 1.0, 1.0, 4, 8, 4)
    data = constant_one(star3, r="0.5*t")
    tb = sample_coefficients(data, grid)
    lt = level_tables(tb, grid, 2, 0.25, np.ones(5))
    assert np.all(lt.lam >= grid.inv_dl)
    assert np.allclose(lt.lam, 4 + 0.5 * grid.t)
    assert np.allclose(lt.gamma, 0.25 - 4.0)


def test_solve_level_checks(star3):
    grid = build_grid(star3, 1.0, 1.0, 4, 8, 4)
    tb = sample_coefficients(constant_one(star3), grid)
    with pytest.raises(ValueError):
        solve_level(4, np.ones(5), tb, grid, 0.0)
    with pytest.raises(ValueError):
        solve_level(0, np.ones(3), tb, grid, 0.0)
    traj = solve_level(3, np.ones(5), tb, grid, 0.0)
    assert np.allclose(traj.values(), 1.0)


def test_validation_required(star3):
    grid = build_grid(star3, 1.0, 1.0, 4, 8, 4)
    with pytest.raises(AssumptionError):
        run_backward(constant_one(star3, psi=2), grid)


def test_level_threshold(star3):
    grid = build_grid(star3, 1.0, 1.0, 16, 8, 4)
    with pytest.raises(GridError, match="n_l below admissibility threshold"):
        run_backward(constant_one(star3, r=3.0), grid, check=False)


@pytest.fixture(scope="module")
def manufactured():
    net = StarNetwork(3, 1.0)
    case = manufactured_cosine("l^2", "2*l", network=net, a=1, b=0.5, c=1, r=0.2)
    grid = build_grid(net, 1.0, 1.0, 16, 32, 16)
    return case, grid, run_backward(case.data, grid)


def test_boundary_planes_exact(manufactured):
    case, grid, cube = manufactured
    tb = sample_coefficients(case.data, grid)
    vals = cube.values()
    assert np.array_equal(vals[-1], tb.psi)
    assert np.array_equal(vals[:, 0], tb.g)


def test_compliant_residual_is_beta(manufactured):
    case, grid, cube = manufactured
    res = kirchhoff_residual(cube, case.data, grid)["table"]
    beta = beta_constants(case.data, grid).beta
    assert np.allclose(res[:, 1:], beta[:, None], atol=1e-9)


def test_naive_residual_vanishes_after_first_step(manufactured):
    case, grid, _ = manufactured
    cube = run_backward(case.data, grid, naive_beta=True)
    res = kirchhoff_residual(cube, case.data, grid)["table"]
    assert np.max(np.abs(res[:, 1:])) < 1e-9


def test_observed_norms_and_certificates(manufactured):
    case, grid, cube = manufactured
    obs = observed_norms(cube)
    assert obs["sup"] == pytest.approx(1.0)
    assert set(obs) >= {"sup", "junction_time_lip", "l_quotient", "l_quotient_last"}
    norms = sample_norms(case.data, grid)
    assert norms["dlg0_sup"] == pytest.approx(2.0)
    rep = certify(obs, local_time_constants(norms, obs["gradient_reported"]))
    assert rep.passed and len(rep.entries) == 3


@settings(max_examples=10, deadline=None)
@given(bump=st.floats(0, 2), drop=st.floats(0, 2), b=st.floats(-3, 3))
def test_cube_monotone(bump, drop, b):
    from starpde.verification import comparison_test
    net = StarNetwork(2, 1.0)
    data = constant_one(net, a=[1.0, "1 + x"], b=[b, 0.0], alpha=[0.5, 1.5])
    grid = build_grid(net, 1.0, 1.0, 6, 10, 5)
    assert comparison_test(data, grid, bump=bump, drop=drop).passed
