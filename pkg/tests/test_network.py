import numpy as np
import pytest

from starpde.network import (GridError, NetworkField, SolutionCube, StarNetwork, build_grid,
                             holder_quotient, junction_continuity_check, lipschitz_seminorm,
                             sup_norm)


def test_star_network_validation():
    with pytest.raises(ValueError):
        StarNetwork(0, 1.0)
    with pytest.raises(ValueError):
        StarNetwork(2, 0.0)


def test_grid_nodes_and_steps(star3):
    g = build_grid(star3, 2.0, 0.5, 8, 4, 5)
    assert g.dt == 0.25 and g.dx == 0.25 and g.dl == 0.1
    assert g.t[-1] == 2.0 and g.x[-1] == 1.0 and g.l[-1] == 0.5
    assert g.inv_dt == 4.0
    assert g.inv_dl == pytest.approx(10.0)
    assert g.t.flags.writeable is False


@pytest.mark.parametrize("kw", [dict(n_t=0), dict(n_x=1), dict(n_l=-2), dict(n_t=2.5)])
def test_grid_rejects_bad_counts(star3, kw):
    args = dict(n_t=4, n_x=4, n_l=4)
    args.update(kw)
    with pytest.raises(GridError):
        build_grid(star3, 1.0, 1.0, **args)


def test_grid_threshold(star3):
    with pytest.raises(GridError, match="n_t below admissibility threshold"):
        build_grid(star3, 1.0, 1.0, 3, 4, 4, min_nt=5)


def test_field_junction_stored_once():
    f = NetworkField(2.0, np.ones((3, 4)))
    assert np.all(f.values[:, 0] == 2.0)
    assert junction_continuity_check(f)
    with pytest.raises(ValueError):
        f.interior[0, 0] = 5.0


def test_from_values_requires_continuity():
    v = np.ones((2, 5))
    v[1, 0] = 1.5
    with pytest.raises(ValueError):
        NetworkField.from_values(v)
    assert NetworkField.from_values(v, tol=0.6).junction_value == 1.0


def test_field_arithmetic():
    a = NetworkField(1.0, np.full((2, 3), 2.0))
    b = NetworkField.constant(0.5, 2, 3)
    c = (a - b) * 2.0 + b
    assert c.junction_value == 1.5
    assert np.all(c.interior == 3.5)


def test_sup_norm():
    assert sup_norm(NetworkField(-3.0, np.zeros((2, 2)))) == 3.0
    assert sup_norm(np.array([[1.0, -4.0]])) == 4.0


def test_lipschitz_seminorm():
    assert lipschitz_seminorm([0.0, 0.5, 0.25], 0.5) == 1.0
    with pytest.raises(ValueError):
        lipschitz_seminorm([1.0], 0.1)


def test_holder_quotient_sqrt_on_nonuniform_nodes():
    t = np.array([0.0, 0.25, 1.0])
    assert holder_quotient(np.sqrt(t), t, 0.5) == pytest.approx(1.0)


def test_holder_quotient_distance_cap():
    s = np.array([0.0, 0.0, 10.0])
    assert holder_quotient(s, 1.0, 0.5, max_distance=1.0) == pytest.approx(10.0)
    assert holder_quotient(s[:2], 1.0, 0.5) == 0.0


def test_junction_check_raw_array():
    v = np.array([[1.0, 2.0], [1.0 + 1e-9, 3.0]])
    assert not junction_continuity_check(v, junction_value=1.0)
    assert junction_continuity_check(v, tol=1e-8, junction_value=1.0)
    with pytest.raises(ValueError):
        junction_continuity_check(v)


def test_cube_shapes(star3):
    g = build_grid(star3, 1.0, 1.0, 2, 3, 2)
    cube = SolutionCube(g, np.zeros((3, 3)), np.ones((3, 3, 3, 3)))
    assert cube.values().shape == (3, 3, 3, 4)
    assert np.all(cube.values()[..., 0] == 0.0)
    with pytest.raises(ValueError):
        SolutionCube(g, np.zeros((2, 3)), np.ones((3, 3, 3, 3)))
