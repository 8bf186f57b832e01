"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, PROBLEMS, constant_one
from starpde import cli
from starpde.elliptic import EllipticStepSpec, solve_step
from starpde.localtime import beta_constants, kirchhoff_residual, run_backward
from starpde.network import NetworkField, StarNetwork, build_grid
from starpde.problem import ProblemData, sample_coefficients
from starpde.verification import convergence_study, manufactured_cosine

CORPUS = sorted(p.name for p in PROBLEMS.glob("*.json"))


def report(number: int, passed: bool, detail: str):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def cosine_case():
    return manufactured_cosine("l^2", "2*l", network=StarNetwork(3, 1.0), a=1, b=0.5, c=1, r=0.2)


def test_criterion_1_constant_solution():
    net = StarNetwork(3, 1.0)
    cube = run_backward(constant_one(net), build_grid(net, 1.0, 1.0, 16, 32, 16))
    dev = float(np.max(np.abs(cube.values() - 1.0)))
    report(1, dev <= 1e-10, f"constant cube deviation {dev:.3e} <= 1e-10")


def _hyperbolic_junction(n_x):
    shape = (2, n_x + 1)
    spec = EllipticStepSpec(inv_dt=1.0, dx=1.0 / n_x, a=np.ones(shape), b=np.zeros(shape),
                            c=np.zeros(shape), f=np.zeros(shape), lam=1.0, alpha=np.full(2, 0.5),
                            gamma=-1.0, prev=NetworkField(0.0, np.zeros((2, n_x))))
    return solve_step(spec, "centered").junction_value


def test_criterion_2_elliptic_oracle():
    exact = (1 + math.exp(-2)) / 2
    errs = [abs(_hyperbolic_junction(n) - exact) for n in (50, 100, 200, 400)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = errs[2] <= 1e-3 and bool(np.all(np.abs(orders - 2.0) <= 0.3))
    report(2, ok, f"error at n_x=200 {errs[2]:.3e}, orders {np.round(orders, 3).tolist()}")


def test_criterion_3_beta_exact():
    net = StarNetwork(3, 1.0)
    data = ProblemData.create(net, 1.0, 1.0, a=1, b=0, c=0, f=0, alpha=1, r=0, phi=0, psi="l^2",
                              g="l^2", dl_g0="2*l", a_floor=1, alpha_floor=1)
    beta = beta_constants(data, build_grid(net, 1.0, 1.0, 2, 4, 10)).beta
    dev = float(np.max(np.abs(beta - 0.1)))
    report(3, beta.size == 10 and dev <= 1e-12, f"max |beta_p - 0.1| = {dev:.3e}")


def test_criterion_4_manufactured_convergence(cosine_case):
    t0 = time.perf_counter()
    finest = build_grid(cosine_case.data.network, 1.0, 1.0, 64, 128, 64)
    run_backward(cosine_case.data, finest, "centered")
    finest_seconds = time.perf_counter() - t0
    t0 = time.perf_counter()
    study = convergence_study(cosine_case, (16, 32, 16), 3, "centered", threads=1)
    sweep_seconds = time.perf_counter() - t0
    expected = {"t": 1.0, "x": 2.0, "l": 1.0}
    orders = {ax: s.order for ax, s in study.items()}
    ok = all(abs(orders[ax] - expected[ax]) <= 0.3 for ax in expected) and finest_seconds < 60
    report(4, ok, "orders " + ", ".join(f"{ax}={o:.3f}" for ax, o in orders.items())
           + f"; finest solve {finest_seconds:.2f} s, sweep {sweep_seconds:.1f} s")


def test_criterion_5_comparison(tmp_path):
    worst = {}
    for name in CORPUS:
        out = tmp_path / name
        code = cli.run(cli.RunConfig("compare", str(PROBLEMS / name), out=str(out)))
        res = json.loads((out / "compare.json").read_text()) if code == 0 else {}
        worst[name] = (code, max((r["worst_violation"] for r in res.values()), default=math.inf))
    ok = all(code == 0 and w <= 1e-10 for code, w in worst.values())
    report(5, ok, "; ".join(f"{n}: {w:.1e}" for n, (_, w) in worst.items()))


def test_criterion_6_certificates(tmp_path):
    status = {}
    for name in CORPUS:
        out = tmp_path / name
        code = cli.run(cli.RunConfig("certify", str(PROBLEMS / name), slack=0.05, out=str(out)))
        cert = json.loads((out / "certificate.json").read_text())
        status[name] = (code, len(cert["entries"]), cert["passed"])
    ok = all(code == 0 and passed for code, _, passed in status.values())
    report(6, ok, "; ".join(f"{n}: {k} bounds {'ok' if p else 'violated'}" for n, (_, k, p) in status.items()))


def test_criterion_7_boundary_planes(cosine_case):
    grid = build_grid(cosine_case.data.network, 1.0, 1.0, 16, 32, 16)
    tb = sample_coefficients(cosine_case.data, grid)
    vals = run_backward(cosine_case.data, grid, tables=tb).values()
    ok = np.array_equal(vals[-1], tb.psi) and np.array_equal(vals[:, 0], tb.g)
    ulp = max(float(np.max(np.abs(vals[-1] - tb.psi))), float(np.max(np.abs(vals[:, 0] - tb.g))))
    report(7, ok, f"max deviation on level n_l and slice k=0: {ulp:.1e}")


def _residual_sweep(case, naive):
    out = []
    for n_l in (16, 32, 64):
        grid = build_grid(case.data.network, 1.0, 1.0, 32, 64, n_l)
        cube = run_backward(case.data, grid, naive_beta=naive)
        out.append(kirchhoff_residual(cube, case.data, grid)["sup"])
    return np.array(out)


def test_criterion_8_kirchhoff_residual_order(cosine_case):
    res = _residual_sweep(cosine_case, naive=False)
    orders = np.log2(res[:-1] / res[1:])
    ok = bool(np.all(np.abs(orders - 1.0) <= 0.3))
    report(8, ok, f"residuals {res.tolist()}, orders {np.round(orders, 3).tolist()}")


def test_criterion_9_naive_beta_stalls(cosine_case):
    compliant = _residual_sweep(cosine_case, naive=False)
    naive = _residual_sweep(cosine_case, naive=True)
    ratio = naive[-1] / compliant[-1]
    report(9, bool(ratio > 10.0),
           f"naive residuals {naive.tolist()} vs compliant {compliant.tolist()}; "
           f"finest ratio {ratio:.3g} (needs > 10)")
