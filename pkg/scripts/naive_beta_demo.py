"""Local-time Kirchhoff residual with and without the compatibility constants.

Prints the residual sup over levels p <= n_l - 2 for a sequence of n_l,
once for the compliant scheme and once with beta_p set to zero, and the
residual restricted to the first time step, where the two differ only
through the initial data.

    python3 scripts/naive_beta_demo.py problems/manufactured_cosine.json
"""

import argparse
import json

import numpy as np

from starpde.localtime import kirchhoff_residual, run_backward
from starpde.network import build_grid
from starpde.verification import case_from_dict


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("--nt", type=int, default=32)
    ap.add_argument("--nx", type=int, default=64)
    ap.add_argument("--nl", type=int, nargs="+", default=(16, 32, 64))
    args = ap.parse_args()

    with open(args.problem, encoding="utf-8") as fh:
        data = case_from_dict(json.load(fh)).data
    print("n_l,compliant_sup,naive_sup,compliant_k0,naive_k0,naive_k>=1")
    for n_l in args.nl:
        grid = build_grid(data.network, data.horizon, data.l_max, args.nt, args.nx, n_l)
        row = []
        for naive in (False, True):
            res = kirchhoff_residual(run_backward(data, grid, naive_beta=naive), data, grid)
            row.append(res)
        comp, naive = row
        print(f"{n_l},{comp['sup']:.6g},{naive['sup']:.6g},"
              f"{np.max(np.abs(comp['table'][:-1, 0])):.6g},{np.max(np.abs(naive['table'][:-1, 0])):.6g},"
              f"{np.max(np.abs(naive['table'][:-1, 1:])):.3g}")


if __name__ == "__main__":
    main()
