"""Per-axis refinement study of a manufactured local-time problem.

    python3 scripts/run_convergence.py problems/manufactured_cosine.json --levels 3
"""

import argparse
import json
import time

from starpde.verification import SWEEP_HEADER, case_from_dict, convergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("--base", type=int, nargs=3, default=(16, 32, 16), metavar=("NT", "NX", "NL"))
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--scheme", default="centered")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    with open(args.problem, encoding="utf-8") as fh:
        case = case_from_dict(json.load(fh))
    t0 = time.perf_counter()
    study = convergence_study(case, tuple(args.base), args.levels, args.scheme, args.threads)
    print(",".join(SWEEP_HEADER))
    for sweep in study.values():
        for row in sweep.rows():
            print(",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    for ax, sweep in study.items():
        fit = "n/a" if sweep.order_vs_exact is None else f"{sweep.order_vs_exact:.3f}"
        print(f"# order in {ax}: {sweep.order:.3f} (fit against exact solution: {fit})")
    print(f"# elapsed {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
