"""Certify every problem in a directory and tabulate observed against bound.

    python3 scripts/run_certificates.py problems --out runs/certificates
"""

import argparse
import json
from pathlib import Path

from starpde.cli import RunConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("directory", nargs="?", default="problems")
    ap.add_argument("--out", default="runs/certificates")
    ap.add_argument("--slack", type=float, default=0.05)
    args = ap.parse_args()

    worst = 0
    for path in sorted(Path(args.directory).glob("*.json")):
        out = Path(args.out) / path.stem
        code = run(RunConfig("certify", str(path), slack=args.slack, out=str(out)))
        worst = max(worst, code)
        cert_path = out / "certificate.json"
        if not cert_path.exists():
            continue
        for e in json.loads(cert_path.read_text())["entries"]:
            print(f"{path.stem:24s} {e['name']:32s} {e['observed']:>12.5g} <= {e['constant']}")
    raise SystemExit(worst)


if __name__ == "__main__":
    main()
