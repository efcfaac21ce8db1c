"""Reduced-scale large-array comparison: f, e, P versus Grad Number / |D|.

Runs the algorithms of the desk scenario (M=32, N=256, D=[0,64]) from one
seeded start at an equal normalized gradient budget and writes bench.csv.

    python3 scripts/desk_svrg_vs_gd.py --budget 200 --out results/desk
"""

import argparse
from pathlib import Path

from umwave.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default=str(ROOT / "scenarios" / "large_desk.json"))
    ap.add_argument("--budget", type=int, default=200)
    ap.add_argument("--algorithms", default="um-gd,um-svrg")
    ap.add_argument("--out", default="results/desk")
    args = ap.parse_args()
    return cli_main(["bench", args.scenario, "--algorithms", args.algorithms,
                     "--budget", str(args.budget), "--out", args.out, "--deterministic"])


if __name__ == "__main__":
    raise SystemExit(main())
