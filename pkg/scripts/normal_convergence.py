"""e and P versus iteration for UM-GD and UM-AGD on the normal-scale scenario.

Writes one CSV per algorithm and prints the first iteration at which P < 1.

    python3 scripts/normal_convergence.py --iters 2000 --out results/normal
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from umwave.cli import start_point, solve
from umwave.scenario import load_scenario

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default=ROOT / "scenarios" / "normal.json")
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--out", default="results/normal")
    args = ap.parse_args()

    cfg = load_scenario(args.scenario)
    p0 = start_point(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    first = {}
    for alg in ("um-gd", "um-agd"):
        _, rep = solve(cfg, p0, alg, max_iters=args.iters)
        with open(out / f"{alg}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "e", "P", "f", "grad_norm", "step"])
            for r in rep.records:
                w.writerow([r.iter, r.e, r.P, r.f, r.grad_norm, r.step])
        hits = np.flatnonzero(rep.column("P") < 1.0)
        first[alg] = int(hits[0]) if hits.size else None
        print(f"{alg}: final e={rep.final.e:.4e} P={rep.final.P:.4e}, first P<1 at {first[alg]}")
    if first["um-agd"] and first["um-gd"]:
        print(f"iteration ratio GD/AGD to reach P<1: {first['um-gd'] / first['um-agd']:.2f}")


if __name__ == "__main__":
    main()
