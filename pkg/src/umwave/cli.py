"""``umwave`` command line: design, evaluate, gradcheck, bench.

Exit codes: 0 success, 1 check or solver failure, 2 usage/validation error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .manifold import ProductPoint, is_unimodular, random_point, random_tangent
from .metrics import correlation_table, synthesized_beampattern
from .objective import (
    EuclideanGradient,
    MemoryCapError,
    egrad_pairing,
    eval_f,
    eval_parts,
    fd_directional,
    full_egrad,
    precompute,
)
from .scenario import (
    ALGORITHMS,
    STREAM_GRADCHECK,
    STREAM_INIT,
    STREAM_SVRG,
    ConfigError,
    ScenarioConfig,
    load_scenario,
    rng_stream,
)
from .solvers import (
    AgdConfig,
    GdConfig,
    SolverError,
    SvrgConfig,
    run_um_agd,
    run_um_gd,
    run_um_svrg,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
HISTORY_COLUMNS = ["iter", "epoch", "f", "e", "P", "grad_norm", "step", "grad_units", "wall_ns"]
GRADCHECK_STEPS = (1e-5, 1e-6, 1e-7)
GRADCHECK_TOL = 1e-4


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


# ---------------------------------------------------------------- solver dispatch


def start_point(cfg: ScenarioConfig, pre=None) -> ProductPoint:
    return random_point(cfg, rng_stream(cfg.seed, STREAM_INIT))


def solve(cfg: ScenarioConfig, p0: ProductPoint, algorithm: str, *, max_iters=None, max_epochs=None):
    s = cfg.solver
    tol = cfg.default_grad_tol
    if algorithm == "um-gd":
        pre = precompute(cfg, merged=True)
        conf = GdConfig(step_size=s.step_size, max_iters=s.max_iters if max_iters is None else max_iters, grad_tol=tol)
        return run_um_gd(p0, conf, cfg, pre)
    if algorithm == "um-agd":
        pre = precompute(cfg, merged=True)
        conf = AgdConfig(
            t_bar=s.t_bar, beta=s.beta, sigma=s.sigma, grad_tol=tol, max_backtracks=s.max_backtracks,
            max_iters=s.max_iters if max_iters is None else max_iters,
        )
        return run_um_agd(p0, conf, cfg, pre)
    if algorithm == "um-svrg":
        pre = precompute(cfg, merged=False)
        conf = SvrgConfig(
            m_inner=cfg.default_m_inner, t0=s.t0, lam=s.lam, grad_tol=tol, sampling_mode=s.sampling_mode,
            max_epochs=s.max_epochs if max_epochs is None else max_epochs,
        )
        return run_um_svrg(p0, conf, cfg, pre, rng=rng_stream(cfg.seed, STREAM_SVRG))
    raise ValueError(f"unknown algorithm {algorithm!r}")


# ---------------------------------------------------------------- file formats


def history_rows(report, deterministic: bool):
    for r in report.records:
        yield [r.iter, r.epoch, r.f, r.e, r.P, r.grad_norm, r.step, r.grad_units, 0 if deterministic else r.wall_ns]


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_waveform(path: Path, p: ProductPoint):
    m = p.x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", fmt(p.alpha)])
        w.writerow([f"{part}_{k}" for k in range(m) for part in ("re", "im")])
        for row in p.x:
            w.writerow([fmt(v) for z in row for v in (z.real, z.imag)])


def read_waveform(path: Path) -> ProductPoint:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    try:
        if rows[0][0] != "alpha":
            raise ValueError("first row must be 'alpha,<value>'")
        alpha = float(rows[0][1])
        body = np.array([[float(v) for v in row] for row in rows[2:] if row], dtype=float)
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed waveform file {path}: {exc}") from None
    if body.ndim != 2 or body.shape[1] % 2:
        raise ConfigError(f"malformed waveform file {path}: expected re,im column pairs")
    return ProductPoint(alpha, body[:, 0::2] + 1j * body[:, 1::2])


def write_metrics(out: Path, cfg: ScenarioConfig, p: ProductPoint):
    curve = synthesized_beampattern(p.x, cfg.grid, p.alpha, cfg.pbar)
    write_csv(out / "beampattern.csv", ["theta_deg", "power", "desired_scaled"], curve.rows())
    table = correlation_table(p.x, cfg.interest_angles, cfg.delay_set)
    write_csv(out / "correlation.csv", ["theta_i_deg", "theta_j_deg", "tau", "level_db"], table.rows())


@contextlib.contextmanager
def atomic_dir(out_dir: Path):
    """Collect outputs in a temp dir next to ``out_dir``; move them in only on success."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out_dir.exists():
        for item in tmp.iterdir():
            os.replace(item, out_dir / item.name)
        tmp.rmdir()
    else:
        os.replace(tmp, out_dir)


def manifest(args, cfg: ScenarioConfig, files, status: str, algorithm: str) -> dict:
    return {
        "scenario_path": str(args.scenario),
        "config": cfg.to_dict(),
        "solver": {"algorithm": algorithm, **{k: v for k, v in cfg.solver.to_dict().items() if k != "algorithm"}},
        "seed": int(cfg.seed),
        "version": __version__,
        "deterministic": bool(args.deterministic),
        "threads": args.threads,
        "outputs": sorted(files),
        "status": status,
    }


# ---------------------------------------------------------------- commands


def cmd_design(args) -> int:
    cfg = load_scenario(args.scenario)
    algorithm = cfg.solver.algorithm
    p0 = start_point(cfg)
    try:
        p, report = solve(cfg, p0, algorithm)
    except SolverError as exc:
        print(f"umwave design: {algorithm} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    with atomic_dir(Path(args.out)) as tmp:
        write_csv(tmp / "history.csv", HISTORY_COLUMNS, history_rows(report, args.deterministic))
        write_waveform(tmp / "waveform.csv", p)
        write_metrics(tmp, cfg, p)
        files = ["history.csv", "waveform.csv", "beampattern.csv", "correlation.csv", "manifest.json"]
        doc = manifest(args, cfg, files, report.status, algorithm)
        (tmp / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    r = report.final
    print(f"{algorithm}: status={report.status} iters={r.iter} f={r.f:.6e} e={r.e:.6e} P={r.P:.6e} -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.waveform is None:
        raise ConfigError("evaluate needs --waveform PATH")
    p = read_waveform(Path(args.waveform))
    if p.x.shape != cfg.shape:
        raise ConfigError(f"waveform is {p.x.shape[0]}x{p.x.shape[1]}, scenario expects {cfg.shape[0]}x{cfg.shape[1]}")
    if not is_unimodular(p.x, tol=1e-6):
        worst = float(np.max(np.abs(np.abs(p.x) - 1)))
        raise ConfigError(f"waveform entries are not unimodular (max | |x| - 1 | = {worst:.3e})")
    pre = precompute(cfg, merged=False)
    f, e, P = eval_parts(p, pre)
    result = {"f": f, "e": e, "P": P}
    if args.out:
        with atomic_dir(Path(args.out)) as tmp:
            write_metrics(tmp, cfg, p)
            (tmp / "evaluation.json").write_text(json.dumps(result, indent=2) + "\n")
    print(json.dumps(result))
    return EXIT_OK


def gradcheck(cfg: ScenarioConfig, trials: int, corrupt: bool = False, steps=GRADCHECK_STEPS):
    """Worst relative error between analytic and finite-difference directional derivatives.

    Returns (worst, worst_trial, per_step_worst).
    """
    pre = precompute(cfg, merged=True)
    worst, worst_trial = 0.0, None
    per_step = {h: 0.0 for h in steps}
    for trial in range(trials):
        rng = rng_stream(cfg.seed, STREAM_GRADCHECK, trial)
        p = random_point(cfg, rng)
        # move alpha off its optimum so the alpha slot is exercised too
        p = ProductPoint(p.alpha + rng.standard_normal(), p.x)
        t = random_tangent(p, rng)
        scale = 1.0 / np.sqrt(t.xi_alpha**2 + np.vdot(t.xi_x, t.xi_x).real)
        t = t.scale(scale)
        g = full_egrad(p, pre)
        if corrupt:
            g = EuclideanGradient(g.d_alpha, 1.01 * g.d_x)
        analytic = egrad_pairing(g, t)
        for h in steps:
            fd = fd_directional(p, t, lambda q: eval_f(q, pre), h)
            err = abs(fd - analytic) / max(abs(analytic), abs(fd), 1e-300)
            per_step[h] = max(per_step[h], err)
            if err > worst:
                worst, worst_trial = err, trial
    return worst, worst_trial, per_step


def cmd_gradcheck(args) -> int:
    cfg = load_scenario(args.scenario)
    worst, trial, per_step = gradcheck(cfg, args.trials, corrupt=args.corrupt_gradient)
    for h, err in per_step.items():
        print(f"h={h:.0e}: worst relative error {err:.3e}")
    print(f"worst relative error over {args.trials} trials: {worst:.3e}")
    if worst < GRADCHECK_TOL:
        return EXIT_OK
    print(f"gradient check FAILED (seed {cfg.seed}, trial {trial})", file=sys.stderr)
    return EXIT_FAIL


def bench_rows(cfg: ScenarioConfig, algorithms, budget: int):
    """Rows keyed by normalized gradient count (Grad Number / |D|), capped at ``budget``."""
    n_delays = len(cfg.delay_set)
    p0 = start_point(cfg)
    rows = []
    for algorithm in algorithms:
        if budget <= 0:
            continue
        if algorithm == "um-svrg":
            per_epoch = n_delays + cfg.default_m_inner
            epochs = max(0, (budget * n_delays - n_delays) // per_epoch)
            _, report = solve(cfg, p0, algorithm, max_epochs=epochs)
        else:
            _, report = solve(cfg, p0, algorithm, max_iters=budget - 1)
        for r in report.records:
            norm_count = r.grad_units / n_delays
            if norm_count <= budget:
                rows.append([algorithm, norm_count, r.iter, r.f, r.e, r.P, r.grad_norm])
    return rows


def cmd_bench(args) -> int:
    cfg = load_scenario(args.scenario)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown or not algorithms:
        raise ConfigError(f"--algorithms: unknown algorithm(s) {unknown}; choose from {list(ALGORITHMS)}")
    try:
        rows = bench_rows(cfg, algorithms, args.budget)
    except SolverError as exc:
        print(f"umwave bench: {exc}", file=sys.stderr)
        return EXIT_FAIL
    with atomic_dir(Path(args.out)) as tmp:
        write_csv(tmp / "bench.csv", ["algorithm", "grad_number_per_delay", "iter", "f", "e", "P", "grad_norm"],
                  ([a, *rest] for a, *rest in rows))
    print(f"bench: {len(rows)} rows -> {Path(args.out) / 'bench.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umwave", description="Unimodular MIMO-radar waveform design.")
    parser.add_argument("--version", action="version", version=f"umwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--threads", type=int, default=None, help="BLAS thread count")
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded BLAS and zeroed wall-clock column, for byte-identical reruns")

    p = sub.add_parser("design", help="run the configured solver and write results")
    common(p)
    p.add_argument("--out", default="umwave_out")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("evaluate", help="score an externally supplied waveform")
    common(p)
    p.add_argument("--waveform", required=True, help="waveform.csv as written by design")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="compare analytic gradients against finite differences")
    common(p)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="compare solvers at equal normalized gradient count")
    common(p)
    p.add_argument("--algorithms", default="um-gd,um-agd")
    p.add_argument("--budget", type=int, default=100, help="budget in Grad Number / |D|")
    p.add_argument("--out", default="umwave_out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "trials", 0) is not None and getattr(args, "trials", 0) < 0:
        print("umwave: --trials must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    threads = 1 if args.deterministic else args.threads
    try:
        limiter = threadpool_limits(threads) if threads else contextlib.nullcontext()
        with limiter:
            return args.func(args)
    except (ConfigError, MemoryCapError) as exc:
        print(f"umwave {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
