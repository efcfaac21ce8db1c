"""UM-GD, UM-AGD (Armijo backtracking) and UM-SVRG on R x UM(N, M)."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .manifold import ProductPoint, ProductTangent, inner, project_tangent, retract, transport_to
from .objective import (
    EuclideanGradient,
    Precompute,
    eval_parts,
    f_decrease,
    full_egrad,
    precompute,
    stoch_egrad,
)

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERS = "max_iters"
ERROR = "error"


class SolverError(RuntimeError):
    """Solver aborted; ``report`` holds the history up to the failure."""

    def __init__(self, message: str, report: "SolverReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class GdConfig:
    step_size: float
    max_iters: int = 1000
    grad_tol: float = 0.0

    def __post_init__(self):
        if not self.step_size >= 0:
            raise ValueError("step_size must be nonnegative")


@dataclass(frozen=True)
class AgdConfig:
    t_bar: float = 1.0
    beta: float = 0.5
    sigma: float = 1e-4
    max_iters: int = 1000
    grad_tol: float = 0.0
    max_backtracks: int = 80

    def __post_init__(self):
        if not self.t_bar > 0:
            raise ValueError("t_bar must be positive")
        if not (0 < self.beta < 1 and 0 < self.sigma < 1):
            raise ValueError("beta and sigma must lie in (0, 1)")


@dataclass(frozen=True)
class SvrgConfig:
    m_inner: int
    t0: float
    lam: float = 1.0
    max_epochs: int = 30
    grad_tol: float = 0.0
    sampling_mode: str = "unbiased"
    # evaluate and log f every this many inner steps (0: only at snapshots)
    record_every: int = 0

    def __post_init__(self):
        if self.m_inner < 1:
            raise ValueError("m_inner must be positive")
        if not (self.t0 > 0 and self.lam > 0):
            raise ValueError("t0 and lam must be positive")


@dataclass
class IterRecord:
    iter: int
    epoch: int
    f: float
    e: float
    P: float
    grad_norm: float
    step: float
    grad_units: int
    e_units: int
    wall_ns: int
    backtracks: int = 0
    # accepted f(k) - f(k+1), evaluated from differences (AGD only)
    decrease: float = float("nan")


@dataclass
class SolverReport:
    algorithm: str
    records: list[IterRecord] = field(default_factory=list)
    status: str = MAX_ITERS
    message: str = ""
    inner_steps: int = 0
    inner_time_ns: int = 0

    @property
    def final(self) -> IterRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def riemannian_gradient(p: ProductPoint, g: EuclideanGradient) -> ProductTangent:
    return ProductTangent(g.d_alpha, project_tangent(p.x, g.d_x))


def init_alpha(x: np.ndarray, pre) -> float:
    """Minimizer of e(alpha, X) over alpha for fixed X."""
    if isinstance(pre, Precompute):
        sum_p2 = pre.sum_p2
        weighted = float(np.real(np.sum((x.conj().T @ x) * pre.sum_pa.T)))
    else:
        pbar = pre.pbar
        sum_p2 = float(np.sum(pbar**2))
        b = x @ pre.steering
        weighted = float(np.dot(pbar, np.einsum("nk,nk->k", b.conj(), b).real))
    if sum_p2 == 0:
        return 0.0
    return weighted / sum_p2


def full_riemannian_gradient(p: ProductPoint, pre: Precompute) -> ProductTangent:
    return riemannian_gradient(p, full_egrad(p, pre))


def _check_finite(f: float, report: SolverReport, k: int):
    if not math.isfinite(f):
        report.status = ERROR
        report.message = f"non-finite objective at iteration {k}"
        raise SolverError(report.message, report)


def _ensure_pre(scenario, pre: Precompute | None) -> Precompute:
    if pre is not None:
        return pre
    return precompute(scenario, merged=True)


def run_um_gd(p0: ProductPoint, cfg: GdConfig, scenario, pre: Precompute | None = None):
    """Fixed-step Riemannian gradient descent.

    Sufficient decrease is only guaranteed for steps below 2/L, with L the
    (unknown) retraction-Lipschitz constant of f; prefer ``run_um_agd``.
    """
    pre = _ensure_pre(scenario, pre)
    if pre.sum_AA is None:
        log.warning("merged e-gradient unavailable; using per-angle summation")
    report = SolverReport("um-gd")
    n_delays, n_angles = len(pre.delays), pre.n_angles
    p = p0
    start = time.perf_counter_ns()
    for k in range(cfg.max_iters + 1):
        f, e, P = eval_parts(p, pre)
        _check_finite(f, report, k)
        grad = full_riemannian_gradient(p, pre)
        gnorm = math.sqrt(inner(p, grad, grad))
        done = gnorm <= cfg.grad_tol or k == cfg.max_iters
        report.records.append(IterRecord(
            iter=k, epoch=0, f=f, e=e, P=P, grad_norm=gnorm,
            step=0.0 if done else cfg.step_size,
            grad_units=(k + 1) * n_delays, e_units=(k + 1) * n_angles,
            wall_ns=time.perf_counter_ns() - start,
        ))
        if gnorm <= cfg.grad_tol:
            report.status = CONVERGED
            break
        if k == cfg.max_iters:
            report.status = MAX_ITERS
            break
        p = retract(p, grad.scale(-cfg.step_size))
    return p, report


def run_um_agd(p0: ProductPoint, cfg: AgdConfig, scenario, pre: Precompute | None = None):
    """Riemannian gradient descent with Armijo backtracking from t_bar each iteration."""
    pre = _ensure_pre(scenario, pre)
    report = SolverReport("um-agd")
    n_delays, n_angles = len(pre.delays), pre.n_angles
    p = p0
    f, e, P = eval_parts(p, pre)
    _check_finite(f, report, 0)
    start = time.perf_counter_ns()
    for k in range(cfg.max_iters + 1):
        grad = full_riemannian_gradient(p, pre)
        g2 = inner(p, grad, grad)
        gnorm = math.sqrt(g2)
        rec = IterRecord(
            iter=k, epoch=0, f=f, e=e, P=P, grad_norm=gnorm, step=0.0,
            grad_units=(k + 1) * n_delays, e_units=(k + 1) * n_angles, wall_ns=0,
        )
        report.records.append(rec)
        if gnorm <= cfg.grad_tol:
            report.status = CONVERGED
            rec.wall_ns = time.perf_counter_ns() - start
            break
        if k == cfg.max_iters:
            report.status = MAX_ITERS
            rec.wall_ns = time.perf_counter_ns() - start
            break

        t = cfg.t_bar
        for nb in range(cfg.max_backtracks + 1):
            trial = retract(p, grad.scale(-t))
            # -sigma <grad, -t grad> = sigma t ||grad||^2
            dec = f_decrease(p, trial, pre)
            if dec >= cfg.sigma * t * g2:
                break
            t *= cfg.beta
        else:
            report.status = ERROR
            report.message = (
                f"Armijo condition not met after {cfg.max_backtracks} backtracks at iteration {k} "
                f"(t = {t:.3e}); check t_bar / sigma"
            )
            rec.wall_ns = time.perf_counter_ns() - start
            raise SolverError(report.message, report)
        f_new, e_new, P_new = eval_parts(trial, pre)
        _check_finite(f_new, report, k + 1)
        rec.step = t
        rec.backtracks = nb
        rec.decrease = dec
        rec.wall_ns = time.perf_counter_ns() - start
        p, f, e, P = trial, f_new, e_new, P_new
    return p, report


def svrg_step_size(k1: int, cfg: SvrgConfig) -> float:
    """Decaying schedule t0 / (1 + t0 * lam * floor(k1 / m_inner))."""
    if k1 < 0:
        raise ValueError("k1 must be nonnegative")
    return cfg.t0 / (1.0 + cfg.t0 * cfg.lam * (k1 // cfg.m_inner))


def svrg_direction(
    p: ProductPoint,
    snapshot: ProductPoint,
    snapshot_grad: ProductTangent,
    theta_index: int,
    tau: int,
    pre: Precompute,
    mode: str,
) -> ProductTangent:
    """Variance-reduced direction grad f_i(p) - T_p(grad f_i(snap) - grad f(snap)).

    At the snapshot itself the correction cancels exactly and the stored full
    gradient is returned unchanged.
    """
    if p is snapshot:
        return snapshot_grad
    g_here = riemannian_gradient(p, stoch_egrad(p, theta_index, tau, pre, mode))
    g_snap = riemannian_gradient(snapshot, stoch_egrad(snapshot, theta_index, tau, pre, mode))
    return g_here - transport_to(p, g_snap - snapshot_grad)


def run_um_svrg(
    p0: ProductPoint,
    cfg: SvrgConfig,
    scenario,
    pre: Precompute | None = None,
    rng: np.random.Generator | None = None,
):
    """Riemannian SVRG with uniform (theta, tau) sampling.

    Gradient units follow the normalized-count convention: one inner step
    costs 1 unit, a full snapshot gradient costs |D| units (the e-part's
    |Theta| terms are tallied separately in ``e_units``).
    """
    if pre is None:
        pre = precompute(scenario, merged=False)
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    report = SolverReport("um-svrg")
    n_delays, n_angles = len(pre.delays), pre.n_angles
    delays = pre.delays
    units = e_units = 0
    k1 = 0
    snap = p0
    start = time.perf_counter_ns()
    bookkeeping = 0

    def record(it, epoch, point, gnorm, step):
        nonlocal bookkeeping
        t_in = time.perf_counter_ns()
        f, e, P = eval_parts(point, pre)
        _check_finite(f, report, it)
        bookkeeping += time.perf_counter_ns() - t_in
        report.records.append(IterRecord(
            iter=it, epoch=epoch, f=f, e=e, P=P, grad_norm=gnorm, step=step,
            grad_units=units, e_units=e_units,
            wall_ns=time.perf_counter_ns() - start - bookkeeping,
        ))

    for epoch in range(cfg.max_epochs + 1):
        snap_grad = full_riemannian_gradient(snap, pre)
        units += n_delays
        e_units += n_angles
        gnorm = math.sqrt(inner(snap, snap_grad, snap_grad))
        record(k1, epoch, snap, gnorm, 0.0)
        if gnorm <= cfg.grad_tol:
            report.status = CONVERGED
            break
        if epoch == cfg.max_epochs:
            report.status = MAX_ITERS
            break
        p = snap
        for q in range(cfg.m_inner):
            t_in = time.perf_counter_ns()
            theta_index = int(rng.integers(n_angles))
            tau = int(delays[rng.integers(n_delays)])
            step = svrg_step_size(k1, cfg)
            direction = svrg_direction(p, snap, snap_grad, theta_index, tau, pre, cfg.sampling_mode)
            p = retract(p, direction.scale(-step))
            report.inner_time_ns += time.perf_counter_ns() - t_in
            report.inner_steps += 1
            k1 += 1
            units += 1
            e_units += 1
            if cfg.record_every and (q + 1) % cfg.record_every == 0 and q + 1 < cfg.m_inner:
                record(k1, epoch, p, float("nan"), step)
        snap = p
    return snap, report
