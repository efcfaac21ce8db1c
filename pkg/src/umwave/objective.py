"""Beampattern-matching and correlation objective with its Euclidean gradients.

Notation: ``B = X @ A`` stacks the synthesized signals ``b_theta = X a_theta``
as columns. For the correlation term ``P[tau, i, j] = b_i^H S_tau b_j`` where
``S_tau`` shifts a length-N vector ``tau`` samples toward index 0.

X-gradients are Wirtinger derivatives ``G = df/dX*``: for any direction
``Xi``, ``d/dh f(X + h Xi) = 2 Re Tr(G^H Xi)``. The alpha derivative is the
ordinary one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import ProductPoint, ProductTangent, retract
from .scenario import steering_vector

DEFAULT_MEM_CAP = 1 << 30


class MemoryCapError(MemoryError):
    pass


@dataclass(frozen=True, eq=False)
class Precompute:
    """Iteration-independent sums over the full angle grid."""

    steering: np.ndarray          # M x |Theta|
    pbar: np.ndarray              # |Theta|
    sum_pa: np.ndarray            # sum pbar a a^H, M x M
    sum_p2: float                 # sum pbar^2
    sum_AA: np.ndarray | None     # sum vec(aa^H) vec(aa^H)^H, M^2 x M^2
    interest_steering: np.ndarray
    delays: np.ndarray
    wc2: float

    @property
    def n_angles(self) -> int:
        return self.steering.shape[1]


@dataclass(frozen=True, eq=False)
class EuclideanGradient:
    d_alpha: float
    d_x: np.ndarray

    def __add__(self, other: "EuclideanGradient") -> "EuclideanGradient":
        return EuclideanGradient(self.d_alpha + other.d_alpha, self.d_x + other.d_x)

    def scale(self, c: float) -> "EuclideanGradient":
        return EuclideanGradient(c * self.d_alpha, c * self.d_x)


def precompute(cfg, merged: bool = True, mem_cap: int = DEFAULT_MEM_CAP) -> Precompute:
    a = cfg.steering
    pbar = cfg.pbar
    m = a.shape[0]
    sum_pa = (a * pbar) @ a.conj().T
    sum_AA = None
    if merged:
        need = 16 * m**4
        if need > mem_cap:
            raise MemoryCapError(
                f"merged gradient needs an {m * m}x{m * m} complex matrix ({need} bytes > cap {mem_cap}); "
                "use um-svrg for this array size"
            )
        # columns vec(a a^H) in column-major order
        vecs = (a[:, None, :].conj() * a[None, :, :]).reshape(m * m, -1)
        sum_AA = vecs @ vecs.conj().T
    return Precompute(
        steering=a,
        pbar=pbar,
        sum_pa=sum_pa,
        sum_p2=float(np.sum(pbar**2)),
        sum_AA=sum_AA,
        interest_steering=cfg.interest_steering,
        delays=cfg.delays,
        wc2=cfg.wc2,
    )


# ---------------------------------------------------------------- shifts and correlations


def shift_apply(tau: int, v: np.ndarray, transposed: bool = False) -> np.ndarray:
    """Apply S_tau (or S_tau^T) along axis 0 without forming the matrix."""
    v = np.asarray(v)
    n = v.shape[0]
    if not 0 <= tau <= n:
        raise ValueError(f"shift {tau} outside [0, {n}]")
    out = np.zeros_like(v)
    if transposed:
        out[tau:] = v[: n - tau]
    else:
        out[: n - tau] = v[tau:]
    return out


def correlation(x: np.ndarray, theta_i: float, theta_j: float, tau: int) -> complex:
    m = x.shape[1]
    bi = x @ steering_vector(theta_i, m)
    bj = x @ steering_vector(theta_j, m)
    return complex(np.vdot(bi, shift_apply(tau, bj)))


def _corr_from_signals(b: np.ndarray, delays) -> np.ndarray:
    n = b.shape[0]
    out = np.empty((len(delays), b.shape[1], b.shape[1]), dtype=complex)
    for k, tau in enumerate(delays):
        out[k] = b[: n - tau].conj().T @ b[tau:]
    return out


def correlation_tensor(x: np.ndarray, interest_steering: np.ndarray, delays) -> np.ndarray:
    """P[k, i, j] = b_i^H S_{delays[k]} b_j for all interest-angle pairs."""
    return _corr_from_signals(x @ interest_steering, delays)


def _term_mask(delays, k: int) -> np.ndarray:
    """Which (tau, i, j) terms enter P: auto terms are dropped at tau = 0."""
    mask = np.ones((len(delays), k, k), dtype=bool)
    zero = np.asarray(delays) == 0
    mask[zero] &= ~np.eye(k, dtype=bool)
    return mask


# ---------------------------------------------------------------- objective values


def _quad_form(gram: np.ndarray, steering: np.ndarray) -> np.ndarray:
    """Re(a^H G a) for every steering column a."""
    c = gram @ steering
    return np.sum(steering.real * c.real + steering.imag * c.imag, axis=0)


def beampattern_power(x: np.ndarray, steering: np.ndarray) -> np.ndarray:
    # ||X a||^2 = a^H (X^H X) a; the M x M Gram keeps this O(M^2 |Theta|)
    return _quad_form(x.conj().T @ x, steering)


def eval_e(alpha: float, x: np.ndarray, pre) -> float:
    r = alpha * pre.pbar - beampattern_power(x, pre.steering)
    return float(np.dot(r, r))


def eval_P(x: np.ndarray, cfg) -> float:
    ptens = correlation_tensor(x, cfg.interest_steering, cfg.delays)
    mask = _term_mask(cfg.delays, ptens.shape[1])
    return float(np.sum(np.abs(ptens[mask]) ** 2))


def eval_parts(p: ProductPoint, pre) -> tuple[float, float, float]:
    """(f, e, P) at a point."""
    e = eval_e(p.alpha, p.x, pre)
    P = eval_P(p.x, pre)
    return e + pre.wc2 * P, e, P


def eval_f(p: ProductPoint, pre) -> float:
    return eval_parts(p, pre)[0]


def f_decrease(p: ProductPoint, q: ProductPoint, pre) -> float:
    """f(p) - f(q) computed from differences rather than two rounded totals.

    Near convergence e is ~1e8 while the per-step change can sit below its
    ulp; forming power differences as Re(a^H (X_p - X_q)^H (X_p + X_q) a) keeps
    the result accurate to roundoff in the change itself.
    """
    a = pre.steering
    dx = p.x - q.x
    dpow = _quad_form(dx.conj().T @ (p.x + q.x), a)
    rp = p.alpha * pre.pbar - beampattern_power(p.x, a)
    rq = q.alpha * pre.pbar - beampattern_power(q.x, a)
    dr = (p.alpha - q.alpha) * pre.pbar - dpow
    de = float(np.dot(dr, rp + rq))

    cp = correlation_tensor(p.x, pre.interest_steering, pre.delays)
    cq = correlation_tensor(q.x, pre.interest_steering, pre.delays)
    mask = _term_mask(pre.delays, cp.shape[1])
    dP = float(np.sum(np.abs(cp[mask]) ** 2 - np.abs(cq[mask]) ** 2))
    return de + pre.wc2 * dP


# ---------------------------------------------------------------- full gradients


def egrad_alpha(alpha: float, x: np.ndarray, pre) -> float:
    # Re Tr(X^H X sum_pa); the imaginary part is roundoff
    tr = np.real(np.sum((x.conj().T @ x) * pre.sum_pa.T))
    return float(2.0 * (alpha * pre.sum_p2 - tr))


def egrad_x_e(alpha: float, x: np.ndarray, pre) -> np.ndarray:
    """Gradient of e in X. Uses the merged M^2 x M^2 form when available."""
    if pre.sum_AA is None:
        return egrad_x_e_unmerged(alpha, x, pre)
    m = x.shape[1]
    gram = x.conj().T @ x
    w = (pre.sum_AA @ gram.reshape(-1, order="F")).reshape(m, m, order="F")
    # (I_M kron X) vec(W) == vec(X W)
    return -2.0 * alpha * (x @ pre.sum_pa) + 2.0 * (x @ w)


def egrad_x_e_unmerged(alpha: float, x: np.ndarray, pre) -> np.ndarray:
    a = pre.steering
    b = x @ a
    power = np.einsum("nk,nk->k", b.conj(), b).real
    return 2.0 * ((b * (power - alpha * pre.pbar)) @ a.conj().T)


def _accumulate_P_grad(b: np.ndarray, ptens: np.ndarray, mask: np.ndarray, delays) -> np.ndarray:
    """N x K matrix U with grad = U @ A_hat^H.

    d|P_ij|^2/dX* = conj(P_ij) S b_j a_i^H + P_ij S^T b_i a_j^H.
    """
    n = b.shape[0]
    u = np.zeros_like(b)
    for k, tau in enumerate(delays):
        c = np.where(mask[k], ptens[k], 0.0)
        u[: n - tau] += b[tau:] @ c.conj().T
        u[tau:] += b[: n - tau] @ c
    return u


def egrad_x_P(x: np.ndarray, cfg) -> np.ndarray:
    a_hat = cfg.interest_steering
    b = x @ a_hat
    delays = cfg.delays
    ptens = _corr_from_signals(b, delays)
    u = _accumulate_P_grad(b, ptens, _term_mask(delays, b.shape[1]), delays)
    return u @ a_hat.conj().T


def full_egrad(p: ProductPoint, pre) -> EuclideanGradient:
    """Euclidean gradient of f = e + wc^2 P."""
    d_alpha = egrad_alpha(p.alpha, p.x, pre)
    d_x = egrad_x_e(p.alpha, p.x, pre) + pre.wc2 * egrad_x_P(p.x, pre)
    return EuclideanGradient(d_alpha, d_x)


# ---------------------------------------------------------------- per-term (stochastic) gradients


def egrad_e_theta(alpha: float, x: np.ndarray, k: int, pre) -> EuclideanGradient:
    """Gradient of e_theta = |alpha pbar_theta - ||X a_theta||^2|^2 for grid index k."""
    a = pre.steering[:, k]
    pb = pre.pbar[k]
    b = x @ a
    power = float(np.real(np.vdot(b, b)))
    d_alpha = 2.0 * (alpha * pb * pb - pb * power)
    d_x = 2.0 * (power - alpha * pb) * np.outer(b, a.conj())
    return EuclideanGradient(d_alpha, d_x)


def egrad_P_tau(x: np.ndarray, tau: int, cfg) -> np.ndarray:
    """Gradient of the single-delay correlation term P_tau.

    Auto terms are excluded at tau = 0 so that summing over all delays gives P.
    """
    a_hat = cfg.interest_steering
    b = x @ a_hat
    ptens = _corr_from_signals(b, [tau])
    u = _accumulate_P_grad(b, ptens, _term_mask([tau], b.shape[1]), [tau])
    return u @ a_hat.conj().T


def stoch_egrad(p: ProductPoint, theta_index: int, tau: int, pre, mode: str = "unbiased") -> EuclideanGradient:
    """Sampled gradient of e_theta + wc^2 P_tau.

    ``unbiased`` rescales by |Theta| and |D| so that the uniform average over
    all (theta, tau) equals the full gradient; ``paper-faithful`` does not.
    """
    ge = egrad_e_theta(p.alpha, p.x, theta_index, pre)
    gp = egrad_P_tau(p.x, tau, pre)
    if mode == "unbiased":
        ce, cp = float(pre.n_angles), float(len(pre.delays))
    elif mode == "paper-faithful":
        ce, cp = 1.0, 1.0
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return EuclideanGradient(ce * ge.d_alpha, ce * ge.d_x + cp * pre.wc2 * gp)


# ---------------------------------------------------------------- derivative checks


def egrad_pairing(g, t: ProductTangent) -> float:
    """Directional derivative implied by gradient ``g`` along ``t``.

    ``g`` may be an EuclideanGradient or a Riemannian gradient (ProductTangent);
    the X part is a Wirtinger derivative, hence the factor 2.
    """
    if isinstance(g, EuclideanGradient):
        ga, gx = g.d_alpha, g.d_x
    else:
        ga, gx = g.xi_alpha, g.xi_x
    return ga * t.xi_alpha + 2.0 * float(np.real(np.vdot(gx, t.xi_x)))


def fd_directional(p: ProductPoint, t: ProductTangent, func, h: float = 1e-6) -> float:
    """Central difference of ``func`` along the retraction curve h -> R_p(h t)."""
    if not h > 0:
        raise ValueError("h must be positive")
    return (func(retract(p, t.scale(h))) - func(retract(p, t.scale(-h)))) / (2.0 * h)
