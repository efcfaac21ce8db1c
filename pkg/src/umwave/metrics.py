"""Post-hoc evaluation of designed waveforms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objective import beampattern_power, correlation_tensor
from .scenario import steering_matrix


class EvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class BeampatternCurve:
    angles_deg: np.ndarray
    power: np.ndarray
    desired: np.ndarray   # alpha * pbar

    def rows(self):
        return zip(self.angles_deg, self.power, self.desired)


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    theta_i: np.ndarray
    theta_j: np.ndarray
    tau: np.ndarray
    level_db: np.ndarray

    def rows(self):
        return zip(self.theta_i, self.theta_j, self.tau, self.level_db)

    def select(self, lags) -> np.ndarray:
        return self.level_db[np.isin(self.tau, list(lags))]


def synthesized_beampattern(x: np.ndarray, grid, alpha: float = 0.0, pbar=None) -> BeampatternCurve:
    """||X a_theta||^2 over ``grid`` alongside the scaled target alpha * pbar."""
    grid = np.asarray(grid, dtype=float)
    power = beampattern_power(x, steering_matrix(grid, x.shape[1]))
    desired = np.zeros_like(power) if pbar is None else alpha * np.asarray(pbar, dtype=float)
    return BeampatternCurve(grid, power, desired)


def _levels_db(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    if np.any(den <= 0):
        raise EvaluationError("zero-lag autocorrelation vanished; normalization undefined")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(num / den)


def normalized_correlation_db(x: np.ndarray, theta_i: float, theta_j: float, tau: int) -> float:
    """10 log10(|P_ij,tau| / max(|P_ii,0|, |P_jj,0|))."""
    a = steering_matrix(np.array([theta_i, theta_j]), x.shape[1])
    ptens = correlation_tensor(x, a, [0, tau])
    den = max(abs(ptens[0, 0, 0]), abs(ptens[0, 1, 1]))
    if theta_i == theta_j and tau == 0:
        return 0.0
    return float(_levels_db(np.array([abs(ptens[1, 0, 1])]), np.array([den]))[0])


def correlation_table(x: np.ndarray, angles_deg, delays) -> CorrelationTable:
    """Normalized levels for every ordered pair of ``angles_deg`` and every delay."""
    angles = np.asarray(angles_deg, dtype=float)
    delays = np.asarray(delays, dtype=int)
    a = steering_matrix(angles, x.shape[1])
    ptens = correlation_tensor(x, a, delays)
    zero_lag = np.abs(np.einsum("nk,nk->k", (x @ a).conj(), x @ a))
    k = len(angles)
    den = np.maximum(zero_lag[:, None], zero_lag[None, :])
    levels = _levels_db(np.abs(ptens), np.broadcast_to(den, ptens.shape))
    # self-normalized terms are 0 dB by definition
    for idx in np.flatnonzero(delays == 0):
        np.fill_diagonal(levels[idx], 0.0)
    ii, jj = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    d = len(delays)
    return CorrelationTable(
        theta_i=np.tile(angles[ii].ravel(), d),
        theta_j=np.tile(angles[jj].ravel(), d),
        tau=np.repeat(delays, k * k),
        level_db=levels.reshape(-1),
    )


def mainlobe_sidelobe_ratio(curve: BeampatternCurve, pbar: np.ndarray) -> float:
    """Mean mainlobe power divided by mean sidelobe power."""
    main = np.asarray(pbar) > 0.5
    if not main.any() or main.all():
        raise EvaluationError("need both mainlobe and sidelobe angles")
    return float(curve.power[main].mean() / curve.power[~main].mean())
