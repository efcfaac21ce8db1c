"""Problem configuration: angle grids, ULA steering vectors, desired beampattern, delays."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

import numpy as np

DEFAULT_MAINLOBES = ((-40.0, 10.0), (30.0, 10.0))
ALGORITHMS = ("um-gd", "um-agd", "um-svrg")
SAMPLING_MODES = ("unbiased", "paper-faithful")

# grid values are rounded to this many decimals so that 0.1-degree multiples compare exactly
_GRID_DECIMALS = 9
_EDGE_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid scenario or solver configuration. The message names the field."""


@dataclass(frozen=True)
class SolverSettings:
    algorithm: str = "um-agd"
    step_size: float = 1e-7
    t_bar: float = 1.0
    beta: float = 0.5
    sigma: float = 1e-4
    max_backtracks: int = 80
    t0: float = 1e-7
    lam: float = 1.0
    m_inner: int | None = None
    max_iters: int = 1000
    max_epochs: int = 30
    grad_tol: float | None = None
    sampling_mode: str = "unbiased"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"solver.algorithm: unknown algorithm {self.algorithm!r}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ConfigError(f"solver.sampling_mode: must be one of {SAMPLING_MODES}")
        for name in ("step_size", "t_bar", "t0", "lam"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver.{name} must be positive")
        for name in ("beta", "sigma"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"solver.{name} must lie in (0, 1)")
        if self.m_inner is not None and self.m_inner < 1:
            raise ConfigError("solver.m_inner must be a positive integer")
        if self.max_iters < 0 or self.max_epochs < 0 or self.max_backtracks < 0:
            raise ConfigError("solver iteration limits must be nonnegative")
        if self.grad_tol is not None and self.grad_tol < 0:
            raise ConfigError("solver.grad_tol must be nonnegative")

    def to_dict(self) -> dict[str, Any]:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["lambda"] = out.pop("lam")
        return out


# Independent random streams derived from the scenario seed. Each consumer gets
# its own SeedSequence spawn key, so extra draws in one never shift another.
STREAM_INIT = 0
STREAM_SVRG = 1
STREAM_GRADCHECK = 2


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def build_angle_grid(spacing_deg: float) -> np.ndarray:
    """Angles -90 + k*spacing strictly inside (-90, 90)."""
    if not (0 < spacing_deg < 180) or not math.isfinite(spacing_deg):
        raise ConfigError(f"angle_spacing_deg must lie in (0, 180), got {spacing_deg}")
    count = int(math.floor(180.0 / spacing_deg + _EDGE_TOL))
    grid = np.round(-90.0 + spacing_deg * np.arange(1, count + 1), _GRID_DECIMALS)
    return grid[(grid > -90.0) & (grid < 90.0)]


def steering_vector(theta_deg: float, m: int) -> np.ndarray:
    """Half-wavelength ULA steering vector exp(j*pi*k*sin(theta)), k = 0..m-1."""
    if not abs(theta_deg) < 90:
        raise ValueError(f"steering angle must lie in (-90, 90), got {theta_deg}")
    return steering_matrix(np.array([theta_deg]), m)[:, 0]


def steering_matrix(thetas_deg: np.ndarray, m: int) -> np.ndarray:
    """M x len(thetas) matrix whose columns are steering vectors."""
    s = np.sin(np.deg2rad(np.asarray(thetas_deg, dtype=float)))
    return np.exp(1j * np.pi * np.outer(np.arange(m), s))


def desired_beampattern(theta_deg, mainlobes: Sequence[tuple[float, float]]):
    """Indicator of the union of [center - half, center + half] windows.

    Works elementwise on arrays; returns a float (0.0 or 1.0) for scalar input.
    """
    theta = np.asarray(theta_deg, dtype=float)
    inside = np.zeros(theta.shape, dtype=bool)
    for center, half in mainlobes:
        inside |= (theta >= center - half - _EDGE_TOL) & (theta <= center + half + _EDGE_TOL)
    out = inside.astype(float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    m_antennas: int
    n_samples: int
    angle_grid: tuple[float, ...]
    interest_angles: tuple[float, ...]
    delay_set: tuple[int, ...]
    mainlobes: tuple[tuple[float, float], ...] = DEFAULT_MAINLOBES
    weight_wc: float = 25.0
    seed: int = 0
    angle_spacing_deg: float = 0.1
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        m, n = self.m_antennas, self.n_samples
        if not (isinstance(m, (int, np.integer)) and m >= 1):
            raise ConfigError("m_antennas must be a positive integer")
        if not (isinstance(n, (int, np.integer)) and n >= 1):
            raise ConfigError("n_samples must be a positive integer")
        if n <= m:
            raise ConfigError("n_samples must exceed m_antennas")
        grid = tuple(float(g) for g in self.angle_grid)
        if not grid:
            raise ConfigError("angle_grid must be non-empty")
        if any(not -90 < g < 90 for g in grid):
            raise ConfigError("angle_grid entries must lie strictly inside (-90, 90)")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("angle_grid must be strictly increasing")
        object.__setattr__(self, "angle_grid", grid)

        if not self.interest_angles:
            raise ConfigError("interest_angles must be non-empty")
        object.__setattr__(self, "interest_angles", tuple(self._snap(a) for a in self.interest_angles))

        delays = tuple(int(d) for d in self.delay_set)
        if not delays:
            raise ConfigError("delay_set must be non-empty")
        for d, raw in zip(delays, self.delay_set):
            if d != raw:
                raise ConfigError(f"delay_set: {raw!r} is not an integer")
            if not 0 <= d <= n:
                raise ConfigError(f"delay_set: delay {d} outside [0, n_samples={n}]")
        if len(set(delays)) != len(delays):
            raise ConfigError("delay_set contains duplicates")
        object.__setattr__(self, "delay_set", delays)

        lobes = tuple((float(c), float(h)) for c, h in self.mainlobes)
        if any(h < 0 for _, h in lobes):
            raise ConfigError("mainlobes: half_width_deg must be nonnegative")
        object.__setattr__(self, "mainlobes", lobes)
        if not (self.weight_wc > 0 and math.isfinite(self.weight_wc)):
            raise ConfigError("weight_wc must be a positive finite number")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def _snap(self, angle: float) -> float:
        grid = np.asarray(self.angle_grid)
        k = int(np.argmin(np.abs(grid - angle)))
        if k > 0:
            step = grid[k] - grid[k - 1]
        elif len(grid) > 1:
            step = grid[1] - grid[0]
        else:
            step = self.angle_spacing_deg
        if abs(grid[k] - angle) > step / 2 + _EDGE_TOL:
            raise ConfigError(f"interest_angles: {angle} is not within half a grid step of the angle grid")
        return float(grid[k])

    @classmethod
    def build(
        cls,
        m_antennas: int,
        n_samples: int,
        *,
        angle_spacing_deg: float = 0.1,
        angle_grid: Sequence[float] | None = None,
        interest_angles: Sequence[float] | None = None,
        delay_max: int | None = None,
        delay_set: Sequence[int] | None = None,
        mainlobes: Sequence[tuple[float, float]] = DEFAULT_MAINLOBES,
        weight_wc: float = 25.0,
        seed: int = 0,
        solver: SolverSettings | None = None,
    ) -> "ScenarioConfig":
        """Convenience constructor applying the documented defaults."""
        if angle_grid is None:
            angle_grid = build_angle_grid(angle_spacing_deg)
        if interest_angles is None:
            interest_angles = [c for c, _ in mainlobes]
        if delay_set is None:
            delay_set = range(0, (16 if delay_max is None else delay_max) + 1)
        return cls(
            m_antennas=m_antennas,
            n_samples=n_samples,
            angle_grid=tuple(angle_grid),
            interest_angles=tuple(interest_angles),
            delay_set=tuple(delay_set),
            mainlobes=tuple(mainlobes),
            weight_wc=weight_wc,
            seed=seed,
            angle_spacing_deg=angle_spacing_deg,
            solver=solver or SolverSettings(),
        )

    def with_solver(self, **changes) -> "ScenarioConfig":
        return replace(self, solver=replace(self.solver, **changes))

    # Derived arrays. cached_property writes straight into __dict__, which frozen dataclasses allow.

    @cached_property
    def grid(self) -> np.ndarray:
        return np.asarray(self.angle_grid)

    @cached_property
    def steering(self) -> np.ndarray:
        return steering_matrix(self.grid, self.m_antennas)

    @cached_property
    def pbar(self) -> np.ndarray:
        return desired_beampattern(self.grid, self.mainlobes)

    @cached_property
    def interest_steering(self) -> np.ndarray:
        return steering_matrix(np.asarray(self.interest_angles), self.m_antennas)

    @cached_property
    def delays(self) -> np.ndarray:
        return np.asarray(self.delay_set, dtype=int)

    @property
    def wc2(self) -> float:
        return float(self.weight_wc) ** 2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_samples, self.m_antennas)

    @property
    def default_grad_tol(self) -> float:
        if self.solver.grad_tol is not None:
            return self.solver.grad_tol
        return 1e-6 * math.sqrt(self.n_samples * self.m_antennas)

    @property
    def default_m_inner(self) -> int:
        return self.solver.m_inner or 2 * len(self.delay_set)

    def to_dict(self) -> dict[str, Any]:
        """Resolved configuration in the scenario-file schema (explicit delay_set)."""
        return {
            "m_antennas": int(self.m_antennas),
            "n_samples": int(self.n_samples),
            "angle_spacing_deg": self.angle_spacing_deg,
            "interest_angles_deg": list(self.interest_angles),
            "delay_set": list(self.delay_set),
            "mainlobes": [{"center_deg": c, "half_width_deg": h} for c, h in self.mainlobes],
            "weight_wc": self.weight_wc,
            "seed": int(self.seed),
            "solver": self.solver.to_dict(),
        }


_TOP_KEYS = {
    "m_antennas", "n_samples", "angle_spacing_deg", "interest_angles_deg",
    "delay_max", "delay_set", "mainlobes", "weight_wc", "seed", "solver",
}
_SOLVER_KEYS = {
    "algorithm", "step_size", "t_bar", "beta", "sigma", "t0", "lambda", "m_inner",
    "max_iters", "max_epochs", "grad_tol", "sampling_mode", "max_backtracks",
}


def _require_number(obj: dict, key: str, kind=float):
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return kind(value)


def solver_from_dict(raw: dict) -> SolverSettings:
    if not isinstance(raw, dict):
        raise ConfigError("solver: expected an object")
    unknown = set(raw) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"solver: unknown keys {sorted(unknown)}")
    kw: dict[str, Any] = {}
    for key in ("step_size", "t_bar", "beta", "sigma", "t0"):
        if key in raw:
            kw[key] = _require_number(raw, key)
    if "lambda" in raw:
        kw["lam"] = _require_number(raw, "lambda")
    for key in ("max_iters", "max_epochs", "max_backtracks"):
        if key in raw:
            kw[key] = _require_number(raw, key, int)
    for key in ("m_inner", "grad_tol"):
        if raw.get(key) is not None:
            kw[key] = _require_number(raw, key, int if key == "m_inner" else float)
    for key in ("algorithm", "sampling_mode"):
        if key in raw:
            kw[key] = str(raw[key])
    return SolverSettings(**kw)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("scenario: expected a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"scenario: unknown keys {sorted(unknown)}")
    for key in ("m_antennas", "n_samples"):
        if key not in raw:
            raise ConfigError(f"{key}: required field missing")
    if "delay_max" in raw and "delay_set" in raw:
        raise ConfigError("delay_max and delay_set are mutually exclusive")

    kw: dict[str, Any] = {
        "m_antennas": _require_number(raw, "m_antennas", int),
        "n_samples": _require_number(raw, "n_samples", int),
    }
    if "angle_spacing_deg" in raw:
        kw["angle_spacing_deg"] = _require_number(raw, "angle_spacing_deg")
    if "weight_wc" in raw:
        kw["weight_wc"] = _require_number(raw, "weight_wc")
    if "seed" in raw:
        kw["seed"] = _require_number(raw, "seed", int)
    if "delay_max" in raw:
        kw["delay_max"] = _require_number(raw, "delay_max", int)
        if kw["delay_max"] < 0:
            raise ConfigError("delay_max must be nonnegative")
    if "delay_set" in raw:
        if not isinstance(raw["delay_set"], list):
            raise ConfigError("delay_set: expected a list of integers")
        kw["delay_set"] = [_require_number({"delay_set": d}, "delay_set", int) for d in raw["delay_set"]]
    if "mainlobes" in raw:
        try:
            kw["mainlobes"] = [(float(lobe["center_deg"]), float(lobe["half_width_deg"])) for lobe in raw["mainlobes"]]
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"mainlobes: expected a list of {{center_deg, half_width_deg}} objects ({exc})") from None
    if "interest_angles_deg" in raw:
        try:
            kw["interest_angles"] = [float(a) for a in raw["interest_angles_deg"]]
        except (TypeError, ValueError):
            raise ConfigError("interest_angles_deg: expected a list of numbers") from None
    if "solver" in raw:
        kw["solver"] = solver_from_dict(raw["solver"])
    return ScenarioConfig.build(**kw)


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read and validate a JSON scenario file."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from None
    return scenario_from_dict(raw)
