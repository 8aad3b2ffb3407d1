"""
Piecewise desired trajectories sampled on the control grid
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from dsmc.errors import TrajectoryError

# breakpoint slack as a fraction of T, absorbs i·T rounding just below a breakpoint
_GRID_EPS = 1e-9


class TrajectoryKind(str, Enum):
    CONSTANT = "constant"
    STEP = "step-sequence"
    RAMP = "ramp-sequence"


@dataclass(frozen=True)
class TrajectorySpec:
    kind: TrajectoryKind
    breakpoints: tuple[tuple[float, float], ...]
    dither: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", TrajectoryKind(self.kind))
        points = tuple((float(t), float(v)) for t, v in self.breakpoints)
        object.__setattr__(self, "breakpoints", points)
        if not points:
            raise TrajectoryError("trajectory needs at least one breakpoint")
        if points[0][0] != 0.0:
            raise TrajectoryError(f"first breakpoint must be at t=0, got t={points[0][0]}")
        times = [t for t, _ in points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TrajectoryError(f"breakpoint times must be strictly increasing: {times}")
        if not all(math.isfinite(t) and math.isfinite(v) for t, v in points):
            raise TrajectoryError("breakpoints must be finite")
        if self.kind is TrajectoryKind.CONSTANT and len(points) != 1:
            raise TrajectoryError("a constant trajectory takes exactly one breakpoint")
        if not self.dither >= 0:
            raise TrajectoryError(f"dither must be >= 0, got {self.dither}")

    @classmethod
    def constant(cls, value: float) -> "TrajectorySpec":
        return cls(TrajectoryKind.CONSTANT, ((0.0, value),))

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.breakpoints])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.breakpoints])


def evaluate(spec: TrajectorySpec, t: np.ndarray | float, T: float = 1.0) -> np.ndarray:
    """Value at time t; the final value extends past the last breakpoint."""
    t = np.asarray(t, dtype=float)
    if spec.kind is TrajectoryKind.CONSTANT:
        return np.full(t.shape, spec.breakpoints[0][1])
    if spec.kind is TrajectoryKind.STEP:
        idx = np.searchsorted(spec.times, t + _GRID_EPS * T, side="right") - 1
        return spec.values[np.clip(idx, 0, len(spec.breakpoints) - 1)]
    return np.interp(t, spec.times, spec.values)


def trajectory_value(spec: TrajectorySpec, t: float, T: float) -> tuple[float, float]:
    """(x_d(i), x_d(i+1)) for the grid step nearest to t."""
    i = round(t / T)
    vals = evaluate(spec, np.array([i * T, (i + 1) * T]), T)
    return float(vals[0]), float(vals[1])


def sample(
    spec: TrajectorySpec,
    n_steps: int,
    T: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """n_steps + 1 samples at t = i·T so that x_d(i+1) exists for every step."""
    times = np.arange(n_steps + 1) * T
    values = evaluate(spec, times, T)
    if spec.dither > 0:
        if rng is None:
            raise TrajectoryError("dithered trajectory needs a seeded generator")
        values = values + rng.uniform(-spec.dither, spec.dither, size=values.shape)
    return values
