"""Built-in initial data with analytic derivatives where available.

Each 1D profile carries its density and, when known in closed form, the
derivative used by the phase-field solver.  Profiles without an analytic
derivative fall back to central differences on the reference grid with
one-sided stencils at the ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grids import Grid1D

__all__ = [
    "InitialCondition1D",
    "numeric_derivative",
    "ac_parabola",
    "pme_cosine",
    "pme_waiting_profile",
    "ks_gaussian_1d",
    "barenblatt_initial_2d",
    "nonradial_pme_2d",
    "ks_gaussian_2d",
]


@dataclass(frozen=True)
class InitialCondition1D:
    density: Callable
    derivative: Optional[Callable] = None

    def derivative_on(self, points, grid: Grid1D):
        if self.derivative is not None:
            return np.asarray(self.derivative(points), dtype=float)
        return numeric_derivative(self.density, np.asarray(points), grid.h)


def numeric_derivative(f: Callable, points: np.ndarray, h: float) -> np.ndarray:
    """Central differences with one-sided first-order stencils at the ends."""
    vals = np.asarray(f(points), dtype=float)
    out = np.empty_like(vals)
    out[1:-1] = (vals[2:] - vals[:-2]) / (points[2:] - points[:-2])
    out[0] = (vals[1] - vals[0]) / (points[1] - points[0])
    out[-1] = (vals[-1] - vals[-2]) / (points[-1] - points[-2])
    return out


def ac_parabola() -> InitialCondition1D:
    """rho0(X) = 1 - X^2 on [-1, 1]."""
    return InitialCondition1D(lambda x: 1.0 - np.asarray(x) ** 2,
                              lambda x: -2.0 * np.asarray(x))


def pme_cosine() -> InitialCondition1D:
    """rho0(x) = cos(pi x / 2) on [-1, 1]."""
    return InitialCondition1D(lambda x: np.cos(0.5 * np.pi * np.asarray(x)),
                              lambda x: -0.5 * np.pi * np.sin(0.5 * np.pi * np.asarray(x)))


def pme_waiting_profile(m: float, theta: float) -> InitialCondition1D:
    """Waiting-time initial datum on [-pi, 0] with flatness parameter theta."""
    if not m > 1.0:
        raise ValueError(f"need m > 1, got {m}")
    if not 0.0 <= theta <= 0.25:
        raise ValueError(f"theta must lie in [0, 0.25], got {theta}")

    def density(x):
        x = np.asarray(x)
        s2 = np.sin(x) ** 2
        base = (m - 1.0) / m * ((1.0 - theta) * s2 + theta * s2 * s2)
        return base ** (1.0 / (m - 1.0))

    return InitialCondition1D(density)


def ks_gaussian_1d(amplitude: float) -> InitialCondition1D:
    """Gaussian bump with total mass ~= amplitude, floored at 1e-8, on [-15, 15]."""

    def density(x):
        x = np.asarray(x)
        return amplitude / np.sqrt(2.0 * np.pi) * np.exp(-0.5 * x * x) + 1e-8

    def derivative(x):
        x = np.asarray(x)
        return -x * amplitude / np.sqrt(2.0 * np.pi) * np.exp(-0.5 * x * x)

    return InitialCondition1D(density, derivative)


def barenblatt_initial_2d(m: float):
    """Self-similar compactly supported profile at t = 0 (see diagnostics.barenblatt_2d)."""
    from .diagnostics import barenblatt_2d

    return lambda x, y: barenblatt_2d(x, y, 0.0, m)


def nonradial_pme_2d():
    """Partial donut support: three-quarter ring plus two circular caps."""

    def density(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.sqrt(x * x + y * y)
        out = np.zeros(np.broadcast(x, y).shape)
        ring = (r >= 0.5) & (r <= 1.0) & ((x < 0.0) | (y < 0.0))
        val = 0.25 ** 2 - (r - 0.75) ** 2
        out = np.where(ring, 25.0 * np.clip(val, 0.0, None) ** 1.5, out)
        cap1 = (x * x + (y - 0.75) ** 2 <= 0.25 ** 2) & (x >= 0.0)
        val1 = 0.25 ** 2 - x * x - (y - 0.75) ** 2
        out = np.where(cap1, 25.0 * np.clip(val1, 0.0, None) ** 1.5, out)
        cap2 = ((x - 0.75) ** 2 + y * y <= 0.25 ** 2) & (y >= 0.0)
        val2 = 0.25 ** 2 - (x - 0.75) ** 2 - y * y
        out = np.where(cap2, 25.0 * np.clip(val2, 0.0, None) ** 1.5, out)
        return out

    return density


def ks_gaussian_2d(amplitude: float):
    """u0(x, y) = C exp(-x^2 - y^2)."""

    def density(x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return amplitude * np.exp(-x * x - y * y)

    return density
