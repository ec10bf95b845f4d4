"""Four-state air-feed dynamics and the pressure measurements.

The plant only emulates the process for the simulations; the controller never
reads anything from this module except through :func:`measure`.

States: ``x1`` oxygen partial pressure, ``x2`` nitrogen partial pressure
(both in the cathode, Pa), ``x3`` compressor speed (rad/s) and ``x4`` supply
manifold pressure (Pa).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import sqrt
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .params import DerivedConstants

# Relative slack (fraction of c11) below atmospheric cathode pressure that is
# clamped to zero instead of raising.
RADICAND_TOLERANCE = 1e-6


class PlantDomainError(ArithmeticError):
    """The state left the region where the outlet-flow square root is real."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class PlantState(NamedTuple):
    x1: float
    x2: float
    x3: float
    x4: float

    def validate(self, c: DerivedConstants) -> None:
        if not all(math.isfinite(v) for v in self):
            raise PlantDomainError(f"non-finite state {tuple(self)}", self)
        if self.x1 < 0 or self.x2 < 0 or self.x3 < 0 or self.x4 <= 0:
            raise PlantDomainError(f"state outside the positive orthant: {tuple(self)}", self)
        if self.x1 + self.x2 + c.c2 < c.c11 * (1.0 - RADICAND_TOLERANCE):
            raise PlantDomainError("cathode pressure below atmospheric", self)


class Measurement(NamedTuple):
    y1: float  # cathode total pressure, Pa
    y2: float  # supply manifold pressure, Pa


def plant_dynamics(x, u: float, xi: float, c: DerivedConstants,
                   tolerance: float = RADICAND_TOLERANCE) -> tuple:
    """Time derivative of the state ``x`` for motor current ``u`` and stack current ``xi``."""
    x1, x2, x3, x4 = x
    if not x4 > 0:
        raise PlantDomainError(f"supply manifold pressure {x4!r} must be positive", x)
    p_ca = x1 + x2 + c.c2
    radicand = p_ca - c.c11
    if radicand < 0:
        if radicand < -tolerance * c.c11 or radicand != radicand:
            raise PlantDomainError(
                f"cathode pressure {p_ca:.6g} Pa below atmospheric {c.c11:.6g} Pa", x)
        radicand = 0.0
    outlet = c.c3 * c.c17 * sqrt(radicand) / (c.c4 * x1 + c.c5 * x2 + c.c6)
    inlet = x4 - p_ca
    ratio = (x4 / c.c11) ** c.c12 - 1.0

    dx1 = c.c1 * inlet - c.c7 * xi - outlet * x1
    dx2 = c.c8 * inlet - outlet * x2
    dx3 = -c.c9 * x3 - c.c10 * ratio + c.c13 * u
    dx4 = c.c14 * (1.0 + c.c15 * ratio) * (c.c21 * x3 - c.c16 * inlet)
    return dx1, dx2, dx3, dx4


@dataclass(frozen=True)
class NoiseConfig:
    sigma_w1: float = 0.0  # Pa
    sigma_w2: float = 0.0  # Pa
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma_w1 >= 0 and self.sigma_w2 >= 0):
            raise ValueError("noise standard deviations must be >= 0")


# Preset used for the figure-style runs.
NOISY = NoiseConfig(sigma_w1=20.0, sigma_w2=20.0)


class GaussianSource:
    """Seeded standard-normal stream with a fixed, portable recipe.

    Uniforms are the top 53 bits of consecutive PCG64 outputs scaled by
    2**-53; normals come in pairs from the Box-Muller transform
    ``sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2)``. Only the PCG64 bit stream
    is taken from numpy, so the sequence does not depend on numpy's
    sampling algorithms.
    """

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed)
        self._spare = None

    def _uniform(self) -> float:
        return (int(self._bits.random_raw()) >> 11) * (1.0 / 9007199254740992.0)

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        r = sqrt(-2.0 * math.log(1.0 - self._uniform()))
        theta = 2.0 * math.pi * self._uniform()
        self._spare = r * math.sin(theta)
        return r * math.cos(theta)


def measure(x, c: DerivedConstants, noise: NoiseConfig, rng: GaussianSource | None = None) -> Measurement:
    """Cathode and manifold pressure readings with additive Gaussian noise.

    Noise is drawn only for channels with a nonzero standard deviation, w1
    before w2.
    """
    y1 = x[0] + x[1] + c.c2
    y2 = x[3]
    if noise.sigma_w1 > 0:
        y1 += noise.sigma_w1 * rng.normal()
    if noise.sigma_w2 > 0:
        y2 += noise.sigma_w2 * rng.normal()
    return Measurement(y1, y2)


def equilibrium(c: DerivedConstants, xi: float, pressure_drop: float) -> tuple[PlantState, float]:
    """Steady state and motor current holding ``x4 - (x1 + x2 + c2)`` at ``pressure_drop``.

    With the inlet pressure drop fixed, the two cathode balances reduce to a
    scalar equation in the nitrogen pressure, solved by bracketing.
    """
    if pressure_drop <= 0:
        raise ValueError("pressure_drop must be positive")
    d = pressure_drop
    ratio_o2_n2 = (c.c1 * d - c.c7 * xi) / (c.c8 * d)
    if ratio_o2_n2 <= 0:
        raise ValueError(f"no equilibrium with positive oxygen pressure at xi={xi}")
    mass_slope = c.c4 * ratio_o2_n2 + c.c5

    def residual(x2):
        rad = max((1.0 + ratio_o2_n2) * x2 + c.c2 - c.c11, 0.0)
        return c.c3 * c.c17 * x2 * sqrt(rad) - c.c8 * d * (mass_slope * x2 + c.c6)

    lo = (c.c11 - c.c2) / (1.0 + ratio_o2_n2)
    hi = 2.0 * lo
    while residual(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("equilibrium bracket search failed")
    x2 = brentq(residual, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    x1 = ratio_o2_n2 * x2
    x4 = x1 + x2 + c.c2 + d
    x3 = c.c16 * d / c.c21
    u = (c.c9 * x3 + c.c10 * ((x4 / c.c11) ** c.c12 - 1.0)) / c.c13
    return PlantState(x1, x2, x3, x4), u
