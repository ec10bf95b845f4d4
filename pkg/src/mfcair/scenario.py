"""Load profiles, the oxygen stoichiometry output and its setpoint."""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass

from .params import DerivedConstants

XI_MIN = 1.0  # A, guard against the division in the stoichiometry

# Cubic setpoint in the stack current, highest power first.
POLYNOMIAL_REFERENCE = (5e-8, -2.87e-5, 2.23e-3, 2.5)


class StarvationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CurrentProfile:
    """Piecewise-constant stack current: ``breakpoints`` are ``(start_s, current_A)``."""

    breakpoints: tuple
    duration: float

    def __post_init__(self):
        bp = tuple((float(t), float(i)) for t, i in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        if not bp:
            raise ValueError("profile needs at least one breakpoint")
        if bp[0][0] != 0.0:
            raise ValueError("first breakpoint must start at t = 0")
        times = [t for t, _ in bp]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("breakpoint times must be strictly increasing")
        if any(not (i > 0 and math.isfinite(i)) for _, i in bp):
            raise ValueError("all profile currents must be positive")
        if not self.duration > times[-1]:
            raise ValueError("duration must extend past the last breakpoint")

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.breakpoints]

    @property
    def step_times(self) -> list[float]:
        return self.times[1:]


def current_at(profile: CurrentProfile, t: float) -> float:
    """Zero-order hold of the breakpoint values, left-closed intervals."""
    if not 0.0 <= t <= profile.duration:
        raise ValueError(f"t = {t!r} outside [0, {profile.duration!r}]")
    k = bisect.bisect_right(profile.times, t) - 1
    return profile.breakpoints[k][1]


@dataclass(frozen=True)
class ReferenceSpec:
    mode: str = "constant"  # "constant" or "polynomial"
    value: float = 2.2

    def __post_init__(self):
        if self.mode not in ("constant", "polynomial"):
            raise ValueError(f"unknown reference mode {self.mode!r}")
        if self.mode == "constant":
            if not 1.0 < self.value < 4.0:
                raise ValueError(f"constant setpoint {self.value!r} outside (1, 4)")
            if not 2.0 <= self.value <= 2.5:
                warnings.warn(f"constant setpoint {self.value} outside the recommended [2, 2.5] band")


def compute_stoichiometry(y1: float, y2: float, xi: float, c: DerivedConstants,
                          xi_min: float = XI_MIN) -> float:
    """Oxygen excess ratio from the two pressure readings and the stack current."""
    if not xi > xi_min:
        raise ValueError(f"stack current {xi!r} A at or below the {xi_min} A guard")
    lam = c.c19 * (y2 - y1) / (c.c20 * xi)
    if lam <= 0:
        warnings.warn(f"non-positive oxygen stoichiometry {lam:.4g}", StarvationWarning)
    return lam


def polynomial_reference(xi: float) -> float:
    a3, a2, a1, a0 = POLYNOMIAL_REFERENCE
    return ((a3 * xi + a2) * xi + a1) * xi + a0


def desired_stoichiometry(xi: float, spec: ReferenceSpec) -> float:
    if spec.mode == "constant":
        return spec.value
    return polynomial_reference(xi)
