"""Open-loop sizing of the iP gains from step tests on the plant.

``alpha`` is picked so that ``alpha*u`` has the magnitude of the fastest
stoichiometry rate one ampere of motor current can produce anywhere on the
profile; underestimating it raises the effective loop gain and makes the
relative-degree-two plant oscillate at light load. ``kp`` is sized from the
largest stoichiometry jump a load step causes and a target settling time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import DerivedConstants
from .plant import equilibrium, plant_dynamics
from .scenario import CurrentProfile, ReferenceSpec, desired_stoichiometry
from .sim import integrate


@dataclass
class OperatingPoint:
    xi: float
    lambda_ref: float
    u_trim: float
    input_gain: float  # peak d(lambda)/dt per ampere after a motor current step
    static_gain: float  # d(lambda) per ampere at steady state


@dataclass
class TuningReport:
    points: list
    alpha: float
    kp: float
    tau: float
    ts: float
    max_jump: float  # largest relative setpoint error right after a load step


def _round_up(x: float, digits: int = 2) -> float:
    if x <= 0:
        return x
    e = math.floor(math.log10(x)) - digits + 1
    return math.ceil(x / 10**e) * 10**e


def probe(c: DerivedConstants, xi: float, lam: float, step_fraction: float = 0.05,
          horizon: float = 2.0, h: float = 1e-3, ts: float = 1e-2) -> OperatingPoint:
    """Open-loop motor current step from the trimmed point at load ``xi``."""
    d0 = lam * c.c20 * xi / c.c19
    x, u0 = equilibrium(c, xi, d0)
    du = step_fraction * u0

    def stoich(s):
        return c.c19 * (s[3] - s[0] - s[1] - c.c2) / (c.c20 * xi)

    m = int(round(ts / h))
    lam_hist = [stoich(x)]
    for _ in range(int(round(horizon / ts))):
        x = integrate(plant_dynamics, x, h, m, u0 + du, xi, c)
        lam_hist.append(stoich(x))
    lam_hist = np.asarray(lam_hist)
    rate = np.diff(lam_hist) / ts
    return OperatingPoint(xi, lam, u0, float(rate.max() / du), float((lam_hist[-1] - lam_hist[0]) / du))


def tune(c: DerivedConstants, profile: CurrentProfile, reference: ReferenceSpec,
         ts: float = 0.01, window_samples: int = 30, settle_time: float = 3.0,
         band: float = 0.02) -> TuningReport:
    currents = sorted({i for _, i in profile.breakpoints})
    points = [probe(c, xi, desired_stoichiometry(xi, reference), ts=ts) for xi in currents]
    alpha = _round_up(max(p.input_gain for p in points))

    # Just after a load step the pressures have not moved yet, so the ratio
    # scales by the inverse current ratio.
    jump = 0.0
    bp = profile.breakpoints
    for (_, a), (_, b) in zip(bp, bp[1:]):
        lam_a = desired_stoichiometry(a, reference)
        lam_b = desired_stoichiometry(b, reference)
        jump = max(jump, abs(lam_a * a / b - lam_b) / lam_b)
    kp = math.log(max(jump, 2 * band) / band) / settle_time
    return TuningReport(points, alpha, round(kp, 2), window_samples * ts, ts, jump)
