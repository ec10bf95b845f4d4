"""Fixed-step closed-loop simulation and settling metrics.

The plant is integrated with classical RK4 at step ``h``; the controller runs
every ``ts = m*h`` seconds and its output is held in between. One trace row
is recorded per controller tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mfc import ControllerConfig, IntelligentP
from .params import DerivedConstants
from .plant import (
    GaussianSource,
    NoiseConfig,
    PlantDomainError,
    PlantState,
    equilibrium,
    measure,
    plant_dynamics,
)
from .scenario import (
    CurrentProfile,
    ReferenceSpec,
    compute_stoichiometry,
    current_at,
    desired_stoichiometry,
)

TRACE_COLUMNS = ("t", "xi", "u_applied", "u_raw", "lambda", "lambda_ref", "e", "f_est",
                 "y1", "y2", "x1", "x2", "x3", "x4")

DEFAULT_BAND = 0.02


class RunAborted(RuntimeError):
    """A closed-loop run stopped early; carries the partial trace."""

    def __init__(self, message, t, trace):
        super().__init__(f"{message} (at t = {t:.6g} s)")
        self.t = t
        self.trace = trace


def rk4_step(f, x, h, *args):
    """One classical Runge-Kutta step of ``dx/dt = f(x, *args)`` with ``args`` held."""
    if not isinstance(x, (tuple, list, np.ndarray)):
        # scalars of any numeric type, e.g. extended-precision floats
        k1 = f(x, *args)
        k2 = f(x + 0.5 * h * k1, *args)
        k3 = f(x + 0.5 * h * k2, *args)
        k4 = f(x + h * k3, *args)
        return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if isinstance(x, np.ndarray):
        k1 = np.asarray(f(x, *args))
        k2 = np.asarray(f(x + 0.5 * h * k1, *args))
        k3 = np.asarray(f(x + 0.5 * h * k2, *args))
        k4 = np.asarray(f(x + h * k3, *args))
        return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    # tuples (incl. PlantState): plain float arithmetic is much cheaper than numpy at n=4
    hh = 0.5 * h
    k1 = f(x, *args)
    k2 = f(tuple(a + hh * b for a, b in zip(x, k1)), *args)
    k3 = f(tuple(a + hh * b for a, b in zip(x, k2)), *args)
    k4 = f(tuple(a + h * b for a, b in zip(x, k3)), *args)
    h6 = h / 6.0
    out = [a + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)]
    return x._make(out) if hasattr(x, "_make") else tuple(out)


def integrate(f, x, h, n_steps, *args, h_floor=None):
    """Advance ``n_steps`` RK4 steps; with ``h_floor`` set, domain errors trigger step halving."""
    for _ in range(n_steps):
        x = _guarded_step(f, x, h, args, h_floor)
    return x


def _guarded_step(f, x, h, args, h_floor):
    try:
        return rk4_step(f, x, h, *args)
    except PlantDomainError:
        if h_floor is None or h / 2 < h_floor:
            raise
    half = h / 2
    x = _guarded_step(f, x, half, args, h_floor)
    return _guarded_step(f, x, half, args, h_floor)


@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-3  # s
    ts: float = 1e-2  # s
    duration: float | None = None  # s; None: the profile duration
    initial_state: PlantState | None = None  # None: equilibrium at the initial setpoint
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    strict: bool = False
    band: float = DEFAULT_BAND
    trim_tol: float = 1e-6  # max |dx/dt| / |x| per second ending the trim
    trim_max: float = 60.0  # s
    min_step_fraction: float = 1.0 / 64  # lenient mode step-halving floor, relative to h

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be > 0")
        m = self.ts / self.h
        if self.ts < self.h or abs(m - round(m)) > 1e-9 * m:
            raise ValueError("ts must be an integer multiple of h")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be > 0")
        if not 0 < self.band < 1:
            raise ValueError("band must lie in (0, 1)")

    @property
    def substeps(self) -> int:
        return int(round(self.ts / self.h))


@dataclass
class Trace:
    """Columnar record of one run, one row per controller tick."""

    columns: dict

    @classmethod
    def empty(cls):
        return cls({name: [] for name in TRACE_COLUMNS})

    def append(self, **row):
        for name in TRACE_COLUMNS:
            self.columns[name].append(row[name])

    def frozen(self) -> "Trace":
        return Trace({name: np.asarray(v, dtype=float) for name, v in self.columns.items()})

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return len(self.columns["t"])

    def rows(self):
        cols = [self.columns[name] for name in TRACE_COLUMNS]
        return zip(*cols)


@dataclass
class RunMetrics:
    restoration: list  # (step time s, duration s or None when unsettled)
    max_abs_error: float
    integral_abs_error: float
    lambda_min: float
    band: float

    @property
    def starvation(self) -> bool:
        return self.lambda_min <= 1.0

    @property
    def all_settled(self) -> bool:
        return all(d is not None for _, d in self.restoration)

    @property
    def max_restoration(self) -> float | None:
        durations = [d for _, d in self.restoration]
        if not durations or any(d is None for d in durations):
            return None
        return max(durations)


def trim(c: DerivedConstants, xi: float, u: float, x0: PlantState, h: float,
         tol: float = 1e-6, max_time: float = 60.0) -> PlantState:
    """Integrate under constant inputs until the relative state rates drop below ``tol``."""
    x = x0
    chunk = max(1, int(round(0.1 / h)))
    t = 0.0
    while True:
        dx = plant_dynamics(x, u, xi, c)
        if max(abs(d) / max(abs(v), 1.0) for d, v in zip(dx, x)) < tol:
            return x
        if t >= max_time:
            raise RuntimeError(f"trim did not settle within {max_time} s")
        x = integrate(plant_dynamics, x, h, chunk, u, xi, c)
        t += chunk * h


def run_closed_loop(c: DerivedConstants, profile: CurrentProfile, reference: ReferenceSpec,
                    ctrl: ControllerConfig, sim: SimConfig) -> tuple[Trace, RunMetrics]:
    """Simulate the iP loop on the air-feed plant and compute the run metrics.

    At every tick: measure, form the stoichiometry and its setpoint, step the
    controller, record, then integrate the plant over one sample period with
    the new current held. Raises :class:`RunAborted` with the partial trace
    when the plant leaves its domain.
    """
    if abs(ctrl.ts - sim.ts) > 1e-12:
        raise ValueError("controller and simulator sample periods differ")
    duration = profile.duration if sim.duration is None else sim.duration
    if duration > profile.duration + 1e-12:
        raise ValueError("simulation outlasts the current profile")
    if duration < ctrl.tau:
        raise ValueError("duration shorter than the estimation window")

    xi0 = current_at(profile, 0.0)
    lam0 = desired_stoichiometry(xi0, reference)
    x_eq, u_eq = equilibrium(c, xi0, lam0 * c.c20 * xi0 / c.c19)
    if ctrl.u_warmup is None:
        ctrl = replace(ctrl, u_warmup=min(max(u_eq, ctrl.u_min), ctrl.u_max))
    x = sim.initial_state if sim.initial_state is not None else x_eq
    x = PlantState(*x)
    x.validate(c)
    x = trim(c, xi0, ctrl.u_warmup, x, sim.h, sim.trim_tol, sim.trim_max)

    controller = IntelligentP(ctrl)
    rng = GaussianSource(sim.noise.seed)
    trace = Trace.empty()
    m = sim.substeps
    n_ticks = int(round(duration / sim.ts))
    h_floor = None if sim.strict else sim.h * sim.min_step_fraction
    t = 0.0
    for k in range(n_ticks + 1):
        t = k * sim.ts
        xi = current_at(profile, t)
        y1, y2 = measure(x, c, sim.noise, rng)
        lam = compute_stoichiometry(y1, y2, xi, c)
        lam_ref = desired_stoichiometry(xi, reference)
        step = controller.step(t, lam, lam_ref, 0.0)
        trace.append(t=t, xi=xi, u_applied=step.u, u_raw=step.u_raw, **{"lambda": lam},
                     lambda_ref=lam_ref, e=lam - lam_ref,
                     f_est=0.0 if step.f_est is None else step.f_est,
                     y1=y1, y2=y2, x1=x.x1, x2=x.x2, x3=x.x3, x4=x.x4)
        if k == n_ticks:
            break
        try:
            for j in range(m):
                xi_sub = current_at(profile, t + j * sim.h)
                x = _guarded_step(plant_dynamics, x, sim.h, (step.u, xi_sub, c), h_floor)
            if not all(math.isfinite(v) for v in x):
                raise PlantDomainError("non-finite state", x)
        except PlantDomainError as exc:
            raise RunAborted(str(exc), t, trace.frozen()) from exc

    trace = trace.frozen()
    return trace, compute_metrics(trace, sim.band)


def run_surrogate_loop(disturbance, plant_gain: float, ctrl: ControllerConfig, duration: float,
                       h: float, y0: float = 0.0, y_ref=lambda t: 0.0, yref_dot=lambda t: 0.0) -> dict:
    """Close the iP loop around the scalar plant ``dy/dt = disturbance(t) + plant_gain*u``.

    Used to check the controller against a plant whose lumped term is known
    exactly. Returns arrays sampled at every controller tick.
    """
    m = int(round(ctrl.ts / h))
    if abs(m * h - ctrl.ts) > 1e-12 * ctrl.ts:
        raise ValueError("ts must be an integer multiple of h")
    controller = IntelligentP(ctrl)
    n_ticks = int(round(duration / ctrl.ts))

    def rhs(y, t, u):
        return disturbance(t) + plant_gain * u

    rec = {k: [] for k in ("t", "y", "y_ref", "e", "u", "f", "f_est", "ready")}
    y = y0
    for k in range(n_ticks + 1):
        t = k * ctrl.ts
        r = y_ref(t)
        step = controller.step(t, y, r, yref_dot(t))
        rec["t"].append(t)
        rec["y"].append(y)
        rec["y_ref"].append(r)
        rec["e"].append(y - r)
        rec["u"].append(step.u)
        rec["f"].append(disturbance(t))
        rec["f_est"].append(math.nan if step.f_est is None else step.f_est)
        rec["ready"].append(not step.warming_up)
        for j in range(m):
            tj = t + j * h
            # time enters through the state so the generic RK4 sees an autonomous system
            y, _ = rk4_step(lambda s, u: (rhs(s[0], s[1], u), 1.0), (y, tj), h, step.u)
    return {k: np.asarray(v) for k, v in rec.items()}


def step_indices(trace: Trace) -> list[int]:
    """Row indices at which the stack current changes."""
    xi = np.asarray(trace["xi"])
    return [int(i) + 1 for i in np.flatnonzero(np.diff(xi) != 0)]


def restoration_times(trace: Trace, band: float = DEFAULT_BAND) -> list:
    """Settling time after each current step.

    For each step, the time from the step until the stoichiometry enters
    ``lambda_ref * (1 +/- band)`` and stays there up to the next step. The
    duration is ``None`` if the last sample of the interval is still outside.
    """
    t = np.asarray(trace["t"])
    lam = np.asarray(trace["lambda"])
    ref = np.asarray(trace["lambda_ref"])
    outside = np.abs(lam - ref) > band * np.abs(ref)
    starts = step_indices(trace)
    ends = starts[1:] + [len(t)]
    result = []
    for i0, i1 in zip(starts, ends):
        out = np.flatnonzero(outside[i0:i1])
        if out.size == 0:
            result.append((float(t[i0]), 0.0))
        elif out[-1] == i1 - i0 - 1:
            result.append((float(t[i0]), None))
        else:
            result.append((float(t[i0]), float(t[i0 + out[-1] + 1] - t[i0])))
    return result


def compute_metrics(trace: Trace, band: float = DEFAULT_BAND) -> RunMetrics:
    """Metrics from the trace columns only, so they can be recomputed from a CSV."""
    t = np.asarray(trace["t"])
    e = np.abs(np.asarray(trace["e"]))
    integral = float(np.sum(0.5 * (e[1:] + e[:-1]) * np.diff(t))) if len(t) > 1 else 0.0
    return RunMetrics(
        restoration=restoration_times(trace, band),
        max_abs_error=float(e.max()),
        integral_abs_error=integral,
        lambda_min=float(np.min(trace["lambda"])),
        band=band,
    )
