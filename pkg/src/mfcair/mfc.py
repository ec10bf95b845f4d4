"""Model-free control: windowed estimate of the lumped term and the iP law.

The output is assumed to follow the ultra-local model ``dy/dt = F + alpha*u``
where ``F`` gathers everything the controller does not model. ``F`` is
re-estimated every sample from the last ``tau`` seconds of (y, u) data and
cancelled by the intelligent proportional law.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np


class EstimatorWindowError(ValueError):
    """The sample window is too short or does not span ``tau``."""


@dataclass(frozen=True)
class ControllerConfig:
    alpha: float  # output units / (s A)
    kp: float  # 1/s
    tau: float  # s
    ts: float  # s
    u_min: float = -math.inf
    u_max: float = math.inf
    u_warmup: float | None = 0.0  # None: let the simulator pick the trim current
    strict: bool = False

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha == 0:
            raise ValueError("alpha must be finite and nonzero")
        if not self.kp > 0:
            raise ValueError("kp must be > 0 for the closed-loop error to converge")
        if not self.ts > 0:
            raise ValueError("ts must be > 0")
        if not self.tau >= 2 * self.ts * (1 - 1e-9):
            raise ValueError("tau must cover at least two sample periods")
        n = self.tau / self.ts
        if abs(n - round(n)) > 1e-6 * n:
            raise ValueError("tau must be an integer multiple of ts")
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be < u_max")

    @property
    def window_samples(self) -> int:
        """Number of samples spanning exactly ``tau`` (both ends included)."""
        return int(round(self.tau / self.ts)) + 1


def estimator_weights(n_samples: int, tau: float, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoidal weights ``(w_y, w_u)`` with ``F_est = w_y @ y + w_u @ u``.

    Samples are ordered oldest first; sample ``j`` sits at ``sigma = j*tau/(n-1)``
    measured from the window start.
    """
    if n_samples < 3:
        raise EstimatorWindowError(f"need at least 3 samples, got {n_samples}")
    sigma = np.linspace(0.0, tau, n_samples)
    trap = np.full(n_samples, tau / (n_samples - 1))
    trap[0] *= 0.5
    trap[-1] *= 0.5
    scale = -6.0 / tau**3
    w_y = scale * trap * (tau - 2.0 * sigma)
    w_u = scale * trap * alpha * sigma * (tau - sigma)
    return w_y, w_u


def estimate_f(y, u, alpha: float, tau: float, t=None, rtol: float = 1e-6) -> float:
    """Estimate ``F`` from uniformly spaced samples of ``y`` and ``u`` over ``[t - tau, t]``.

    Composite trapezoidal rule applied to
    ``-(6/tau**3) * integral_0^tau [(tau - 2s) y + alpha s (tau - s) u] ds``.
    If timestamps ``t`` are given they must span ``tau`` with uniform spacing.
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if y.shape != u.shape or y.ndim != 1:
        raise EstimatorWindowError("y and u must be 1-D windows of equal length")
    if y.size < 3:
        raise EstimatorWindowError(f"need at least 3 samples, got {y.size}")
    if t is not None:
        t = np.asarray(t, dtype=float)
        if t.shape != y.shape:
            raise EstimatorWindowError("timestamps must match the window length")
        step = tau / (y.size - 1)
        if (abs((t[-1] - t[0]) - tau) > rtol * tau
                or np.max(np.abs(np.diff(t) - step)) > rtol * tau):
            raise EstimatorWindowError(
                f"window spans {t[-1] - t[0]!r} s with non-uniform or wrong spacing, expected {tau!r} s")
    w_y, w_u = estimator_weights(y.size, tau, alpha)
    return float(w_y @ y + w_u @ u)


def ip_control(f_est: float, yref_dot: float, e: float, cfg: ControllerConfig) -> tuple[float, float]:
    """Intelligent proportional law. Returns ``(u_saturated, u_raw)``."""
    u_raw = -(f_est - yref_dot + cfg.kp * e) / cfg.alpha
    return min(max(u_raw, cfg.u_min), cfg.u_max), u_raw


@dataclass
class StepResult:
    u: float
    u_raw: float
    f_est: float | None  # None while warming up
    warming_up: bool


class IntelligentP:
    """Discrete iP controller holding the sliding estimation window.

    Call :meth:`step` once per sample period. The window stores the measured
    output together with the input that was actually applied up to that
    sample (after saturation).
    """

    def __init__(self, cfg: ControllerConfig):
        self.cfg = cfg
        n = cfg.window_samples
        self._t = deque(maxlen=n)
        self._y = deque(maxlen=n)
        self._u = deque(maxlen=n)
        self._w_y, self._w_u = estimator_weights(n, cfg.tau, cfg.alpha)
        self.u = cfg.u_warmup if cfg.u_warmup is not None else 0.0
        self.f_est = None

    @property
    def ready(self) -> bool:
        return len(self._y) == self._y.maxlen

    def _push(self, t, y):
        if self._t:
            dt = t - self._t[-1]
            if abs(dt - self.cfg.ts) > 1e-6 * self.cfg.ts:
                if self.cfg.strict:
                    raise EstimatorWindowError(f"sample spacing {dt!r} s, expected {self.cfg.ts!r} s")
                # irregular sample: the old window no longer spans tau
                self._t.clear()
                self._y.clear()
                self._u.clear()
        self._t.append(t)
        self._y.append(y)
        self._u.append(self.u)

    def step(self, t: float, y: float, y_ref: float, yref_dot: float = 0.0) -> StepResult:
        self._push(t, y)
        if not self.ready:
            return StepResult(self.u, self.u, None, True)
        f_est = float(self._w_y @ np.fromiter(self._y, float, len(self._y))
                      + self._w_u @ np.fromiter(self._u, float, len(self._u)))
        u, u_raw = ip_control(f_est, yref_dot, y - y_ref, self.cfg)
        self.u = u
        self.f_est = f_est
        return StepResult(u, u_raw, f_est, False)
