"""Adaptive explicit Runge-Kutta engine with dense output.

Uses the Dormand-Prince 8(5,3) tableau (12 stages, order 8, combined
5th/3rd-order error estimator, 7th-order continuous extension). The
coefficients are taken from scipy; the stepping loop, PI step-size control
and failure handling live here so that callers (billiard event loops,
period detection) can consume accepted steps one at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import (
    ChartDomainError,
    QuadratureError,
    RegionError,
    SingularityError,
    StepSizeUnderflow,
)

_NS = _dop.N_STAGES
_A = _dop.A[:_NS, :_NS]
_B = _dop.B
_C = _dop.C[:_NS]
_E3 = _dop.E3
_E5 = _dop.E5
_D = _dop.D
_A_EXTRA = _dop.A[_NS + 1 :]
_C_EXTRA = _dop.C[_NS + 1 :]

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
# PI controller exponents for an order-8 method (error estimator order 7)
BETA = 0.04
ALPHA = 1.0 / 8.0 - 0.75 * BETA
MIN_STEP = 1e-14

# evaluation failures that shrink the step instead of aborting at once
RECOVERABLE = (SingularityError, ChartDomainError, RegionError, QuadratureError)


@dataclass(frozen=True, eq=False)
class DenseSegment:
    """Continuous extension of one accepted step."""

    t0: float
    t1: float
    y0: np.ndarray
    F: np.ndarray
    # end of the valid part when the step was cut short by an event
    t_stop: float | None = None

    @property
    def y1(self) -> np.ndarray:
        return self.y0 + self.F[0]

    @property
    def t_end(self) -> float:
        return self.t1 if self.t_stop is None else self.t_stop

    def __call__(self, t):
        """Interpolated state at scalar ``t`` (shape (n,)) or array ``t`` (shape (m, n))."""
        t = np.asarray(t, dtype=float)
        x = (t - self.t0) / (self.t1 - self.t0)
        if t.ndim == 0:
            y = np.zeros_like(self.y0)
        else:
            x = x[:, None]
            y = np.zeros((len(x), len(self.y0)))
        for i, f in enumerate(self.F[::-1]):
            y = y + f
            y = y * (x if i % 2 == 0 else 1 - x)
        return y + self.y0


@dataclass
class StepperStats:
    n_steps: int = 0
    n_rejected: int = 0
    n_fev: int = 0


def _error_norm(K, h, scale):
    err5 = (_E5 @ K) / scale
    err3 = (_E3 @ K) / scale
    e5 = float(err5 @ err5)
    e3 = float(err3 @ err3)
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * len(scale))


def _initial_step(fun, t0, y0, f0, direction, tol):
    scale = tol + np.abs(y0) * tol
    d0 = np.linalg.norm(y0 / scale) / math.sqrt(len(y0))
    d1 = np.linalg.norm(f0 / scale) / math.sqrt(len(y0))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = fun(t0 + h0 * direction, y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(len(y0)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1)


def dop853_steps(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    tol: float,
    *,
    max_step: float = math.inf,
    first_step: float | None = None,
    stats: StepperStats | None = None,
) -> Iterator[DenseSegment]:
    """Yield dense segments of accepted steps from ``t0`` to ``t_end``.

    Local error is controlled with ``atol = rtol = tol``. Raises
    :class:`StepSizeUnderflow` when the step would drop below ``1e-14``;
    evaluation errors inside a step first shrink the step and are re-raised
    only if shrinking cannot avoid them.
    """
    stats = stats if stats is not None else StepperStats()
    y = np.array(y0, dtype=float)
    t = float(t0)
    direction = 1.0 if t_end >= t0 else -1.0
    if t == t_end:
        return
    f = np.asarray(fun(t, y), dtype=float)
    stats.n_fev += 1
    n = len(y)
    K = np.empty((_dop.N_STAGES_EXTENDED, n))
    if first_step is None:
        h_abs = _initial_step(fun, t, y, f, direction, tol)
        stats.n_fev += 1
    else:
        h_abs = float(first_step)
    h_abs = min(h_abs, max_step, abs(t_end - t))
    err_prev = 1e-4
    last_exc: Exception | None = None

    while direction * (t_end - t) > 0:
        if h_abs < MIN_STEP:
            if last_exc is not None:
                raise last_exc
            raise StepSizeUnderflow(f"step size underflow at t={t!r}")
        h = h_abs * direction
        t_new = t + h
        if direction * (t_new - t_end) > 0 or abs(t_end - t_new) < 1e-12 * abs(h):
            t_new = t_end
            h = t_new - t
            h_abs = abs(h)

        try:
            K[0] = f
            for s in range(1, _NS):
                dy = (_A[s, :s] @ K[:s]) * h
                K[s] = fun(t + _C[s] * h, y + dy)
            y_new = y + h * (_B @ K[:_NS])
            f_new = np.asarray(fun(t_new, y_new), dtype=float)
            K[_NS] = f_new
            stats.n_fev += _NS
            if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
                raise SingularityError("non-finite state during step")
        except RECOVERABLE as exc:
            last_exc = exc
            stats.n_rejected += 1
            h_abs *= 0.25
            continue

        scale = tol + np.maximum(np.abs(y), np.abs(y_new)) * tol
        err = _error_norm(K[: _NS + 1], h, scale)
        if err <= 1.0:
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * err ** (-ALPHA) * err_prev**BETA)
            if last_exc is not None and isinstance(last_exc, RECOVERABLE):
                factor = min(factor, 1.0)
            last_exc = None
            err_prev = max(err, 1e-4)

            # continuous extension needs three extra stages
            try:
                for s, (a, c) in enumerate(zip(_A_EXTRA, _C_EXTRA), start=_NS + 1):
                    dy = (a[:s] @ K[:s]) * h
                    K[s] = fun(t + c * h, y + dy)
                stats.n_fev += len(_C_EXTRA)
            except RECOVERABLE as exc:
                last_exc = exc
                stats.n_rejected += 1
                h_abs *= 0.5
                continue
            dy_step = y_new - y
            F = np.empty((_dop.INTERPOLATOR_POWER, n))
            F[0] = dy_step
            F[1] = h * f - dy_step
            F[2] = 2 * dy_step - h * (f_new + f)
            F[3:] = h * (_D @ K)
            seg = DenseSegment(t, t_new, y.copy(), F)
            stats.n_steps += 1
            t, y, f = t_new, y_new, f_new
            h_abs = min(h_abs * factor, max_step)
            yield seg
        else:
            stats.n_rejected += 1
            h_abs *= max(MIN_FACTOR, SAFETY * err ** (-ALPHA))
