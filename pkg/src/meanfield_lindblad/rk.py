"""Adaptive Dormand-Prince 5(4) integrator with PI step control.

Works on flat numpy arrays (real or complex).  Accepted steps are kept so the
solution can be sampled anywhere in the span by cubic Hermite interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StepFailure

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_ORDER = 5
_ALPHA = 0.7 / _ORDER
_BETA = 0.4 / _ORDER
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


@dataclass
class DenseSolution:
    """Accepted steps of an integration; callable on scalar or array times."""

    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    n_rhs: int = 0
    n_rejected: int = 0

    def __call__(self, times):
        times = np.asarray(times, dtype=float)
        scalar = times.ndim == 0
        times = np.atleast_1d(times)
        lo, hi = self.t[0], self.t[-1]
        span = max(abs(hi - lo), 1.0)
        if np.any(times < lo - 1e-12 * span) or np.any(times > hi + 1e-12 * span):
            raise ValueError(f"requested times outside integrated span [{lo}, {hi}]")
        idx = np.clip(np.searchsorted(self.t, times, side="right") - 1, 0, len(self.t) - 2)
        out = np.empty((len(times),) + self.y.shape[1:], dtype=self.y.dtype)
        for n, (tq, i) in enumerate(zip(times, idx)):
            out[n] = _hermite(self.t[i], self.t[i + 1], self.y[i], self.y[i + 1],
                              self.f[i], self.f[i + 1], tq)
        return out[0] if scalar else out


def _hermite(t0, t1, y0, y1, f0, f1, tq):
    h = t1 - t0
    if h == 0.0:
        return y0.copy()
    s = (tq - t0) / h
    if s <= 0.0:
        return y0.copy()
    if s >= 1.0:
        return y1.copy()
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _error_norm(err, y0, y1, tol):
    scale = tol + tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((np.abs(err) / scale) ** 2)))


def solve(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t_span: tuple[float, float],
    y0,
    tol: float = 1e-10,
    h0: float | None = None,
    min_step: float = 1e-14,
    max_steps: int = 2_000_000,
    stops=None,
) -> DenseSolution:
    """Integrate ``y' = rhs(t, y)`` forward from ``t_span[0]`` to ``t_span[1]``.

    Absolute and relative tolerances are both ``tol``.  Raises
    :class:`StepFailure` when the step size underflows ``min_step`` (relative
    to the span) or the step budget runs out.  Steps are shortened to land
    exactly on every time in ``stops``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 < t0:
        raise ValueError("only forward integration is supported")
    y = np.array(y0, copy=True)
    if y.ndim != 1:
        y = y.ravel()
    f = np.asarray(rhs(t0, y))
    n_rhs = 1
    ts, ys, fs = [t0], [y.copy()], [f.copy()]
    if t1 == t0:
        return DenseSolution(np.array(ts), np.array(ys), np.array(fs), n_rhs, 0)

    span = t1 - t0
    h_min = min_step * max(span, 1.0)
    if h0 is None:
        d0 = np.sqrt(np.mean(np.abs(y) ** 2)) + 1e-300
        d1 = np.sqrt(np.mean(np.abs(f) ** 2)) + 1e-300
        h = 0.01 * max(d0, tol) / d1
        h = min(max(h, 1e-6 * span), 0.1 * span)
    else:
        h = float(h0)

    k = np.empty((7,) + y.shape, dtype=np.result_type(y, f, float))
    err_prev = 1e-4
    n_rej = 0
    t = t0
    steps = 0
    targets = [float(s) for s in np.unique(np.asarray([] if stops is None else stops, float))
               if t0 < s < t1] + [t1]
    ti = 0
    while t < t1:
        if steps >= max_steps:
            raise StepFailure(f"step budget exhausted at t={t}")
        last = False
        h_free = h
        target = targets[ti]
        if t + h >= target or target - (t + h) < 1e-12 * span:
            h = target - t
            last = True
        k[0] = f
        for s in range(1, 7):
            ys_ = y + h * sum(a * k[j] for j, a in enumerate(_A[s]) if a != 0.0)
            k[s] = rhs(t + _C[s] * h, ys_)
        n_rhs += 6
        y_new = y + h * np.tensordot(_B5[:6], k[:6], axes=1)
        err = h * np.tensordot(_E, k, axes=1)
        en = _error_norm(err, y, y_new, tol)
        if not np.isfinite(en):
            en = 1e10
        if en <= 1.0:
            t = target if last else t + h
            if last:
                ti += 1
            y = y_new
            f = k[6].copy()  # FSAL
            ts.append(t)
            ys.append(y.copy())
            fs.append(f)
            steps += 1
            en = max(en, 1e-10)
            fac = _SAFETY * en ** (-_ALPHA) * err_prev ** _BETA
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, fac))
            if last:
                # a step shortened to hit a stop says little about the next one
                h = max(h, min(h_free, _MAX_FACTOR * (t - ts[-2])))
            err_prev = en
        else:
            n_rej += 1
            h *= max(_MIN_FACTOR, _SAFETY * en ** (-1.0 / _ORDER))
        if h < h_min and t < t1:
            raise StepFailure(f"step size underflow (h={h:.3e}) at t={t}")
    return DenseSolution(np.array(ts), np.array(ys), np.array(fs), n_rhs, n_rej)


def solve_on_grid(rhs, t_grid, y0, tol=1e-10, **kwargs):
    """Integrate over the span of ``t_grid`` and sample at every grid time."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    sol = solve(rhs, (t_grid[0], t_grid[-1]), y0, tol=tol, stops=t_grid, **kwargs)
    # every grid time is an accepted step, so sampling is exact lookup
    idx = np.searchsorted(sol.t, t_grid)
    return sol, sol.y[idx]
