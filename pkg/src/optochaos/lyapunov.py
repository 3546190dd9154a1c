"""Largest Lyapunov exponents of the flow and of 1-D maps."""

from __future__ import annotations

import math
import warnings
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .errors import DivergenceError, PreconditionError
from .model import CHUNK_STEPS, _as_state, _pvec
from .params import State, SystemParams

DERIVATIVE_EPS = 1e-300


class LyapunovResult(NamedTuple):
    exponent: float
    times: np.ndarray
    trace: np.ndarray

    def is_converged(self, rel_tol: float = 0.1, abs_tol: float = 0.0) -> bool:
        """True when the running estimate over the last half of the run
        stays within ``rel_tol * |final| + abs_tol`` of the final value."""
        tail = self.trace[len(self.trace) // 2:]
        if len(tail) == 0:
            return False
        return bool(np.max(np.abs(tail - self.exponent)) <= rel_tol * abs(self.exponent) + abs_tol)


def lyapunov_benettin(
    p: SystemParams,
    s0: State | None = None,
    t_total: float | None = None,
    renorm: float | None = None,
    seed: int = 0,
) -> LyapunovResult:
    """Largest Lyapunov exponent (1/s) by tangent-vector renormalization.

    The flow and its linearization are advanced together with RK4; after
    ``p.t_transient`` the tangent vector is renormalized every ``renorm``
    seconds and the log stretch factors are averaged.  ``trace`` holds the
    running estimate after each renormalization.
    """
    s0 = _as_state(s0)
    t_total = p.t_record if t_total is None else float(t_total)
    renorm = 2 * math.pi / p.omega_m if renorm is None else float(renorm)
    every = max(1, int(round(renorm / p.dt)))
    n_steps = int(round(t_total / p.dt))
    n_logs = n_steps // every
    if n_logs < 10:
        raise PreconditionError("t_total must span at least 10 renormalization intervals")

    state = np.array(s0.as_tuple(), dtype=float)
    pv = _pvec(p)
    rng = np.random.default_rng(seed) if p.noise_sigma > 0 else None
    scale = p.noise_sigma * math.sqrt(p.dt)
    empty = np.empty(0)

    n_tr = int(round(p.t_transient / p.dt))
    sink = np.empty((0, 3))
    step = 0
    while step < n_tr:
        m = min(CHUNK_STEPS, n_tr - step)
        noise = rng.standard_normal(m) if rng is not None else empty
        _, bad = _kernels.rk4_chunk(state, pv, m, p.dt, empty, empty, noise, scale, step, n_tr + 1, 1, sink, 0)
        if bad >= 0:
            raise DivergenceError((step + bad + 1) * p.dt)
        step += m

    w = np.full(4, 0.5)
    logs = np.empty(n_logs + 1)
    written = 0
    step = 0
    total = n_logs * every
    while step < total:
        m = min(CHUNK_STEPS, total - step)
        noise = rng.standard_normal(m) if rng is not None else empty
        k, bad = _kernels.tangent_chunk(state, w, pv, m, p.dt, noise, scale, every, step, logs[written:])
        if bad >= 0:
            raise DivergenceError(p.t_transient + (step + bad + 1) * p.dt)
        written += k
        step += m

    logs = logs[:written]
    times = np.arange(1, written + 1) * every * p.dt
    trace = np.cumsum(logs) / times
    return LyapunovResult(float(trace[-1]), times, trace)


def map_lyapunov(
    f: Callable[[float], float],
    x0: float,
    n: int,
    derivative: Callable | None = None,
    burn_in: int = 1000,
    h: float = 1e-7,
) -> float:
    """Lyapunov exponent (nats/iteration) of a 1-D map: the mean of
    ``ln |f'(x_k)|`` along ``n`` iterates after ``burn_in``.

    ``derivative`` defaults to a central difference with step ``h``.  Exact
    zeros of the derivative are clamped to ``1e-300`` and reported with a
    ``RuntimeWarning``.
    """
    if n < 10_000:
        raise PreconditionError(f"n must be >= 1e4, got {n}")
    x = float(x0)
    for _ in range(burn_in):
        x = f(x)
    orbit = np.empty(n)
    for k in range(n):
        orbit[k] = x
        x = f(x)
    if derivative is None:
        d = np.array([(f(y + h) - f(y - h)) / (2 * h) for y in orbit])
    else:
        d = np.asarray(derivative(orbit), dtype=float)
        if d.shape != orbit.shape:
            d = np.array([derivative(y) for y in orbit], dtype=float)
    d = np.abs(d)
    zeros = int(np.count_nonzero(d == 0))
    if zeros:
        warnings.warn(f"map derivative vanished at {zeros} iterates; clamped to {DERIVATIVE_EPS}",
                      RuntimeWarning, stacklevel=2)
        d[d == 0] = DERIVATIVE_EPS
    return float(np.mean(np.log(d)))


def logistic_map(r: float):
    """``(f, f')`` for the logistic map with parameter ``r``."""
    return (lambda x: r * x * (1.0 - x)), (lambda x: r * (1.0 - 2.0 * np.asarray(x)))
