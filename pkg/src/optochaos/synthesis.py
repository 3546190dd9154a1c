"""Ground-truth intermittent signals built by square-wave gating.

A gate ``s(t)`` with period ``Ts`` is 1 for a centred interval of length
``T0 = D * Ts`` in every period.  The gated series is

    x_I = x_C * s + x_P * (1 - s)

so that ``D`` is the fraction of time spent in the chaotic source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import PreconditionError


@dataclass(frozen=True)
class TimeSeries:
    """Scalar series sampled at ``fs`` starting at ``t0``."""

    values: np.ndarray
    fs: float
    t0: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(vals)):
            raise PreconditionError("time series contains non-finite samples")
        if not self.fs > 0:
            raise PreconditionError(f"fs must be > 0, got {self.fs!r}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.fs

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    def standardized(self) -> TimeSeries:
        """Zero mean, unit variance (a constant series is only centred)."""
        sd = self.values.std()
        vals = self.values - self.values.mean()
        if sd > 0:
            vals = vals / sd
        return TimeSeries(vals, self.fs, self.t0)


@dataclass(frozen=True)
class GatingSpec:
    """Square-wave gate: period ``Ts`` (s), duty cycle ``D``, phase offset (s)."""

    Ts: float
    D: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.Ts > 0:
            raise PreconditionError(f"Ts must be > 0, got {self.Ts!r}")
        if not 0.0 <= self.D <= 1.0:
            raise PreconditionError(f"duty cycle must lie in [0, 1], got {self.D!r}")

    @property
    def T0(self) -> float:
        return self.D * self.Ts


@dataclass(frozen=True)
class SourcePair:
    periodic: TimeSeries
    chaotic: TimeSeries

    def __post_init__(self):
        if self.periodic.fs != self.chaotic.fs:
            raise PreconditionError(
                f"sources must share fs (periodic {self.periodic.fs!r}, chaotic {self.chaotic.fs!r})"
            )

    @property
    def fs(self) -> float:
        return self.periodic.fs

    def standardized(self) -> SourcePair:
        return SourcePair(self.periodic.standardized(), self.chaotic.standardized())


@dataclass(frozen=True)
class IntermittentSeries:
    """Gated series plus its per-sample ground-truth labels (1 = chaotic)."""

    series: TimeSeries
    labels: np.ndarray
    spec: GatingSpec

    @property
    def chaotic_fraction(self) -> float:
        return float(self.labels.mean()) if len(self.labels) else 0.0


def square_wave(t, spec: GatingSpec) -> np.ndarray:
    """Gate value (0 or 1) at times ``t``.

    Within each period the gate is 1 on ``[-T0/2, T0/2)`` around
    ``phase + k * Ts``; the half-open interval makes the mean over a
    uniformly sampled period exactly ``D`` when the grid is symmetric.
    """
    t = np.asarray(t, dtype=float)
    if spec.D >= 1.0:
        return np.ones(t.shape, dtype=np.int8)
    if spec.D <= 0.0:
        return np.zeros(t.shape, dtype=np.int8)
    u = np.mod((t - spec.phase) / spec.Ts + 0.5, 1.0) - 0.5
    half = 0.5 * spec.D
    return ((u >= -half) & (u < half)).astype(np.int8)


def gate_fraction(spec: GatingSpec, t_start: float, t_end: float) -> float:
    """Exact time average of the gate over ``[t_start, t_end]``."""
    if t_end <= t_start:
        raise PreconditionError("need t_end > t_start")

    def on_time(t):
        # gated time accumulated on [phase - Ts/2, t]
        u = (t - spec.phase) / spec.Ts + 0.5
        k = np.floor(u)
        frac = u - k
        lo, hi = 0.5 - spec.D / 2, 0.5 + spec.D / 2
        return (k * spec.D + np.clip(frac, lo, hi) - lo) * spec.Ts

    return float((on_time(t_end) - on_time(t_start)) / (t_end - t_start))


def synthesize_intermittent(
    sources: SourcePair,
    spec: GatingSpec,
    duration: float,
    fs: float,
    seed: int | None = None,
) -> IntermittentSeries:
    """Mix two sources with the square-wave gate.

    Parameters
    ----------
    sources : SourcePair
        Periodic and chaotic sources; each must hold at least
        ``round(duration * fs)`` samples.  They are mixed as given, call
        :meth:`SourcePair.standardized` first for equal-RMS mixing.
    spec : GatingSpec
    duration, fs : float
    seed : int, optional
        When given, the gate phase is drawn uniformly from ``[0, Ts)``,
        replacing ``spec.phase``.
    """
    if fs != sources.fs:
        raise PreconditionError(f"fs {fs!r} does not match the sources' fs {sources.fs!r}")
    if duration < 3 * spec.Ts:
        raise PreconditionError(f"duration {duration!r} must be >= 3 * Ts = {3 * spec.Ts!r}")
    if fs * spec.Ts < 100:
        raise PreconditionError(f"fs * Ts = {fs * spec.Ts:.3g} must be >= 100")
    n = int(round(duration * fs))
    if len(sources.periodic) < n or len(sources.chaotic) < n:
        raise PreconditionError(f"sources need at least {n} samples")
    if seed is not None:
        rng = np.random.default_rng(seed)
        spec = GatingSpec(spec.Ts, spec.D, float(rng.uniform(0.0, spec.Ts)))

    t = np.arange(n) / fs
    s = square_wave(t, spec)
    xp = sources.periodic.values[:n]
    xc = sources.chaotic.values[:n]
    x = np.where(s == 1, xc, xp)
    return IntermittentSeries(TimeSeries(x, fs), s, spec)


def logistic_series(r: float, x0: float, n: int) -> np.ndarray:
    """Iterates ``x_{k+1} = r x_k (1 - x_k)`` starting from ``x0`` (``n`` samples)."""
    if not 0 < r <= 4:
        raise PreconditionError(f"r must be in (0, 4], got {r!r}")
    if not 0 < x0 < 1:
        raise PreconditionError(f"x0 must be in (0, 1), got {x0!r}")
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n!r}")
    out = np.empty(int(n))
    _kernels.logistic_orbit(float(r), float(x0), out)
    return out


def harmonic_series(f0: float, n_harmonics: int, weights, fs: float, duration: float) -> np.ndarray:
    """Weighted sum of sines at ``f0, 2 f0, ...``.

    When ``fs / f0`` is an integer the phase is computed from the sample
    index modulo the period, so every period is bit-identical.
    """
    weights = np.asarray(weights, dtype=float).ravel()
    if len(weights) != n_harmonics:
        raise PreconditionError(f"got {len(weights)} weights for {n_harmonics} harmonics")
    if f0 * n_harmonics >= fs / 2:
        raise PreconditionError(f"highest harmonic {f0 * n_harmonics!r} Hz aliases at fs = {fs!r}")
    n = int(round(duration * fs))
    idx = np.arange(n)
    ratio = fs / f0
    if float(ratio).is_integer():
        period = int(ratio)
        phase = 2 * np.pi * (idx % period) / period
    else:
        phase = 2 * np.pi * f0 * idx / fs
    out = np.zeros(n)
    for k, w in enumerate(weights, start=1):
        if w != 0:
            out += w * np.sin(k * phase)
    return out


def standard_sources(n: int, fs: float, f0: float, weights=(1.0, 0.5), logistic_x0: float = 0.3,
                     seed: int = 0) -> SourcePair:
    """Standardized fixture sources: harmonic comb at ``f0`` and a logistic (r = 4) series.

    The logistic start point is jittered by ``seed`` so different seeds give
    independent chaotic realizations.
    """
    rng = np.random.default_rng(seed)
    x0 = float(np.clip(logistic_x0 + 0.1 * rng.uniform(-1, 1), 0.01, 0.99))
    periodic = harmonic_series(f0, len(weights), weights, fs, n / fs)
    chaotic = logistic_series(4.0, x0, n)
    return SourcePair(TimeSeries(periodic, fs), TimeSeries(chaotic, fs)).standardized()


def fixture(D: float, Ts: float, duration: float, fs: float, f0: float, seed: int = 0,
            noise: float = 0.0) -> IntermittentSeries:
    """Standard intermittent fixture with duty cycle ``D``.

    ``noise`` adds seeded white measurement noise of that standard deviation.
    """
    n = int(round(duration * fs))
    sources = standard_sources(n, fs, f0, seed=seed)
    out = synthesize_intermittent(sources, GatingSpec(Ts, D), duration, fs, seed=seed)
    if noise > 0:
        rng = np.random.default_rng([seed, 1])
        vals = out.series.values + noise * rng.standard_normal(n)
        out = IntermittentSeries(TimeSeries(vals, fs), out.labels, out.spec)
    return out
