"""Windowed periodic/chaotic segmentation of scalar time series.

Each window gets three scale-free features (spectral flatness, the 0-1
test statistic K and a cycle-return error).  A weighted vote with
hysteresis labels the windows, runs are merged into epochs, and the
chaotic time fraction follows from the epoch durations.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator

from .errors import InsufficientDataError, PreconditionError
from .spectral import dominant_frequency

PERIODIC, CHAOTIC = 0, 1
LABEL_NAMES = {PERIODIC: "periodic", CHAOTIC: "chaotic"}


def zero_one_test(x, n_phases: int = 64, seed: int = 0, ncut: int | None = None) -> float:
    """Median K statistic of the 0-1 test for chaos.

    For each random frequency ``c`` in ``(pi/5, 4pi/5)`` the translation
    variables ``p + i q = cumsum(x_j exp(i j c))`` are built, the mean-square
    displacement ``M(n)`` is corrected by its oscillatory term and
    ``K_c = corr(n, D(n))`` for ``n = 1 .. ncut``.  ``K`` near 1 indicates
    chaos, near 0 regular dynamics.  Result is clipped to ``[0, 1]``.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = len(x)
    if n < 20:
        raise PreconditionError("0-1 test needs at least 20 samples")
    ncut = ncut or max(n // 10, 3)
    rng = np.random.default_rng(seed)
    c = rng.uniform(np.pi / 5, 4 * np.pi / 5, size=n_phases)

    j = np.arange(1, n + 1)
    z = np.cumsum(x[None, :] * np.exp(1j * c[:, None] * j[None, :]), axis=1)
    f = np.fft.fft(z, 2 * n, axis=1)
    cross = np.fft.ifft(f * np.conj(f), axis=1)[:, 1:ncut + 1].real
    sq = np.abs(z) ** 2
    csum = np.concatenate([np.zeros((n_phases, 1)), np.cumsum(sq, axis=1)], axis=1)
    lags = np.arange(1, ncut + 1)
    total = csum[:, -1:]
    tail = total - csum[:, lags]          # sum_{j >= lag} |z_j|^2
    head = csum[:, n - lags]              # sum_{j < n - lag} |z_j|^2
    msd = (tail + head - 2 * cross) / (n - lags)[None, :]

    mean = x.mean()
    osc = mean**2 * (1 - np.cos(lags[None, :] * c[:, None])) / (1 - np.cos(c[:, None]))
    d = msd - osc
    lc = lags - lags.mean()
    dc = d - d.mean(axis=1, keepdims=True)
    denom = np.sqrt(np.sum(lc**2) * np.sum(dc**2, axis=1))
    kc = np.where(denom > 0, dc @ lc / np.where(denom > 0, denom, 1.0), 0.0)
    return float(np.clip(np.median(kc), 0.0, 1.0))


def spectral_flatness(x, nfft: int | None = None) -> float:
    """Geometric over arithmetic mean of the Welch PSD (DC bin excluded)."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    nfft = int(nfft or max(32, len(x) // 8))
    nfft = min(nfft, len(x))
    _, p = signal.welch(x, nperseg=nfft, noverlap=nfft // 2, detrend=False)
    p = p[1:]
    top = p.max() if len(p) else 0.0
    if top <= 0:
        return 0.0
    p = p + 1e-30 * top
    return float(np.clip(np.exp(np.mean(np.log(p))) / np.mean(p), 0.0, 1.0))


def _dominant_lag(z: np.ndarray) -> float:
    n = len(z)
    f = np.fft.rfft(z, 2 * n)
    ac = np.fft.irfft(f * np.conj(f))[: n // 2]
    ac = ac / (n - np.arange(len(ac)))
    ac = ac / ac[0]
    below = np.nonzero(ac[1:] <= 0)[0]
    start = int(below[0]) + 1 if len(below) else 2
    stop = max(start + 1, n // 3)
    seg = ac[start:stop]
    if len(seg) == 0:
        return float(max(start, 2))
    best = seg.max()
    i = int(np.nonzero(seg >= best - 0.02 * (1 - min(best, 0.0)))[0][0])
    # walk up to the local maximum of that lobe
    while i + 1 < len(seg) and seg[i + 1] > seg[i]:
        i += 1
    lag = start + i
    if 0 < i < len(seg) - 1:
        y0, y1, y2 = seg[i - 1], seg[i], seg[i + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            lag += 0.5 * (y0 - y2) / den
    return float(max(lag, 2.0))


def period_return_error(x, points_per_cycle: int = 32) -> float:
    """RMS deviation of cycles from their medoid cycle.

    The series is standardized, cut into cycles of its dominant
    autocorrelation period and resampled to ``points_per_cycle`` points per
    cycle; the medoid is the cycle with the smallest summed distance to the
    others.  A strictly periodic series returns ~0.
    """
    z = np.asarray(x, dtype=float)
    sd = z.std()
    if sd == 0:
        return 0.0
    z = (z - z.mean()) / sd
    period = _dominant_lag(z)
    n_cycles = int((len(z) - 1) // period)
    if n_cycles < 2:
        return float("nan")
    grid = period * (np.arange(n_cycles)[:, None] + np.arange(points_per_cycle)[None, :] / points_per_cycle)
    cycles = np.interp(grid.ravel(), np.arange(len(z)), z).reshape(n_cycles, points_per_cycle)
    sq = np.sum(cycles**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * cycles @ cycles.T, 0.0)
    medoid = int(np.argmin(np.sqrt(d2).sum(axis=1)))
    return float(np.sqrt(np.mean((cycles - cycles[medoid]) ** 2)))


@dataclass(frozen=True)
class WindowFeatures:
    """Per-window features; ``starts`` are window start times (s)."""

    starts: np.ndarray
    flatness: np.ndarray
    zero_one_k: np.ndarray
    return_error: np.ndarray
    window: float
    hop: float
    t_end: float

    def __len__(self):
        return len(self.starts)

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.flatness, self.zero_one_k, self.return_error])


def window_features(
    x,
    fs: float,
    window: float,
    hop: float | None = None,
    n_phases: int = 64,
    seed: int = 0,
    t0: float = 0.0,
    check_period: bool = True,
) -> WindowFeatures:
    """Compute (flatness, K, return error) on sliding windows.

    ``window`` and ``hop`` are in seconds; ``hop`` defaults to half the
    window.  When the series has a prominent spectral line (>= 20 dB above
    the median) the window must span at least 20 of its periods.
    """
    x = np.asarray(x, dtype=float).ravel()
    hop = window / 2 if hop is None else hop
    nw = int(round(window * fs))
    nh = int(round(hop * fs))
    if nw > len(x):
        raise InsufficientDataError(f"window of {nw} samples is longer than the series ({len(x)})")
    if nh < 1 or nh > nw / 2:
        raise PreconditionError("hop must satisfy 1 sample <= hop <= window / 2")
    if nw < 40:
        raise PreconditionError("window must hold at least 40 samples")
    if check_period:
        f_dom, prom = dominant_frequency(x, fs, nfft=min(len(x), max(nw, 256)))
        if prom >= 20 and window * f_dom < 20:
            raise PreconditionError(
                f"window {window:.4g} s spans {window * f_dom:.3g} periods of the dominant "
                f"line at {f_dom:.4g} Hz; need >= 20"
            )
    starts = np.arange(0, len(x) - nw + 1, nh)
    flat = np.empty(len(starts))
    k = np.empty(len(starts))
    err = np.empty(len(starts))
    for i, s in enumerate(starts):
        w = x[s:s + nw]
        flat[i] = spectral_flatness(w)
        k[i] = zero_one_test(w, n_phases=n_phases, seed=seed + i)
        err[i] = period_return_error(w)
    err = np.nan_to_num(err, nan=np.nanmax(err) if np.any(np.isfinite(err)) else 0.0)
    return WindowFeatures(t0 + starts / fs, flat, k, err, nw / fs, nh / fs, t0 + len(x) / fs)


@dataclass(frozen=True)
class ClassifierConfig:
    flatness_threshold: float = 0.2
    k_threshold: float = 0.5
    return_threshold: float = 0.3
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    vote: float = 0.5
    hysteresis: int = 2

    def __post_init__(self):
        if not 0 <= self.flatness_threshold <= 1 or not 0 <= self.k_threshold <= 1:
            raise PreconditionError("flatness and K thresholds must lie in [0, 1]")
        if self.return_threshold < 0:
            raise PreconditionError("return threshold must be >= 0")
        if self.hysteresis < 1:
            raise PreconditionError("hysteresis must be >= 1")


def raw_votes(features: WindowFeatures, config: ClassifierConfig) -> np.ndarray:
    w = np.asarray(config.weights, dtype=float)
    hits = np.column_stack([
        features.flatness > config.flatness_threshold,
        features.zero_one_k > config.k_threshold,
        features.return_error > config.return_threshold,
    ])
    return (hits @ w) / w.sum()


def apply_hysteresis(raw: np.ndarray, m: int) -> np.ndarray:
    """Switch label only after ``m`` consecutive agreeing windows.

    A confirmed switch is applied from the first window of the run, so
    boundaries are not delayed.
    """
    raw = np.asarray(raw, dtype=np.int8)
    out = raw.copy()
    if m <= 1 or len(raw) == 0:
        return out
    current = raw[0]
    i = 0
    n = len(raw)
    while i < n:
        if raw[i] == current:
            out[i] = current
            i += 1
            continue
        j = i
        while j < n and raw[j] != current:
            j += 1
        if j - i >= m:
            current = raw[i]
        out[i:j] = current
        i = j
    return out


def classify(features: WindowFeatures, config: ClassifierConfig | None = None) -> np.ndarray:
    """Per-window labels (1 = chaotic) from a weighted threshold vote."""
    config = config or ClassifierConfig()
    raw = (raw_votes(features, config) > config.vote).astype(np.int8)
    return apply_hysteresis(raw, config.hysteresis)


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    label: str

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SegmentReport:
    segments: tuple[Segment, ...]
    chaotic_fraction: float
    window: float
    hop: float
    thresholds: dict = field(default_factory=dict)

    @property
    def t_start(self) -> float:
        return self.segments[0].start

    @property
    def t_end(self) -> float:
        return self.segments[-1].end

    def chaotic_epochs(self) -> list[Segment]:
        return [s for s in self.segments if s.label == "chaotic"]

    def label_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        ends = np.array([s.end for s in self.segments])
        idx = np.clip(np.searchsorted(ends, t, side="right"), 0, len(ends) - 1)
        chaotic = np.array([s.label == "chaotic" for s in self.segments])
        return chaotic[idx].astype(np.int8)

    def to_dict(self) -> dict:
        return {
            "segments": [asdict(s) for s in self.segments],
            "chaotic_fraction": self.chaotic_fraction,
            "window": self.window,
            "hop": self.hop,
            "thresholds": self.thresholds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def segments_from_labels(
    labels,
    hop: float,
    min_epoch: float,
    window: float | None = None,
    t0: float = 0.0,
    t_end: float | None = None,
    thresholds: dict | None = None,
) -> SegmentReport:
    """Merge window labels into epochs and compute the chaotic fraction.

    Window ``i`` spans ``[t0 + i hop, t0 + i hop + window]`` and owns the
    hop-long slice around its centre; the first and last slices are
    stretched to ``t0`` and ``t_end`` so the epochs tile the series.
    Epochs shorter than ``min_epoch`` are absorbed into their neighbours,
    shortest first.
    """
    labels = np.asarray(labels, dtype=np.int8).ravel()
    if len(labels) == 0:
        raise PreconditionError("empty label sequence")
    if min_epoch < hop:
        raise PreconditionError(f"min_epoch ({min_epoch!r}) must be >= hop ({hop!r})")
    window = hop if window is None else window
    n = len(labels)
    if t_end is None:
        t_end = t0 + (n - 1) * hop + window
    centers = t0 + np.arange(n) * hop + window / 2
    bounds = np.concatenate([[t0], centers[:-1] + hop / 2, [t_end]])

    # run-length encode
    change = np.nonzero(np.diff(labels))[0] + 1
    run_start = np.concatenate([[0], change])
    run_end = np.concatenate([change, [n]])
    runs = [[int(labels[a]), float(bounds[a]), float(bounds[b])] for a, b in zip(run_start, run_end)]

    while len(runs) > 1:
        durations = [r[2] - r[1] for r in runs]
        i = int(np.argmin(durations))
        if durations[i] >= min_epoch:
            break
        runs[i][0] = 1 - runs[i][0]
        merged = []
        for r in runs:
            if merged and merged[-1][0] == r[0]:
                merged[-1][2] = r[2]
            else:
                merged.append(list(r))
        runs = merged

    segs = tuple(Segment(a, b, LABEL_NAMES[lab]) for lab, a, b in runs)
    total = segs[-1].end - segs[0].start
    chaotic = sum(s.duration for s in segs if s.label == "chaotic")
    return SegmentReport(segs, float(chaotic / total), float(window), float(hop), dict(thresholds or {}))


@dataclass(frozen=True)
class DutyCycleFit:
    status: str            # "ok", "insufficient_epochs" or "fully_chaotic"
    D: float | None
    D_halfwidth: float | None
    Ts: float | None
    Ts_halfwidth: float | None
    n_epochs: int

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def fit_duty_cycle(report: SegmentReport, n_boot: int = 1000, seed: int = 0) -> DutyCycleFit:
    """Estimate the gating duty cycle and period from a segment report.

    ``D`` is the chaotic fraction and ``Ts`` the median spacing between
    chaotic-epoch onsets.  Half-widths are half the central 95% range of a
    bootstrap over onset-to-onset cycles.
    """
    epochs = report.chaotic_epochs()
    if report.chaotic_fraction >= 1.0:
        return DutyCycleFit("fully_chaotic", 1.0, 0.0, None, None, len(epochs))
    if len(epochs) < 3:
        return DutyCycleFit("insufficient_epochs", None, None, None, None, len(epochs))
    onsets = np.array([e.start for e in epochs])
    spacing = np.diff(onsets)
    cycle_chaos = np.array([e.duration for e in epochs[:-1]])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(spacing), size=(n_boot, len(spacing)))
    d_boot = cycle_chaos[idx].sum(axis=1) / spacing[idx].sum(axis=1)
    ts_boot = np.median(spacing[idx], axis=1)
    half = lambda a: float(np.subtract(*np.percentile(a, [97.5, 2.5])) / 2)  # noqa: E731
    return DutyCycleFit("ok", report.chaotic_fraction, half(d_boot), float(np.median(spacing)),
                        half(ts_boot), len(epochs))


class IntermittencySegmenter(BaseEstimator):
    """Window-vote segmenter with an sklearn-style interface.

    ``fit`` optionally calibrates the return-error threshold on a
    periodic reference series (``return_factor`` times its median window
    error, never below ``return_floor``).  Without fitting the absolute
    ``return_threshold`` is used.

    Parameters
    ----------
    fs : float
        Sample rate of the series passed to ``transform``/``predict``.
    window : float
        Window length in seconds.
    hop : float, optional
        Window step; half the window by default.
    min_epoch : float, optional
        Shortest epoch kept; three windows by default.
    """

    def __init__(self, fs=1.0, window=1.0, hop=None, flatness_threshold=0.2, k_threshold=0.5,
                 return_threshold=0.3, return_factor=3.0, return_floor=0.05,
                 weights=(1.0, 1.0, 1.0), hysteresis=2, min_epoch=None, n_phases=64, random_state=0):
        self.fs = fs
        self.window = window
        self.hop = hop
        self.flatness_threshold = flatness_threshold
        self.k_threshold = k_threshold
        self.return_threshold = return_threshold
        self.return_factor = return_factor
        self.return_floor = return_floor
        self.weights = weights
        self.hysteresis = hysteresis
        self.min_epoch = min_epoch
        self.n_phases = n_phases
        self.random_state = random_state

    @property
    def hop_(self) -> float:
        return self.window / 2 if self.hop is None else self.hop

    @property
    def min_epoch_(self) -> float:
        return 3 * self.window if self.min_epoch is None else self.min_epoch

    def fit(self, X=None, y=None):
        """Calibrate the return-error threshold on a periodic reference ``X``."""
        if X is None:
            self.return_baseline_ = None
            self.return_threshold_ = float(self.return_threshold)
            return self
        feats = self.transform(X)
        self.return_baseline_ = float(np.median(feats.return_error))
        self.return_threshold_ = max(self.return_factor * self.return_baseline_, self.return_floor)
        return self

    def config(self) -> ClassifierConfig:
        thr = getattr(self, "return_threshold_", self.return_threshold)
        return ClassifierConfig(self.flatness_threshold, self.k_threshold, float(thr),
                                tuple(self.weights), 0.5, int(self.hysteresis))

    def transform(self, X, t0: float = 0.0) -> WindowFeatures:
        x = _check_series(X)
        rs = 0 if self.random_state is None else int(self.random_state)
        return window_features(x, self.fs, self.window, self.hop_, self.n_phases, rs, t0)

    def predict(self, X) -> np.ndarray:
        return classify(self.transform(X), self.config())

    def segment(self, X, t0: float = 0.0) -> SegmentReport:
        x = _check_series(X)
        feats = self.transform(x, t0)
        cfg = self.config()
        labels = classify(feats, cfg)
        return segments_from_labels(labels, feats.hop, self.min_epoch_, feats.window, t0,
                                    t0 + len(x) / self.fs, thresholds=asdict(cfg))

    def chaotic_fraction(self, X) -> float:
        return self.segment(X).chaotic_fraction


def _check_series(X) -> np.ndarray:
    from sklearn.utils import check_array

    values = getattr(X, "values", X)
    arr = check_array(np.asarray(values, dtype=float).reshape(-1, 1), ensure_min_samples=2)
    return arr.ravel()


def require_epochs(fit: DutyCycleFit) -> DutyCycleFit:
    if fit.status == "insufficient_epochs":
        raise InsufficientDataError(f"only {fit.n_epochs} chaotic epochs; need >= 3")
    return fit
