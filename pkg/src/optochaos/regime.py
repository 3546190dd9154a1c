"""Three-way regime labels with their supporting evidence.

A series is *periodic* when its chaotic fraction is below 5%, *chaotic*
above 95% and *intermittent* in between.  The evidence record also keeps
the spectral floor relative to the strongest line and, when the
generating parameters are known, the largest Lyapunov exponent.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import PreconditionError
from .lyapunov import lyapunov_benettin
from .model import Trajectory
from .params import SystemParams
from .segmentation import IntermittencySegmenter, SegmentReport
from .spectral import peak_level, spectral_floor, welch_psd
from .synthesis import TimeSeries

PERIODIC_BELOW = 0.05
CHAOTIC_ABOVE = 0.95

#: Segmenter settings for simulated intensity records, in mechanical periods.
#: The thresholds were calibrated on the shipped periodic and chaotic
#: regime configs; see ``docs/formats.md``.
TRAJECTORY_SEGMENTATION = dict(
    window_periods=40.0,
    flatness_threshold=0.12,
    k_threshold=0.5,
    return_threshold=0.32,
)
SERIES_WINDOW_SAMPLES = 256


class Regime(enum.Enum):
    PERIODIC = "periodic"
    INTERMITTENT = "intermittent_chaos"
    CHAOTIC = "chaotic"


def label_for_fraction(fraction: float, periodic_below: float = PERIODIC_BELOW,
                       chaotic_above: float = CHAOTIC_ABOVE) -> Regime:
    if not 0.0 <= fraction <= 1.0:
        raise PreconditionError(f"chaotic fraction must lie in [0, 1], got {fraction!r}")
    if fraction < periodic_below:
        return Regime.PERIODIC
    if fraction > chaotic_above:
        return Regime.CHAOTIC
    return Regime.INTERMITTENT


@dataclass(frozen=True)
class RegimeEvidence:
    chaotic_fraction: float
    floor_elevation_db: float
    lyapunov: float | None = None
    periodic_below: float = PERIODIC_BELOW
    chaotic_above: float = CHAOTIC_ABOVE


@dataclass(frozen=True)
class RegimeResult:
    regime: Regime
    evidence: RegimeEvidence
    report: SegmentReport

    def __post_init__(self):
        ev = self.evidence
        expected = label_for_fraction(ev.chaotic_fraction, ev.periodic_below, ev.chaotic_above)
        if expected is not self.regime:
            raise PreconditionError(f"label {self.regime.value} contradicts the evidence ({expected.value})")

    def to_dict(self) -> dict:
        return {"regime": self.regime.value, "evidence": asdict(self.evidence),
                "segments": self.report.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def observable(data, name: str = "intensity") -> tuple[np.ndarray, float, float]:
    """``(values, fs, t0)`` of the analysed scalar for a trajectory or series."""
    if isinstance(data, Trajectory):
        if name not in ("intensity", "x", "v"):
            raise PreconditionError(f"unknown observable {name!r}")
        return np.asarray(getattr(data, name)), data.fs, data.t0
    if isinstance(data, TimeSeries):
        return data.values, data.fs, data.t0
    raise PreconditionError(f"cannot analyse an object of type {type(data).__name__}")


def _mechanical_period(traj: Trajectory) -> float | None:
    omega = traj.params.get("omega_m") if traj.params else None
    return 2 * math.pi / omega if omega else None


def default_segmenter(data, **overrides) -> IntermittencySegmenter:
    """Segmenter matched to ``data``.

    Trajectories use windows of 40 mechanical periods with the calibrated
    trajectory thresholds; other series use 256-sample windows and the
    estimator defaults.
    """
    _, fs, _ = observable(data)
    period = _mechanical_period(data) if isinstance(data, Trajectory) else None
    if period is not None:
        cfg = dict(TRAJECTORY_SEGMENTATION)
        window = cfg.pop("window_periods") * period
        kwargs = dict(fs=fs, window=window, **cfg)
    else:
        kwargs = dict(fs=fs, window=SERIES_WINDOW_SAMPLES / fs)
    kwargs.update(overrides)
    return IntermittencySegmenter(**kwargs)


def floor_elevation(values, fs: float, nfft: int | None = None) -> float:
    """Spectral floor relative to the strongest line, in dB.

    The series is centred first, so the number does not depend on the
    signal's scale or offset.
    """
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    if not np.any(x):
        raise PreconditionError("constant series has no spectrum to compare")
    nfft = int(nfft or min(len(x), 4096))
    spec = welch_psd(x, fs, nfft)
    return spectral_floor(spec) - peak_level(spec)


def regime_classify(
    data,
    segmenter: IntermittencySegmenter | None = None,
    observable_name: str = "intensity",
    with_lyapunov: bool = False,
    periodic_below: float = PERIODIC_BELOW,
    chaotic_above: float = CHAOTIC_ABOVE,
) -> RegimeResult:
    """Label a trajectory or time series as periodic, intermittent or chaotic.

    Parameters
    ----------
    data : Trajectory or TimeSeries
    segmenter : IntermittencySegmenter, optional
        Defaults to :func:`default_segmenter`.
    observable_name : str
        Trajectory column to analyse.
    with_lyapunov : bool
        Also run the tangent-space estimate; needs a trajectory carrying
        its parameters.  The exponent is reported in units of 1/s.
    """
    values, fs, t0 = observable(data, observable_name)
    seg = segmenter if segmenter is not None else default_segmenter(data)
    if getattr(seg, "fs", fs) != fs:
        raise PreconditionError(f"segmenter fs {seg.fs!r} does not match the data ({fs!r})")
    report = seg.segment(values, t0=t0)
    lyap = None
    if with_lyapunov:
        if not isinstance(data, Trajectory) or not data.params:
            raise PreconditionError("a Lyapunov estimate needs a trajectory with its parameters")
        p = SystemParams(**data.params)
        lyap = lyapunov_benettin(p, t_total=p.t_record, seed=data.seed).exponent
    evidence = RegimeEvidence(report.chaotic_fraction, floor_elevation(values, fs), lyap,
                              periodic_below, chaotic_above)
    regime = label_for_fraction(report.chaotic_fraction, periodic_below, chaotic_above)
    return RegimeResult(regime, evidence, report)


class RegimeClassifier(IntermittencySegmenter):
    """Segmenter whose ``predict`` returns one :class:`Regime` per series.

    ``X`` is one 1-D series or a sequence of them, sampled at ``fs``.
    ``fit`` is inherited: a periodic reference calibrates the return-error
    threshold.
    """

    def predict(self, X) -> np.ndarray:
        series = [X] if np.ndim(X) == 1 else list(X)
        out = []
        for s in series:
            frac = self.segment(s).chaotic_fraction
            out.append(label_for_fraction(frac).value)
        return np.array(out)
