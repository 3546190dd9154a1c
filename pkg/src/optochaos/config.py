"""Config-file sections beyond the system parameters.

``[segmentation]`` tunes the window vote, ``[sensing]`` the stimulus and
``[sweep]`` the swept field; ``docs/formats.md`` lists every key.
"""

from __future__ import annotations

import configparser
import math
from importlib import resources
from pathlib import Path

from .errors import PreconditionError
from .params import SystemParams, read_config
from .regime import SERIES_WINDOW_SAMPLES, TRAJECTORY_SEGMENTATION
from .segmentation import IntermittencySegmenter
from .sensing import UltrasoundStimulus

DEFAULT_STIMULUS_PER_OMEGA_M = 0.03


def package_config_dir() -> Path:
    return Path(str(resources.files("optochaos") / "configs"))


def resolve_config_path(path) -> Path:
    """``path`` as given if it exists, else relative to the shipped configs."""
    p = Path(path)
    if p.is_file():
        return p
    shipped = package_config_dir() / p
    if shipped.is_file():
        return shipped
    raise PreconditionError(f"config file not found: {path}")


def _section(cp: configparser.ConfigParser | None, name: str) -> dict:
    if cp is None or not cp.has_section(name):
        return {}
    return {k.lower(): v for k, v in cp[name].items()}


def _time_key(sec: dict, name: str, period: float | None, unit: float | None) -> float | None:
    """Seconds from ``<name>``, ``<name>_periods`` or ``<name>_samples``."""
    if name in sec:
        return float(sec.pop(name))
    if f"{name}_periods" in sec:
        raw = float(sec.pop(f"{name}_periods"))
        if period is None:
            raise PreconditionError(f"{name}_periods needs a known mechanical period")
        return raw * period
    if f"{name}_samples" in sec:
        return float(sec.pop(f"{name}_samples")) * unit
    return None


def segmenter_from_config(cp, fs: float, period: float | None = None) -> IntermittencySegmenter:
    """Segmenter for a series at ``fs``.

    Defaults depend on whether a mechanical ``period`` is known (simulated
    trajectories) or not (generic series); ``[segmentation]`` keys override
    them.
    """
    sec = _section(cp, "segmentation")
    sec.pop("observable", None)
    if period is not None:
        base = dict(TRAJECTORY_SEGMENTATION)
        base["window"] = base.pop("window_periods") * period
    else:
        base = {"window": SERIES_WINDOW_SAMPLES / fs}
    for name in ("window", "hop", "min_epoch"):
        val = _time_key(sec, name, period, 1.0 / fs)
        if val is not None:
            base[name] = val
    for name in ("flatness_threshold", "k_threshold", "return_threshold", "return_factor", "return_floor"):
        if name in sec:
            base[name] = float(sec.pop(name))
    for name in ("hysteresis", "n_phases", "random_state"):
        if name in sec:
            base[name] = int(sec.pop(name))
    if "weights" in sec:
        w = tuple(float(v) for v in sec.pop("weights").split(","))
        if len(w) != 3:
            raise PreconditionError("weights needs three comma-separated values")
        base["weights"] = w
    if sec:
        raise PreconditionError(f"unknown [segmentation] keys: {sorted(sec)}")
    return IntermittencySegmenter(fs=fs, **base)


def observable_from_config(cp) -> str:
    name = _section(cp, "segmentation").get("observable", "intensity")
    if name not in ("intensity", "x", "v"):
        raise PreconditionError(f"unknown observable {name!r}")
    return name


def stimulus_from_config(cp, p: SystemParams, **overrides) -> UltrasoundStimulus:
    """Stimulus from ``[sensing]``; ``None`` overrides are ignored."""
    sec = _section(cp, "sensing")
    kw = {}
    if "f_u" in sec:
        kw["f_u"] = float(sec.pop("f_u"))
    if "amplitude" in sec:
        kw["amplitude"] = float(sec.pop("amplitude"))
    elif "amplitude_per_omega_m" in sec:
        kw["amplitude"] = float(sec.pop("amplitude_per_omega_m")) * p.omega_m
    else:
        kw["amplitude"] = DEFAULT_STIMULUS_PER_OMEGA_M * p.omega_m
    if "p_u" in sec:
        kw["P_u"] = float(sec.pop("p_u"))
    if "coupling" in sec:
        kw["coupling"] = sec.pop("coupling").strip()
    sec.pop("b", None)
    if sec:
        raise PreconditionError(f"unknown [sensing] keys: {sorted(sec)}")
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return UltrasoundStimulus(**kw)


def bandwidth_from_config(cp) -> float | None:
    sec = _section(cp, "sensing")
    return float(sec["b"]) if "b" in sec else None


def load(path) -> configparser.ConfigParser:
    return read_config(resolve_config_path(path))


def mechanical_period(p: SystemParams) -> float:
    return 2 * math.pi / p.omega_m
