"""Simulated ultrasound detection: tone injection, SNR and noise-equivalent power."""

from __future__ import annotations

import csv
import decimal
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import OptochaosError, PreconditionError
from .model import Trajectory, integrate
from .params import SystemParams
from .regime import regime_classify
from .spectral import Spectrum, peak_mask, welch_psd

COUPLINGS = ("force", "drive")


@dataclass(frozen=True)
class UltrasoundStimulus:
    """Single-tone stimulus.

    Parameters
    ----------
    f_u : float
        Tone frequency in Hz.
    amplitude : float
        With ``coupling="force"`` the tone ``amplitude * sin(2 pi f_u t)`` is
        added to ``dv/dt`` (units of 1/s).  With ``coupling="drive"`` it is a
        fractional modulation of the input field amplitude.
    P_u : float
        Nominal acoustic power in W.  It only enters the NEP arithmetic and
        is not derived from ``amplitude``.
    coupling : {"force", "drive"}
    """

    f_u: float = 570e3
    amplitude: float = 0.0
    P_u: float = 1e-6
    coupling: str = "force"

    def __post_init__(self):
        if not self.f_u > 0:
            raise PreconditionError(f"f_u must be > 0, got {self.f_u!r}")
        if not self.amplitude >= 0:
            raise PreconditionError(f"amplitude must be >= 0, got {self.amplitude!r}")
        if not self.P_u > 0:
            raise PreconditionError(f"P_u must be > 0, got {self.P_u!r}")
        if self.coupling not in COUPLINGS:
            raise PreconditionError(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")

    def waveform(self, t):
        return self.amplitude * np.sin(2 * np.pi * self.f_u * np.asarray(t, dtype=float))


def simulate_with_stimulus(p: SystemParams, stim: UltrasoundStimulus, seed: int = 0, s0=None) -> Trajectory:
    """Integrate ``p`` with the tone applied through the chosen coupling.

    A zero-amplitude stimulus is not applied at all, so the result is
    bit-identical to :func:`integrate` with the same seed.
    """
    if stim.f_u >= p.fs / 2:
        raise PreconditionError(f"f_u = {stim.f_u!r} Hz is not below the Nyquist frequency {p.fs / 2!r} Hz")
    if stim.amplitude == 0:
        return integrate(p, s0, seed=seed)
    if stim.coupling == "force":
        return integrate(p, s0, stimulus=stim.waveform, seed=seed)
    return integrate(p, s0, seed=seed, drive_modulation=stim.waveform)


def mechanical_susceptibility(p: SystemParams, f) -> np.ndarray:
    """Complex response of ``x`` to a unit force on ``dv/dt`` at frequency ``f`` (Hz).

    From ``x'' + gamma_m x' + omega_m^2 x = omega_m F`` one gets
    ``chi = omega_m / (omega_m^2 - Omega^2 - i gamma_m Omega)``.
    """
    om = 2 * np.pi * np.asarray(f, dtype=float)
    return p.omega_m / (p.omega_m**2 - om**2 - 1j * p.gamma_m * om)


def sensing_nfft(fs: float, f_u: float, n: int, bins_below: int = 16) -> int:
    """Power-of-two segment length with at least ``bins_below`` bins under ``f_u``."""
    nfft = 1 << max(4, math.ceil(math.log2(bins_below * fs / f_u)))
    if nfft > n:
        raise PreconditionError(f"a {n}-sample record cannot resolve {f_u!r} Hz (needs {nfft} samples)")
    return nfft


def _bands(spec: Spectrum, f_u: float, signal_halfwidth: float | None, noise_band):
    if not spec.freqs[0] < f_u < spec.freqs[-1]:
        raise PreconditionError(f"f_u = {f_u!r} Hz lies outside the spectrum")
    hw = 2 * spec.df if signal_halfwidth is None else float(signal_halfwidth)
    if hw < 0:
        raise PreconditionError("signal_halfwidth must be >= 0")
    sig = np.abs(spec.freqs - f_u) <= hw
    if not sig.any():
        sig[int(np.argmin(np.abs(spec.freqs - f_u)))] = True
    lo, hi = noise_band if noise_band is not None else (0.5 * f_u, 2.0 * f_u)
    guard = np.abs(spec.freqs - f_u) <= hw + 2 * spec.df
    noise = (spec.freqs >= lo) & (spec.freqs <= hi) & ~guard & ~peak_mask(spec)
    if not noise.any():
        raise PreconditionError("noise band is empty after excluding the signal and spectral lines")
    return sig, noise


def response_snr(spec: Spectrum, f_u: float, signal_halfwidth: float | None = None,
                 noise_band: tuple[float, float] | None = None) -> float:
    """Linear SNR of the line at ``f_u``.

    The signal is the power in the bins within ``signal_halfwidth`` of
    ``f_u`` (two bins by default).  The noise is the median density of
    ``noise_band`` (``[f_u / 2, 2 f_u]`` by default, minus a guard around
    the signal and any spectral lines) times the signal bandwidth.
    """
    sig, noise = _bands(spec, f_u, signal_halfwidth, noise_band)
    signal_power = float(spec.psd[sig].sum() * spec.df)
    noise_power = float(np.median(spec.psd[noise]) * sig.sum() * spec.df)
    if noise_power <= 0:
        raise PreconditionError("noise power in the band is zero")
    return signal_power / noise_power


def nep(P_u: float, snr: float, B: float) -> float:
    """Noise-equivalent power ``P_u / (snr * sqrt(B))`` in W/sqrt(Hz).

    The formula is evaluated in decimal arithmetic on the shortest decimal
    form of each argument and rounded to float once, so decimal inputs give
    the correctly rounded decimal answer (``nep(1e-6, 100, 100) == 1e-9``).
    """
    if not P_u > 0:
        raise PreconditionError(f"P_u must be > 0, got {P_u!r}")
    if not B > 0:
        raise PreconditionError(f"B must be > 0, got {B!r}")
    if snr == 0:
        raise PreconditionError("signal not detected (snr = 0)")
    if not snr > 0:
        raise PreconditionError(f"snr must be > 0, got {snr!r}")
    with decimal.localcontext(decimal.Context(prec=40)):
        d = decimal.Decimal
        return float(d(repr(float(P_u))) / (d(repr(float(snr))) * d(repr(float(B))).sqrt()))


@dataclass(frozen=True)
class SensingReport:
    """Response of one configuration to the stimulus.

    Levels are in dB relative to the mean-square of the analysed series.
    """

    name: str
    status: str
    regime: str | None = None
    chaotic_fraction: float | None = None
    peak_db: float | None = None
    floor_db: float | None = None
    snr: float | None = None
    snr_db: float | None = None
    nep: float | None = None
    B: float | None = None
    P_u: float | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def sense(traj: Trajectory, baseline: Trajectory, stim: UltrasoundStimulus, name: str = "",
          B: float | None = None, nfft: int | None = None, segmenter=None) -> SensingReport:
    """Measure the stimulated record and tag it with the baseline's regime."""
    x = np.asarray(traj.intensity, dtype=float)
    x = x - x.mean()
    ms = float(np.mean(x**2))
    if ms == 0:
        raise PreconditionError("stimulated record is constant")
    nfft = nfft or sensing_nfft(traj.fs, stim.f_u, len(x))
    spec = welch_psd(x, traj.fs, nfft)
    sig, noise = _bands(spec, stim.f_u, None, None)
    snr = response_snr(spec, stim.f_u)
    band = B if B is not None else spec.rbw
    regime = regime_classify(baseline, segmenter)
    return SensingReport(
        name=name,
        status="ok",
        regime=regime.regime.value,
        chaotic_fraction=regime.evidence.chaotic_fraction,
        peak_db=float(10 * np.log10(spec.psd[sig].max() * spec.df / ms)),
        floor_db=float(10 * np.log10(np.median(spec.psd[noise]) * spec.df / ms)),
        snr=snr,
        snr_db=float(10 * np.log10(snr)) if snr > 0 else float("-inf"),
        nep=nep(stim.P_u, snr, band) if snr > 0 else None,
        B=float(band),
        P_u=stim.P_u,
    )


def regime_comparison(configs, stim: UltrasoundStimulus, seed: int = 0, B: float | None = None,
                      nfft: int | None = None) -> list[SensingReport]:
    """One :class:`SensingReport` per configuration, in input order.

    ``configs`` holds ``SystemParams`` or ``(name, SystemParams)`` pairs.
    Each entry runs a baseline and a stimulated simulation at ``seed``; a
    failing entry yields a report with ``status="failed"``.
    """
    items = [(c if isinstance(c, tuple) else (f"config{i}", c)) for i, c in enumerate(configs)]
    if len(items) < 2:
        raise PreconditionError("regime comparison needs at least two configurations")
    reports = []
    for name, p in items:
        try:
            base = integrate(p, seed=seed)
            stimulated = simulate_with_stimulus(p, stim, seed=seed)
            reports.append(sense(stimulated, base, stim, name, B, nfft))
        except OptochaosError as exc:
            reports.append(SensingReport(name=name, status="failed", message=f"{type(exc).__name__}: {exc}"))
    return reports


def ranking(reports) -> list[SensingReport]:
    """Successful reports by decreasing SNR (ties keep input order)."""
    ok = [r for r in reports if r.ok]
    return sorted(ok, key=lambda r: -r.snr)


def ordering_summary(reports) -> dict:
    """SNR ordering across regimes and whether the intermittent state leads it."""
    ranked = ranking(reports)
    order = [r.regime for r in ranked]
    best = {}
    for r in ranked:
        best.setdefault(r.regime, r.snr_db)
    return {
        "order": order,
        "best_snr_db_by_regime": best,
        "intermittent_is_maximum": bool(ranked) and ranked[0].regime == "intermittent_chaos",
        "chaotic_below_periodic": ("chaotic" in best and "periodic" in best
                                   and best["chaotic"] < best["periodic"]),
    }


def write_reports(reports, json_path, csv_path) -> None:
    with open(json_path, "w") as fh:
        json.dump({"reports": [asdict(r) for r in reports], "summary": ordering_summary(reports)},
                  fh, indent=2, sort_keys=True)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "name", "regime", "snr_db", "nep_w_per_rthz", "peak_db", "floor_db"])
        for i, r in enumerate(ranking(reports), start=1):
            w.writerow([i, r.name, r.regime, repr(r.snr_db), repr(r.nep), repr(r.peak_db), repr(r.floor_db)])
