"""Spectra, spectral floors, delay embedding and phase-space densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .errors import PreconditionError


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectral density.

    ``rbw`` is the equivalent noise bandwidth of one bin (Hz), i.e. the
    resolution bandwidth used in noise-equivalent-power arithmetic.
    """

    freqs: np.ndarray
    psd: np.ndarray
    fs: float
    nfft: int
    overlap: float
    window: str
    rbw: float

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    @property
    def psd_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.psd)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.psd) * self.df)

    def to_csv(self, path) -> None:
        with np.errstate(divide="ignore"):
            db = np.maximum(self.psd_db, -400.0)
        np.savetxt(path, np.column_stack([self.freqs, self.psd, db]), fmt="%.17g",
                   delimiter=",", header="freq_hz,psd,psd_db", comments="")


def welch_psd(x, fs: float, nfft: int, overlap: float = 0.5, window: str = "hann") -> Spectrum:
    """Welch-averaged modified periodogram, density scaling, no detrending.

    Without detrending ``sum(psd) * df`` equals the mean square of the
    series, i.e. its variance when it is zero-mean.  ``window="boxcar"``
    gives exact single-bin lines for bin-centred tones; the default Hann
    taper keeps leakage far from lines negligible.
    """
    x = np.asarray(x, dtype=float).ravel()
    nfft = int(nfft)
    if nfft < 2:
        raise PreconditionError(f"nfft must be >= 2, got {nfft}")
    if len(x) < nfft:
        raise PreconditionError(f"series of {len(x)} samples is shorter than nfft = {nfft}")
    if not 0 <= overlap < 1:
        raise PreconditionError(f"overlap must be in [0, 1), got {overlap!r}")
    noverlap = int(round(overlap * nfft))
    freqs, psd = signal.welch(x, fs=fs, window=window, nperseg=nfft, noverlap=noverlap,
                              nfft=nfft, detrend=False, return_onesided=True, scaling="density")
    w = signal.get_window(window, nfft)
    rbw = fs * np.sum(w**2) / np.sum(w) ** 2
    return Spectrum(freqs, psd, float(fs), nfft, float(overlap), window, float(rbw))


def peak_mask(spec: Spectrum, threshold_db: float = 10.0, median_bins: int = 31, widen: int = 2) -> np.ndarray:
    """Bins standing ``threshold_db`` above a running median, dilated by ``widen`` bins.

    The DC bin is always masked.
    """
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(np.maximum(spec.psd, 1e-300))
    base = ndimage.median_filter(db, size=median_bins, mode="nearest")
    mask = db > base + threshold_db
    mask[0] = True
    if widen > 0:
        mask = ndimage.binary_dilation(mask, iterations=widen)
    return mask


def spectral_floor(spec: Spectrum, exclude=None, band: tuple[float, float] | None = None) -> float:
    """Median dB level of the unmasked bins inside ``band``.

    Parameters
    ----------
    exclude : bool array, optional
        Bins to drop (spectral lines); defaults to :func:`peak_mask`.
    band : (f_lo, f_hi), optional
        Frequency band in Hz, the full range by default.
    """
    mask = peak_mask(spec) if exclude is None else np.asarray(exclude, dtype=bool)
    if mask.shape != spec.psd.shape:
        raise PreconditionError("mask shape does not match the spectrum")
    lo, hi = band if band is not None else (spec.freqs[0], spec.freqs[-1])
    in_band = (spec.freqs >= lo) & (spec.freqs <= hi)
    n_band = int(in_band.sum())
    keep = in_band & ~mask
    if n_band == 0 or not keep.any():
        raise PreconditionError("no bins left in the band after masking")
    if (in_band & mask).sum() >= 0.5 * n_band:
        raise PreconditionError("peak mask removes >= 50% of the band")
    with np.errstate(divide="ignore"):
        return float(np.median(10 * np.log10(spec.psd[keep])))


def peak_level(spec: Spectrum, band: tuple[float, float] | None = None) -> float:
    """Highest bin in ``band`` (DC excluded), in dB."""
    sel = spec.freqs > 0
    if band is not None:
        sel &= (spec.freqs >= band[0]) & (spec.freqs <= band[1])
    return float(10 * np.log10(spec.psd[sel].max()))


def dominant_frequency(x, fs: float, nfft: int | None = None) -> tuple[float, float]:
    """Frequency of the strongest non-DC bin and its prominence in dB over the median."""
    x = np.asarray(x, dtype=float)
    nfft = int(nfft or min(len(x), 4096))
    spec = welch_psd(x - x.mean(), fs, nfft)
    p = spec.psd[1:]
    i = int(np.argmax(p))
    prominence = 10 * np.log10(p[i] / max(np.median(p), 1e-300))
    return float(spec.freqs[1 + i]), float(prominence)


def first_zero_autocorr(x, max_lag: int | None = None) -> int:
    """Smallest lag at which the autocorrelation crosses zero (at least 1)."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = len(x)
    if n < 3 or not np.any(x):
        return 1
    f = np.fft.rfft(x, 2 * n)
    ac = np.fft.irfft(f * np.conj(f))[:n]
    max_lag = max_lag or n // 2
    below = np.nonzero(ac[1:max_lag] <= 0)[0]
    return int(below[0] + 1) if len(below) else 1


def delay_embed(x, tau: int | None = None, m: int = 3) -> np.ndarray:
    """Delay vectors ``(x_k, x_{k+tau}, ..., x_{k+(m-1) tau})`` as rows.

    ``tau`` defaults to the first zero of the autocorrelation.
    """
    x = np.asarray(x, dtype=float).ravel()
    if tau is None:
        tau = first_zero_autocorr(x)
    tau, m = int(tau), int(m)
    if tau < 1 or m < 1:
        raise PreconditionError(f"tau and m must be >= 1, got tau={tau}, m={m}")
    n = len(x) - (m - 1) * tau
    if n <= 0:
        raise PreconditionError(f"(m - 1) * tau = {(m - 1) * tau} exceeds the series length {len(x)}")
    idx = np.arange(n)[:, None] + tau * np.arange(m)[None, :]
    return x[idx]


@dataclass(frozen=True)
class DensityGrid:
    """Normalized 2-D occupancy histogram; ``mass[i, j]`` covers x-bin i, y-bin j."""

    mass: np.ndarray
    bounds: tuple[float, float, float, float]

    @property
    def bins(self) -> int:
        return self.mass.shape[0]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        x0, x1, y0, y1 = self.bounds
        return np.linspace(x0, x1, self.bins + 1), np.linspace(y0, y1, self.bins + 1)

    def mass_on(self, support: np.ndarray) -> float:
        """Probability mass on the cells flagged by ``support``."""
        return float(self.mass[np.asarray(support, dtype=bool)].sum())

    def support(self) -> np.ndarray:
        return self.mass > 0

    def to_csv(self, path) -> None:
        import json
        from pathlib import Path

        path = Path(path)
        np.savetxt(path, self.mass, fmt="%.17g", delimiter=",")
        x0, x1, y0, y1 = self.bounds
        meta = {"bins": self.bins, "x_min": x0, "x_max": x1, "y_min": y0, "y_max": y1,
                "layout": "row-major, row = x bin, column = y bin"}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2))


def fit_bounds(points, margin: float = 0.05) -> tuple[float, float, float, float]:
    pts = np.asarray(points, dtype=float)
    out = []
    for col in (pts[:, 0], pts[:, 1]):
        lo, hi = float(col.min()), float(col.max())
        span = hi - lo
        if span == 0:
            pad = 0.5 * max(abs(lo), 1.0)
        else:
            pad = margin * span
        out += [lo - pad, hi + pad]
    return tuple(out)


def density_grid(points, bins: int = 64, bounds=None, margin: float = 0.05) -> DensityGrid:
    """Occupancy histogram of 2-D points normalized to a probability mass function.

    Bounds are fitted to the data with a ``margin`` fraction of the span on
    each side unless given.  Points outside explicit bounds are dropped.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise PreconditionError("points must be an (n, 2) array")
    pts = pts[:, :2]
    if len(pts) == 0:
        raise PreconditionError("empty point set")
    if bounds is None:
        bounds = fit_bounds(pts, margin)
    x0, x1, y0, y1 = bounds
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=bins, range=[[x0, x1], [y0, y1]])
    total = counts.sum()
    if total == 0:
        raise PreconditionError("no points inside the grid bounds")
    return DensityGrid(counts / total, tuple(float(b) for b in bounds))
