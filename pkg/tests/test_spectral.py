import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from optochaos.errors import PreconditionError
from optochaos.spectral import (
    delay_embed,
    density_grid,
    dominant_frequency,
    first_zero_autocorr,
    peak_level,
    peak_mask,
    spectral_floor,
    welch_psd,
)
from optochaos.synthesis import fixture, logistic_series

from conftest import sine


class TestWelch:
    @pytest.mark.parametrize("window", ["hann", "boxcar", "hamming"])
    def test_parseval(self, rng, window):
        x = rng.standard_normal(50_000) + sine(0.01, 1.0, 50_000, 3.0)
        spec = welch_psd(x, 1.0, 1024, window=window)
        assert spec.total_power == pytest.approx(np.mean(x**2), rel=0.01)

    def test_frequency_axis(self, rng):
        spec = welch_psd(rng.standard_normal(4096), 200.0, 256)
        assert spec.freqs[0] == 0.0 and spec.freqs[-1] == pytest.approx(100.0)
        assert np.all(np.diff(spec.freqs) > 0)

    def test_bin_centred_sine(self):
        spec = welch_psd(sine(1e3, 64e3, 64_000), 64e3, 640, window="boxcar")
        k = int(np.argmax(spec.psd))
        assert spec.freqs[k] == pytest.approx(1e3)
        assert spec.psd[k] * spec.df / spec.total_power >= 0.99

    def test_white_noise_level(self, rng):
        sigma, fs = 0.7, 50.0
        x = sigma * rng.standard_normal(2**20)
        spec = welch_psd(x, fs, 256)
        inner = spec.psd[1:-1]
        level = sigma**2 / (fs / 2)
        assert inner.mean() == pytest.approx(level, rel=0.1)
        assert np.all(np.abs(inner / level - 1) < 0.1)

    def test_dc_only(self):
        spec = welch_psd(np.full(1024, 2.5), 1.0, 128, window="boxcar")
        assert spec.psd[0] > 0
        assert np.all(spec.psd[1:] == 0)

    def test_resolution_bandwidth(self):
        assert welch_psd(np.ones(256), 100.0, 100, window="boxcar").rbw == pytest.approx(1.0)
        assert welch_psd(np.ones(256), 100.0, 100).rbw == pytest.approx(1.5, rel=0.02)

    def test_short_series(self):
        with pytest.raises(PreconditionError):
            welch_psd(np.ones(10), 1.0, 16)

    @pytest.mark.parametrize("overlap", [-0.1, 1.0])
    def test_bad_overlap(self, overlap):
        with pytest.raises(PreconditionError):
            welch_psd(np.ones(100), 1.0, 16, overlap=overlap)


class TestFloor:
    def test_sine_with_tiny_noise(self, rng):
        fs, sigma = 1.0, 1e-3
        x = sine(0.125, fs, 2**17) + sigma * rng.standard_normal(2**17)
        spec = welch_psd(x, fs, 1024)
        floor = spectral_floor(spec)
        expected = 10 * math.log10(sigma**2 / (fs / 2))
        assert floor == pytest.approx(expected, abs=1.0)
        assert peak_level(spec) - floor > 40

    def test_white_noise(self, rng):
        x = rng.standard_normal(2**18)
        spec = welch_psd(x, 1.0, 512)
        assert spectral_floor(spec) == pytest.approx(10 * math.log10(2.0), abs=1.0)

    def test_intermittent_between(self):
        floors = [spectral_floor(welch_psd(fixture(D, 4096, 2**17, 1.0, 1 / 8, seed=2, noise=1e-3).series.values,
                                           1.0, 1024)) for D in (0.0, 0.5, 1.0)]
        assert floors[0] < floors[1] < floors[2]

    def test_band_restricts(self, rng):
        x = rng.standard_normal(2**16) + np.cumsum(rng.standard_normal(2**16)) * 0.01
        spec = welch_psd(x, 1.0, 512)
        assert spectral_floor(spec, band=(0.25, 0.5)) < spectral_floor(spec, band=(0.0, 0.02))

    def test_mask_too_large(self, rng):
        spec = welch_psd(rng.standard_normal(4096), 1.0, 256)
        mask = np.zeros_like(spec.psd, dtype=bool)
        mask[: len(mask) // 2 + 1] = True
        with pytest.raises(PreconditionError, match="50%"):
            spectral_floor(spec, exclude=mask)

    def test_empty_band(self, rng):
        spec = welch_psd(rng.standard_normal(4096), 1.0, 256)
        with pytest.raises(PreconditionError):
            spectral_floor(spec, band=(2.0, 3.0))

    def test_peak_mask_finds_line(self):
        spec = welch_psd(sine(0.125, 1.0, 8192) + 1e-3 * np.random.default_rng(0).standard_normal(8192), 1.0, 512)
        mask = peak_mask(spec)
        assert mask[np.argmin(np.abs(spec.freqs - 0.125))]
        assert mask[0]
        assert mask.mean() < 0.1


class TestEmbedding:
    def test_quarter_period_circle(self):
        x = sine(1.0, 40.0, 4000)
        pts = delay_embed(x, tau=10, m=2)
        r = np.hypot(pts[:, 0], pts[:, 1])
        assert np.max(np.abs(r - 1)) < 0.01

    def test_constant(self):
        pts = delay_embed(np.full(50, 3.0), tau=2, m=3)
        assert np.all(pts == 3.0)

    def test_logistic_parabola(self):
        x = logistic_series(4.0, 0.3, 5000)
        pts = delay_embed(x, tau=1, m=2)
        assert np.max(np.abs(pts[:, 1] - 4 * pts[:, 0] * (1 - pts[:, 0]))) < 1e-9

    def test_default_tau_is_first_autocorrelation_zero(self):
        x = sine(1.0, 40.0, 4000)
        # the exact zero sits at lag 10; rounding may push the crossing one lag later
        tau = first_zero_autocorr(x)
        assert tau in (10, 11)
        assert delay_embed(x, m=2).shape == (4000 - tau, 2)

    def test_too_long(self):
        with pytest.raises(PreconditionError):
            delay_embed(np.arange(10.0), tau=5, m=3)

    def test_dominant_frequency(self):
        f, prom = dominant_frequency(sine(0.125, 1.0, 8192), 1.0)
        assert f == pytest.approx(0.125)
        assert prom > 40


class TestDensity:
    def test_identical_points(self):
        g = density_grid(np.ones((100, 2)), bins=16)
        assert g.mass.max() == 1.0
        assert np.count_nonzero(g.mass) == 1

    def test_circle_annulus(self):
        th = np.linspace(0, 2 * np.pi, 20_000, endpoint=False)
        g = density_grid(np.column_stack([np.cos(th), np.sin(th)]), bins=32)
        xe, ye = g.edges()
        xc, yc = 0.5 * (xe[1:] + xe[:-1]), 0.5 * (ye[1:] + ye[:-1])
        r = np.hypot(*np.meshgrid(xc, yc, indexing="ij"))
        assert g.mass[r < 0.8].sum() == 0.0
        assert g.mass[(r > 0.9) & (r < 1.1)].sum() > 0.95

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 400), st.just(2)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)), st.integers(1, 40))
    def test_mass_conservation(self, pts, bins):
        g = density_grid(pts, bins=bins)
        assert abs(g.mass.sum() - 1) <= 1e-12
        assert np.all(g.mass >= 0)

    def test_empty(self):
        with pytest.raises(PreconditionError):
            density_grid(np.empty((0, 2)))

    def test_csv_with_bounds(self, tmp_path):
        g = density_grid(np.random.default_rng(1).standard_normal((500, 2)), bins=8)
        g.to_csv(tmp_path / "d.csv")
        assert np.loadtxt(tmp_path / "d.csv", delimiter=",").shape == (8, 8)
        assert (tmp_path / "d.csv.json").exists()

    def test_intermittent_annulus_between(self):
        pts = {D: delay_embed(fixture(D, 4096, 2**16, 1.0, 1 / 8, seed=4).series.values, tau=2, m=2)
               for D in (0.0, 0.5, 1.0)}
        bounds = (-4.0, 4.0, -4.0, 4.0)
        support = density_grid(pts[0.0], bins=64, bounds=bounds).support()
        mass = {D: density_grid(p, bins=64, bounds=bounds).mass_on(support) for D, p in pts.items()}
        assert mass[0.0] == pytest.approx(1.0)
        assert mass[1.0] < mass[0.5] < mass[0.0]
