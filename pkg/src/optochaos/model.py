"""Classical single-mode optomechanics: equations of motion and integration.

The model is

    da/dt = [i (delta + g0 x) - kappa/2] a + sqrt(kappa_ex) a_in
    dx/dt = omega_m v
    dv/dt = -omega_m x - gamma_m v + g0 |a|^2 / omega_m + f(t) + noise

integrated with a fixed-step classical RK4.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .errors import DivergenceError, PreconditionError
from .params import State, SystemParams

ForceFunction = Callable[[np.ndarray], np.ndarray]

CHUNK_STEPS = 1 << 16


class StateDerivative(NamedTuple):
    a_re: float
    a_im: float
    x: float
    v: float


def _pvec(p: SystemParams) -> np.ndarray:
    return np.array([p.delta, p.kappa, p.kappa_ex, p.omega_m, p.gamma_m, p.g0, p.drive_amplitude])


def _as_state(s) -> State:
    if isinstance(s, State):
        return s
    if s is None:
        return State()
    return State(*s)


def derivatives(s: State, p: SystemParams, t: float = 0.0, force: float = 0.0) -> StateDerivative:
    """Right-hand side of the deterministic flow at ``(s, t)``.

    ``force`` is the external force on ``v`` at time ``t``; the stochastic
    term is not part of the vector field.
    """
    s = _as_state(s)
    if not math.isfinite(force):
        raise PreconditionError(f"force is not finite ({force!r})")
    phase = p.delta + p.g0 * s.x
    e = math.sqrt(p.kappa_ex) * p.drive_amplitude
    return StateDerivative(
        -phase * s.a_im - 0.5 * p.kappa * s.a_re + e,
        phase * s.a_re - 0.5 * p.kappa * s.a_im,
        p.omega_m * s.v,
        -p.omega_m * s.x - p.gamma_m * s.v + p.g0 * s.intensity / p.omega_m + force,
    )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled output of :func:`integrate`.

    ``samples`` has columns (intensity, x, v); sample ``k`` is taken at
    ``t0 + k / fs``.
    """

    t0: float
    fs: float
    samples: np.ndarray
    params_hash: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float, copy=True).reshape(-1, 3)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.fs

    @property
    def intensity(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def v(self) -> np.ndarray:
        return self.samples[:, 2]

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    def scaled(self, factor: float) -> Trajectory:
        """Same trajectory with every column multiplied by ``factor``."""
        return Trajectory(self.t0, self.fs, self.samples * factor, self.params_hash, self.params, self.seed)

    def identical_to(self, other: Trajectory) -> bool:
        return (
            self.t0 == other.t0
            and self.fs == other.fs
            and self.samples.shape == other.samples.shape
            and self.samples.tobytes() == other.samples.tobytes()
        )

    def save(self, path) -> None:
        """Write ``<path>`` as CSV ``t,intensity,x,v`` plus ``<path>.json``."""
        path = Path(path)
        data = np.column_stack([self.t, self.samples])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header="t,intensity,x,v", comments="")
        meta = {"t0": self.t0, "fs": self.fs, "params_hash": self.params_hash,
                "params": self.params, "seed": self.seed, "n_samples": len(self)}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> Trajectory:
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        side = path.with_suffix(path.suffix + ".json")
        if side.exists():
            meta = json.loads(side.read_text())
            return cls(meta["t0"], meta["fs"], data[:, 1:4], meta["params_hash"],
                       meta.get("params", {}), meta.get("seed", 0))
        if data.shape[0] < 2:
            raise PreconditionError(f"{path}: need >= 2 samples to infer the sample rate")
        fs = 1.0 / (data[1, 0] - data[0, 0])
        return cls(data[0, 0], fs, data[:, 1:4], "unknown")


def _stim_grid(fn, step0: int, n: int, dt: float) -> np.ndarray:
    if fn is None:
        return np.empty(0)
    t = (step0 + 0.5 * np.arange(2 * n + 1)) * dt
    vals = np.asarray(fn(t), dtype=float)
    if vals.shape != t.shape:
        vals = np.broadcast_to(vals, t.shape).astype(float)
    if not np.all(np.isfinite(vals)):
        raise PreconditionError("stimulus returned non-finite values")
    return np.ascontiguousarray(vals)


def integrate(
    p: SystemParams,
    s0: State | None = None,
    stimulus: ForceFunction | None = None,
    seed: int = 0,
    drive_modulation: ForceFunction | None = None,
) -> Trajectory:
    """Integrate the model with fixed-step RK4.

    The first ``t_transient`` seconds are discarded, then ``round(t_record * fs)``
    samples of (|a|^2, x, v) are kept every ``decimation`` steps.

    Parameters
    ----------
    p : SystemParams
    s0 : State, optional
        Initial condition, zero state by default.
    stimulus : callable, optional
        Vectorized additive force on ``v``; evaluated on the half-step grid.
    seed : int
        Seed for the per-step noise draws (used only when ``noise_sigma > 0``).
    drive_modulation : callable, optional
        Fractional modulation ``m(t)``; the drive becomes ``a_in (1 + m(t))``.

    Raises
    ------
    DivergenceError
        If any state component exceeds 1e12 in magnitude.
    """
    s0 = _as_state(s0)
    dec = p.decimation
    n_rec = int(round(p.t_record * p.fs))
    n_tr = int(round(p.t_transient / p.dt))
    total = n_tr + max(n_rec - 1, 0) * dec if n_rec > 0 else n_tr

    out = np.empty((n_rec, 3))
    pos = 0
    state = np.array(s0.as_tuple(), dtype=float)
    if n_rec > 0 and n_tr == 0:
        out[0] = (s0.intensity, s0.x, s0.v)
        pos = 1
    pv = _pvec(p)
    rng = np.random.default_rng(seed) if p.noise_sigma > 0 else None
    noise_scale = p.noise_sigma * math.sqrt(p.dt)

    step = 0
    while step < total:
        m = min(CHUNK_STEPS, total - step)
        force = _stim_grid(stimulus, step, m, p.dt)
        mod = _stim_grid(drive_modulation, step, m, p.dt)
        noise = rng.standard_normal(m) if rng is not None else np.empty(0)
        pos, bad = _kernels.rk4_chunk(state, pv, m, p.dt, force, mod, noise, noise_scale,
                                      step, n_tr, dec, out, pos)
        if bad >= 0:
            names = ("a_re", "a_im", "x", "v")
            worst = names[int(np.argmax(np.where(np.isfinite(state), np.abs(state), np.inf)))]
            raise DivergenceError((step + bad + 1) * p.dt, worst)
        step += m

    return Trajectory(
        t0=n_tr * p.dt,
        fs=p.fs,
        samples=out[:pos],
        params_hash=p.params_hash(),
        params=p.to_dict(),
        seed=int(seed),
    )


def steady_state(p: SystemParams) -> State:
    """Static equilibrium with the smallest displacement.

    Solves ``x (kappa^2/4 + (delta + g0 x)^2) = g0 kappa_ex a_in^2 / omega_m^2``
    for ``x`` and returns the matching field.
    """
    c = p.g0 * p.kappa_ex * p.drive_amplitude**2 / p.omega_m**2
    if p.g0 == 0 or c == 0:
        x = 0.0
    else:
        # x * ((delta + g0 x)^2 + kappa^2/4) - c = 0
        coeffs = [p.g0**2, 2 * p.delta * p.g0, p.delta**2 + p.kappa**2 / 4, -c]
        roots = np.roots(coeffs)
        real = roots[np.abs(roots.imag) < 1e-9 * (1 + np.abs(roots.real))].real
        x = float(real[np.argmin(np.abs(real))])
    phase = p.delta + p.g0 * x
    a = math.sqrt(p.kappa_ex) * p.drive_amplitude / complex(p.kappa / 2, -phase)
    return State(a.real, a.imag, x, 0.0)


class ThresholdResult(NamedTuple):
    found: bool
    drive: float | None
    resolution: float
    scanned: np.ndarray
    amplitudes: np.ndarray
    message: str = ""


def oscillation_amplitude(p: SystemParams, seed: int = 0, kick: float = 1e-6) -> float:
    """Half peak-to-peak of ``x`` on the recorded window, started from the
    static equilibrium displaced by ``kick``."""
    s = steady_state(p)
    s0 = State(s.a_re, s.a_im, s.x + kick * (1 + abs(s.x)), 0.0)
    traj = integrate(p, s0, seed=seed)
    if len(traj) == 0:
        raise PreconditionError("t_record yields no samples")
    return 0.5 * float(np.ptp(traj.x))


def find_threshold(
    p: SystemParams,
    drive_range: tuple[float, float],
    n_steps: int = 16,
    amplitude_floor: float = 1e-4,
    refine: int = 6,
) -> ThresholdResult:
    """Locate the self-oscillation threshold in drive amplitude.

    Scans ``n_steps`` drives across ``drive_range``; the threshold is the
    first drive whose steady oscillation amplitude exceeds ten times the
    baseline amplitude at the lower end of the range (baseline floored at
    ``amplitude_floor``).  The bracketing scan interval is then bisected
    ``refine`` times.  Returns ``found=False`` when no drive qualifies.

    The additive noise is switched off for the scan: the threshold belongs
    to the deterministic flow, and noise-driven fluctuations would raise
    the baseline of the comparison.
    """
    lo, hi = map(float, drive_range)
    if not (0 < lo < hi):
        raise PreconditionError(f"drive_range must be positive and increasing, got {drive_range!r}")
    if n_steps < 8:
        raise PreconditionError(f"n_steps must be >= 8, got {n_steps}")

    drives = np.linspace(lo, hi, n_steps)
    amps = np.empty(n_steps)

    def amp(d):
        return oscillation_amplitude(p.replace(drive_amplitude=d, noise_sigma=0.0))

    amps[0] = amp(lo)
    limit = 10.0 * max(amps[0], amplitude_floor)
    hit = None
    for i in range(1, n_steps):
        amps[i] = amp(drives[i])
        if amps[i] > limit:
            hit = i
            break
    step = (hi - lo) / (n_steps - 1)
    if hit is None:
        return ThresholdResult(False, None, step, drives, amps, "no threshold in range")

    a, b = drives[hit - 1], drives[hit]
    for _ in range(refine):
        mid = 0.5 * (a + b)
        if amp(mid) > limit:
            b = mid
        else:
            a = mid
    return ThresholdResult(True, float(b), float(b - a), drives[: hit + 1], amps[: hit + 1])
