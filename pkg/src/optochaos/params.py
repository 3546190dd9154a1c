"""Physical and numerical parameters of the optomechanical model.

Rates are angular frequencies in rad/s, times are in seconds.  The field
amplitude is normalized so that ``|a|^2`` is in photons * (rad/s) and the
mechanical coordinates ``x``, ``v`` are dimensionless.

Config files are INI-style with a ``[system]`` and an ``[integration]``
section, one key per field.  Besides the plain SI keys a few derived keys
are accepted so that files can state measured quantities directly; see
``docs/formats.md``.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import PreconditionError

SPEED_OF_LIGHT = 299_792_458.0

# Measured device values used by the default parameter pack.
MECHANICAL_FREQUENCY_HZ = 21.5e6
MECHANICAL_Q = 2.3e3
OPTICAL_Q = 1.07e7
CARRIER_WAVELENGTH_M = 1550e-9  # assumed, the device wavelength is not stated

STABILITY_LIMIT = 0.2

_RATE_FIELDS = ("delta", "kappa", "kappa_ex", "omega_m", "gamma_m", "g0", "drive_amplitude")
_TIME_FIELDS = ("dt", "t_transient", "t_record")


@dataclass(frozen=True)
class SystemParams:
    """Constants of the single-mode optomechanical model.

    Parameters
    ----------
    delta : float
        Laser-cavity detuning (rad/s).
    kappa : float
        Total optical energy decay rate (rad/s); the field decays at kappa/2.
    kappa_ex : float
        External coupling rate (rad/s), ``0 < kappa_ex <= kappa``.
    omega_m, gamma_m : float
        Mechanical resonance and damping (rad/s).
    g0 : float
        Frequency pull per unit displacement (rad/s).
    drive_amplitude : float
        Input field amplitude ``|a_in|``.
    noise_sigma : float
        Strength of the additive white force on ``v`` (s^-1/2); 0 disables it.
    dt : float
        Fixed integrator step (s).
    t_transient, t_record : float
        Discarded and recorded durations (s).
    decimation : int
        Integrator steps per recorded sample.
    """

    delta: float = 0.0
    kappa: float = 1.0
    kappa_ex: float = 0.5
    omega_m: float = 1.0
    gamma_m: float = 1e-3
    g0: float = 1.0
    drive_amplitude: float = 0.0
    noise_sigma: float = 0.0
    dt: float = 0.05
    t_transient: float = 0.0
    t_record: float = 100.0
    decimation: int = 1

    def __post_init__(self):
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if f.name == "decimation":
                if int(val) != val or val < 1:
                    raise PreconditionError(f"decimation must be a positive integer, got {val!r}")
                object.__setattr__(self, "decimation", int(val))
                continue
            val = float(val)
            if not math.isfinite(val):
                raise PreconditionError(f"{f.name} must be finite, got {val!r}")
            object.__setattr__(self, f.name, val)
        for name in ("kappa", "omega_m", "gamma_m", "dt"):
            if getattr(self, name) <= 0:
                raise PreconditionError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not 0 < self.kappa_ex <= self.kappa:
            raise PreconditionError(
                f"need 0 < kappa_ex <= kappa, got kappa_ex={self.kappa_ex!r}, kappa={self.kappa!r}"
            )
        if self.noise_sigma < 0 or self.t_transient < 0 or self.t_record < 0:
            raise PreconditionError("noise_sigma, t_transient and t_record must be >= 0")
        stiff = self.dt * max(self.kappa, self.omega_m)
        if stiff >= STABILITY_LIMIT:
            raise PreconditionError(
                f"dt * max(kappa, omega_m) = {stiff:.3g} violates the stability guard (< {STABILITY_LIMIT})"
            )

    @property
    def fs(self) -> float:
        """Recorded sample rate (Hz)."""
        return 1.0 / (self.dt * self.decimation)

    @property
    def mechanical_period(self) -> float:
        return 2 * math.pi / self.omega_m

    def replace(self, **changes) -> SystemParams:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def params_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class State:
    """Classical state: intracavity field quadratures and mechanical (x, v)."""

    a_re: float = 0.0
    a_im: float = 0.0
    x: float = 0.0
    v: float = 0.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            val = float(getattr(self, f.name))
            if not math.isfinite(val):
                raise PreconditionError(f"state component {f.name} is not finite ({val!r})")
            object.__setattr__(self, f.name, val)

    @property
    def intensity(self) -> float:
        return self.a_re**2 + self.a_im**2

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a_re, self.a_im, self.x, self.v)


def kappa_from_q(optical_q: float, wavelength: float = CARRIER_WAVELENGTH_M) -> float:
    return 2 * math.pi * SPEED_OF_LIGHT / wavelength / optical_q


def device_defaults(**overrides) -> SystemParams:
    """Default pack built from the measured device values.

    The mechanical mode sits at 21.5 MHz with Q_m = 2.3e3 and the optical
    mode has Q = 1.07e7 at an assumed 1550 nm carrier.  Coupling is taken
    critical (``kappa_ex = kappa / 2``) and ``g0 = omega_m`` fixes the
    displacement unit.  The step resolves 128 points per mechanical period
    and every 5th step is recorded (about 25.6 samples per period).
    """
    omega_m = 2 * math.pi * MECHANICAL_FREQUENCY_HZ
    kappa = kappa_from_q(OPTICAL_Q)
    period = 2 * math.pi / omega_m
    base = dict(
        delta=0.0,
        kappa=kappa,
        kappa_ex=kappa / 2,
        omega_m=omega_m,
        gamma_m=omega_m / MECHANICAL_Q,
        g0=omega_m,
        drive_amplitude=0.0,
        noise_sigma=0.0,
        dt=period / 128,
        t_transient=3000 * period,
        t_record=2000 * period,
        decimation=5,
    )
    base.update(overrides)
    return SystemParams(**base)


def _parse_system(section, scale_omega) -> dict:
    out = {}
    for key, raw in section.items():
        if key in ("mechanical_frequency", "mechanical_q", "optical_q", "carrier_wavelength",
                   "coupling_ratio", "notes"):
            continue
        if key == "noise_sigma_per_sqrt_omega_m":
            out["noise_sigma"] = float(raw) * math.sqrt(scale_omega)
        elif key.endswith("_per_omega_m"):
            name = key[: -len("_per_omega_m")]
            if name not in _RATE_FIELDS:
                raise PreconditionError(f"unknown scaled key {key!r}")
            out[name] = float(raw) * scale_omega
        elif key in _RATE_FIELDS or key == "noise_sigma":
            out[key] = float(raw)
        else:
            raise PreconditionError(f"unknown key [system] {key!r}")
    return out


def params_from_mapping(system: dict, integration: dict | None = None) -> SystemParams:
    """Build :class:`SystemParams` from parsed config sections (string values allowed).

    Unspecified fields fall back to :func:`device_defaults`.
    """
    system = {k.lower(): v for k, v in system.items()}
    integration = {k.lower(): v for k, v in (integration or {}).items()}
    base = device_defaults().to_dict()

    if "omega_m" in system:
        omega_m = float(system["omega_m"])
    elif "mechanical_frequency" in system:
        omega_m = 2 * math.pi * float(system["mechanical_frequency"])
    else:
        omega_m = base["omega_m"]
    explicit = _parse_system(system, omega_m)
    base["omega_m"] = omega_m
    base["gamma_m"] = omega_m / float(system.get("mechanical_q", MECHANICAL_Q))
    if "optical_q" in system:
        wl = float(system.get("carrier_wavelength", CARRIER_WAVELENGTH_M))
        base["kappa"] = kappa_from_q(float(system["optical_q"]), wl)
    base["kappa"] = explicit.get("kappa", base["kappa"])
    base["kappa_ex"] = base["kappa"] * float(system.get("coupling_ratio", 0.5))
    base["g0"] = omega_m
    base.update(explicit)

    period = 2 * math.pi / base["omega_m"]
    for key, raw in integration.items():
        if key == "seed":
            continue
        if key == "steps_per_period":
            base["dt"] = period / float(raw)
        elif key.endswith("_periods") and key[: -len("_periods")] in _TIME_FIELDS:
            base[key[: -len("_periods")]] = float(raw) * period
        elif key in _TIME_FIELDS:
            base[key] = float(raw)
        elif key == "decimation":
            base[key] = int(raw)
        else:
            raise PreconditionError(f"unknown key [integration] {key!r}")
    return SystemParams(**base)


def read_config(path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise PreconditionError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read(path)
    return cp


def load_params(path) -> tuple[SystemParams, int]:
    """Read ``(params, seed)`` from a config file."""
    cp = read_config(path)
    system = dict(cp["system"]) if cp.has_section("system") else {}
    integration = dict(cp["integration"]) if cp.has_section("integration") else {}
    seed = int(integration.get("seed", 0))
    return params_from_mapping(system, integration), seed


def write_params(path, params: SystemParams, seed: int = 0) -> None:
    cp = configparser.ConfigParser()
    d = params.to_dict()
    cp["system"] = {k: repr(d[k]) for k in (*_RATE_FIELDS, "noise_sigma")}
    cp["integration"] = {k: repr(d[k]) for k in (*_TIME_FIELDS, "decimation")}
    cp["integration"]["seed"] = str(int(seed))
    with open(path, "w") as fh:
        cp.write(fh)
