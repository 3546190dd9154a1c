"""Reproducible parameter sweeps and their reports.

Every point of a sweep integrates the model with one value of the swept
field, segments and classifies the record and stores its artifacts in its
own directory.  Per-point seeds come from ``numpy.random.SeedSequence``:
point ``i`` (in ascending order of the swept value) uses the first 32-bit
word of ``SeedSequence(master_seed, spawn_key=(i,))``, so the result does
not depend on how many workers run the points or in which order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .config import observable_from_config, resolve_config_path, segmenter_from_config
from .errors import OptochaosError, PreconditionError
from .model import integrate
from .params import params_from_mapping, read_config
from .regime import floor_elevation, label_for_fraction
from .spectral import density_grid, welch_psd

SEED_POLICIES = ("spawn", "fixed")
SWEEP_FILE = "sweep.json"


@dataclass(frozen=True)
class SweepPlan:
    """What to sweep and how.

    ``field`` names a :class:`SystemParams` field, optionally with the
    ``_per_omega_m`` suffix, in which case ``values`` are in units of the
    mechanical frequency.  ``sections`` keeps the raw config sections
    (``system``, ``integration``, ``segmentation``) every point starts from.
    """

    field: str
    values: tuple[float, ...]
    master_seed: int = 0
    seed_policy: str = "spawn"
    lyapunov: bool = True
    save_trajectory: bool = True
    sections: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = tuple(sorted(float(v) for v in self.values))
        if not vals:
            raise PreconditionError("sweep needs at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise PreconditionError("sweep values must be finite")
        if self.seed_policy not in SEED_POLICIES:
            raise PreconditionError(f"seed_policy must be one of {SEED_POLICIES}")
        object.__setattr__(self, "values", vals)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = list(self.values)
        return d

    def plan_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def seed_for(self, index: int) -> int:
        if self.seed_policy == "fixed":
            return int(self.master_seed)
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(index),))
        return int(ss.generate_state(1, np.uint32)[0])

    def params_for(self, value: float):
        system = dict(self.sections.get("system", {}))
        base = self.field.removesuffix("_per_omega_m")
        for key in (base, f"{base}_per_omega_m"):
            system.pop(key, None)
        system[self.field] = repr(float(value))
        return params_from_mapping(system, self.sections.get("integration", {}))


def _parse_values(sec: dict) -> list[float]:
    if "values" in sec:
        return [float(v) for v in sec["values"].replace("\n", ",").split(",") if v.strip()]
    if {"start", "stop", "n"} <= sec.keys():
        return list(np.linspace(float(sec["start"]), float(sec["stop"]), int(sec["n"])))
    raise PreconditionError("[sweep] needs either 'values' or 'start', 'stop' and 'n'")


def _flag(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise PreconditionError(f"not a boolean: {raw!r}")


def load_plan(path, master_seed: int | None = None) -> SweepPlan:
    """Read a sweep config; ``master_seed`` overrides the file's value."""
    cp = read_config(resolve_config_path(path))
    if not cp.has_section("sweep"):
        raise PreconditionError(f"{path}: missing [sweep] section")
    sec = dict(cp["sweep"])
    sections = {name: dict(cp[name]) for name in ("system", "integration", "segmentation")
                if cp.has_section(name)}
    sections.get("integration", {}).pop("seed", None)
    plan = SweepPlan(
        field=sec.get("field", "delta").strip(),
        values=tuple(_parse_values(sec)),
        master_seed=int(sec.get("master_seed", 0)) if master_seed is None else int(master_seed),
        seed_policy=sec.get("seed_policy", "spawn").strip(),
        lyapunov=_flag(sec.get("lyapunov", "true")),
        save_trajectory=_flag(sec.get("save_trajectory", "true")),
        sections=sections,
    )
    plan.params_for(plan.values[0])  # validates field name and sections early
    return plan


@dataclass(frozen=True)
class SweepRow:
    index: int
    value: float
    seed: int
    status: str
    value_si: float | None = None
    chaotic_fraction: float | None = None
    regime: str | None = None
    lyapunov: float | None = None
    floor_db: float | None = None
    artifacts: dict = field(default_factory=dict)
    message: str = ""


@dataclass(frozen=True)
class SweepResult:
    plan: SweepPlan
    rows: tuple[SweepRow, ...]
    version: str = __version__

    @property
    def plan_hash(self) -> str:
        return self.plan.plan_hash()

    def to_dict(self) -> dict:
        return {"version": self.version, "plan_hash": self.plan_hash, "plan": self.plan.to_dict(),
                "rows": [asdict(r) for r in self.rows]}

    def fractions(self) -> np.ndarray:
        return np.array([r.chaotic_fraction if r.status == "ok" else np.nan for r in self.rows])

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])

    def spearman(self, key=np.abs) -> float:
        """Rank correlation of the chaotic fraction with ``key(value)`` over successful rows."""
        ok = np.isfinite(self.fractions())
        if ok.sum() < 3:
            return float("nan")
        return float(stats.spearmanr(key(self.values()[ok]), self.fractions()[ok]).statistic)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / SWEEP_FILE
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path) -> SweepResult:
        path = Path(path)
        if path.is_dir():
            path = path / SWEEP_FILE
        if not path.is_file():
            raise PreconditionError(f"no sweep result at {path}")
        d = json.loads(path.read_text())
        plan = SweepPlan(**{k: (tuple(v) if k == "values" else v) for k, v in d["plan"].items()})
        rows = tuple(SweepRow(**r) for r in d["rows"])
        return cls(plan, rows, d.get("version", ""))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def run_point(plan: SweepPlan, index: int, out_dir) -> SweepRow:
    """Integrate, segment and classify one point; failures give a failed row."""
    value = plan.values[index]
    seed = plan.seed_for(index)
    point_dir = Path(out_dir) / f"point_{index:03d}"
    point_dir.mkdir(parents=True, exist_ok=True)
    provenance = {"plan_hash": plan.plan_hash(), "seed": seed, "index": index, "value": value,
                  "field": plan.field}
    try:
        p = plan.params_for(value)
        value_si = getattr(p, plan.field.removesuffix("_per_omega_m"))
        traj = integrate(p, seed=seed)
        cp = _sections_parser(plan.sections)
        period = 2 * math.pi / p.omega_m
        seg = segmenter_from_config(cp, traj.fs, period)
        signal = getattr(traj, observable_from_config(cp))
        report = seg.segment(signal, t0=traj.t0)
        frac = report.chaotic_fraction
        regime = label_for_fraction(frac).value
        floor = floor_elevation(signal, traj.fs)
        lyap = None
        if plan.lyapunov:
            from .lyapunov import lyapunov_benettin

            lyap = lyapunov_benettin(p, t_total=p.t_record, seed=seed).exponent / p.omega_m

        artifacts = {}
        if plan.save_trajectory:
            traj.save(point_dir / "trajectory.csv")
            artifacts["trajectory"] = f"{point_dir.name}/trajectory.csv"
        _write_json(point_dir / "segments.json", {**provenance, **report.to_dict()})
        artifacts["segments"] = f"{point_dir.name}/segments.json"
        x = signal - signal.mean()
        spec = welch_psd(x, traj.fs, min(len(x), 4096))
        spec.to_csv(point_dir / "spectrum.csv")
        _write_json(point_dir / "spectrum.csv.json", provenance)
        artifacts["spectrum"] = f"{point_dir.name}/spectrum.csv"
        grid = density_grid(np.column_stack([traj.x, traj.v]), bins=64)
        grid.to_csv(point_dir / "density.csv")
        meta = json.loads((point_dir / "density.csv.json").read_text())
        _write_json(point_dir / "density.csv.json", {**meta, **provenance})
        artifacts["density"] = f"{point_dir.name}/density.csv"
        row = SweepRow(index, value, seed, "ok", float(value_si), float(frac), regime, lyap,
                       float(floor), artifacts)
    except OptochaosError as exc:
        row = SweepRow(index, value, seed, "failed", message=f"{type(exc).__name__}: {exc}")
    _write_json(point_dir / "point.json", {**provenance, "row": asdict(row)})
    return row


def _sections_parser(sections: dict):
    import configparser

    cp = configparser.ConfigParser()
    for name, sec in sections.items():
        cp[name] = sec
    return cp


def _run_point_args(args):
    return run_point(*args)


def run_sweep(plan: SweepPlan, out_dir, jobs: int = 1) -> SweepResult:
    """Run every point and write ``sweep.json``; rows follow the swept value."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PreconditionError(f"output directory {out} is not writable")
    if jobs < 1:
        raise PreconditionError(f"jobs must be >= 1, got {jobs}")
    tasks = [(plan, i, str(out)) for i in range(len(plan.values))]
    if jobs == 1 or len(tasks) == 1:
        rows = [run_point(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point_args, tasks))
    rows.sort(key=lambda r: r.index)
    result = SweepResult(plan, tuple(rows))
    result.write(out)
    return result


def _representatives(result: SweepResult) -> dict:
    """First successful row of each regime, in sweep order."""
    reps = {}
    for r in result.rows:
        if r.status == "ok":
            reps.setdefault(r.regime, r)
    return reps


def render_report(result: SweepResult, sweep_dir, out_dir=None) -> Path:
    """Write ``report.md`` and plot-ready CSVs next to the sweep.

    Produces ``fraction_vs_value.csv`` and, for one point per regime,
    copies of its spectrum and density grid under ``spectra/`` and
    ``density/``.  Missing artifacts are noted in the text.
    """
    sweep_dir = Path(sweep_dir)
    out = Path(out_dir) if out_dir is not None else sweep_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "spectra").mkdir(exist_ok=True)
    (out / "density").mkdir(exist_ok=True)

    with open(out / "fraction_vs_value.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "value_si", "chaotic_fraction", "regime", "lyapunov_per_omega_m",
                    "floor_db", "status", "seed"])
        for r in result.rows:
            w.writerow([repr(r.value), repr(r.value_si), repr(r.chaotic_fraction), r.regime or "",
                        repr(r.lyapunov), repr(r.floor_db), r.status, r.seed])

    notes = []
    for regime, r in _representatives(result).items():
        for kind, sub in (("spectrum", "spectra"), ("density", "density")):
            rel = r.artifacts.get(kind)
            src = sweep_dir / rel if rel else None
            if src is None or not src.is_file():
                notes.append(f"- {kind} for {regime} (point {r.index}) is missing")
                continue
            (out / sub / f"{regime}.csv").write_bytes(src.read_bytes())

    fr = result.fractions()
    ok = np.isfinite(fr)
    lines = [
        "# Sweep report",
        "",
        f"- plan hash: `{result.plan_hash}`",
        f"- toolkit version: {result.version}",
        f"- swept field: `{result.plan.field}` ({len(result.rows)} points, master seed {result.plan.master_seed})",
        f"- failed points: {int((~ok).sum())}",
    ]
    if ok.any():
        lines += [
            f"- chaotic fraction: first {fr[ok][0]:.3f}, last {fr[ok][-1]:.3f}",
            f"- Spearman rank correlation with |{result.plan.field}|: {result.spearman():.3f}",
        ]
    lines += ["", "| # | value | fraction | regime | lyapunov / omega_m | floor dB | status |",
              "|---|---|---|---|---|---|---|"]
    for r in result.rows:
        fmt = (lambda v, f: "" if v is None else format(v, f))  # noqa: E731
        lines.append(f"| {r.index} | {r.value:.6g} | {fmt(r.chaotic_fraction, '.3f')} | {r.regime or ''} | "
                     f"{fmt(r.lyapunov, '.4f')} | {fmt(r.floor_db, '.1f')} | {(r.status + ' ' + r.message).strip()} |")
    if notes:
        lines += ["", "## Missing artifacts", "", *notes]
    path = out / "report.md"
    path.write_text("\n".join(lines) + "\n")
    return path
