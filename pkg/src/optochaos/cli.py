"""Command-line entry point.

Exit codes: 0 success, 2 precondition violation, 3 numerical divergence,
4 insufficient data.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import DivergenceError, InsufficientDataError, OptochaosError, PreconditionError
from .model import Trajectory, integrate
from .params import load_params
from .regime import default_segmenter, regime_classify
from .segmentation import fit_duty_cycle, require_epochs
from .sensing import regime_comparison, write_reports, ordering_summary
from .spectral import delay_embed, density_grid, spectral_floor, welch_psd
from .synthesis import TimeSeries, fixture
from .sweep import SweepResult, load_plan, render_report, run_sweep

DEFAULT_REGIMES = ("regimes/periodic.cfg", "regimes/intermittent.cfg", "regimes/chaotic.cfg")


# ---------------------------------------------------------------- helpers

def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(args, path=None):
    path = path or args.config
    if path is None:
        raise PreconditionError("this command needs --config")
    resolved = cfgmod.resolve_config_path(path)
    p, seed = load_params(resolved)
    if args.seed is not None:
        seed = args.seed
    return p, seed, cfgmod.load(resolved)


def read_input(path):
    """Load a trajectory CSV (``t,intensity,x,v``) or a series CSV (``t,value[,label]``)."""
    path = Path(path)
    if not path.is_file():
        raise PreconditionError(f"input file not found: {path}")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[:4] == ["t", "intensity", "x", "v"]:
        return Trajectory.load(path)
    if header[:2] == ["t", "value"]:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if len(data) < 2:
            raise InsufficientDataError(f"{path}: need at least 2 samples")
        side = path.with_suffix(path.suffix + ".json")
        fs = json.loads(side.read_text())["fs"] if side.is_file() else 1.0 / (data[1, 0] - data[0, 0])
        return TimeSeries(data[:, 1], fs, float(data[0, 0]))
    raise PreconditionError(f"{path}: unrecognized header {','.join(header)!r}")


def _series_values(data, observable):
    if isinstance(data, Trajectory):
        return np.asarray(getattr(data, observable)), data.fs
    return data.values, data.fs


def _segmenter(args, data):
    period = None
    if isinstance(data, Trajectory) and data.params.get("omega_m"):
        period = 2 * np.pi / data.params["omega_m"]
    if args.config:
        seg = cfgmod.segmenter_from_config(cfgmod.load(args.config), data.fs, period)
    else:
        seg = default_segmenter(data)
    if getattr(args, "window", None):
        seg.set_params(window=args.window)
    return seg


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    p, seed, _ = _params(args)
    if args.t_record_periods is not None:
        p = p.replace(t_record=args.t_record_periods * p.mechanical_period)
    traj = integrate(p, seed=seed)
    path = _out(args) / "trajectory.csv"
    traj.save(path)
    print(f"wrote {len(traj)} samples to {path}")
    return 0


def cmd_synthesize(args) -> int:
    fs = args.fs
    f0 = args.f0 if args.f0 is not None else fs / 8
    seed = 0 if args.seed is None else args.seed
    fx = fixture(args.duty, args.ts, args.duration, fs, f0, seed=seed, noise=args.noise)
    path = _out(args) / "synthetic.csv"
    t = fx.series.t
    np.savetxt(path, np.column_stack([t, fx.series.values, fx.labels]), fmt=["%.17g", "%.17g", "%d"],
               delimiter=",", header="t,value,label", comments="")
    _dump(path.with_suffix(".csv.json"), {
        "fs": fs, "f0": f0, "duration": args.duration, "seed": seed, "noise": args.noise,
        "spec": {"Ts": fx.spec.Ts, "D": fx.spec.D, "phase": fx.spec.phase},
        "chaotic_fraction": fx.chaotic_fraction,
    })
    print(f"wrote {len(t)} samples to {path} (true chaotic fraction {fx.chaotic_fraction:.4f})")
    return 0


def cmd_segment(args) -> int:
    data = read_input(args.input)
    values, _ = _series_values(data, args.observable)
    seg = _segmenter(args, data)
    if args.calibrate:
        ref = read_input(args.calibrate)
        seg.fit(_series_values(ref, args.observable)[0])
    else:
        seg.fit()
    report = seg.segment(values, t0=data.t0)
    out = _out(args)
    doc = report.to_dict()
    fit = fit_duty_cycle(report, seed=0 if args.seed is None else args.seed)
    doc["duty_cycle"] = {"status": fit.status, "D": fit.D, "D_halfwidth": fit.D_halfwidth,
                         "Ts": fit.Ts, "Ts_halfwidth": fit.Ts_halfwidth, "n_epochs": fit.n_epochs}
    _dump(out / "segments.json", doc)
    centres = data.t0 + np.arange(0, len(values) / data.fs - report.window + 1e-12, report.hop) + report.window / 2
    np.savetxt(out / "labels.csv", np.column_stack([centres, report.label_at(centres)]),
               fmt=["%.17g", "%d"], delimiter=",", header="t,label", comments="")
    print(f"chaotic fraction {report.chaotic_fraction:.4f} over {len(report.segments)} epochs")
    if args.fit_duty_cycle:
        require_epochs(fit)
        print(f"duty cycle {fit.D:.4f} +/- {fit.D_halfwidth}, period {fit.Ts}")
    return 0


def cmd_spectrum(args) -> int:
    data = read_input(args.input)
    values, fs = _series_values(data, args.observable)
    x = values - values.mean()
    spec = welch_psd(x, fs, args.nfft or min(len(x), 4096), args.overlap, args.window)
    path = _out(args) / "spectrum.csv"
    spec.to_csv(path)
    try:
        floor = f"{spectral_floor(spec):.2f} dB"
    except PreconditionError as exc:
        floor = f"n/a ({exc})"
    print(f"wrote {len(spec.freqs)} bins to {path}; floor {floor}")
    return 0


def cmd_portrait(args) -> int:
    data = read_input(args.input)
    if isinstance(data, Trajectory):
        pts = np.column_stack([data.x, data.v])
    else:
        pts = delay_embed(data.values, args.tau, 2)
    grid = density_grid(pts, bins=args.bins)
    path = _out(args) / "density.csv"
    grid.to_csv(path)
    print(f"wrote {grid.bins}x{grid.bins} density grid to {path}")
    return 0


def cmd_classify(args) -> int:
    if args.input:
        data = read_input(args.input)
    else:
        p, seed, _ = _params(args)
        data = integrate(p, seed=seed)
    seg = _segmenter(args, data)
    obs = cfgmod.observable_from_config(cfgmod.load(args.config)) if args.config else "intensity"
    res = regime_classify(data, seg, obs if isinstance(data, Trajectory) else "intensity",
                          with_lyapunov=args.lyapunov)
    _dump(_out(args) / "regime.json", res.to_dict())
    print(f"{res.regime.value} (chaotic fraction {res.evidence.chaotic_fraction:.4f}, "
          f"floor {res.evidence.floor_elevation_db:.1f} dB)")
    return 0


def cmd_sense(args) -> int:
    paths = args.configs or ([args.config] if args.config else list(DEFAULT_REGIMES))
    items = []
    seed = args.seed
    stim = band = None
    for path in paths:
        resolved = cfgmod.resolve_config_path(path)
        p, cfg_seed = load_params(resolved)
        cp = cfgmod.load(resolved)
        seed = cfg_seed if seed is None else seed
        if stim is None:
            amp = args.amplitude
            if amp is None and args.amplitude_per_omega_m is not None:
                amp = args.amplitude_per_omega_m * p.omega_m
            stim = cfgmod.stimulus_from_config(cp, p, f_u=args.f_u, amplitude=amp, P_u=args.p_u,
                                               coupling=args.coupling)
            band = args.b if args.b is not None else cfgmod.bandwidth_from_config(cp)
        items.append((Path(path).stem, p))
    reports = regime_comparison(items, stim, seed=seed, B=band)
    out = _out(args)
    write_reports(reports, out / "sensing.json", out / "ranking.csv")
    for r in reports:
        if r.ok:
            print(f"{r.name:>14s}  {r.regime:<18s} SNR {r.snr_db:7.2f} dB  NEP {r.nep:.3e} W/rtHz")
        else:
            print(f"{r.name:>14s}  failed: {r.message}")
    summary = ordering_summary(reports)
    print(f"SNR order: {' > '.join(summary['order'])}; intermittent maximum: {summary['intermittent_is_maximum']}")
    return max((_exit_code_for(r.message) for r in reports if not r.ok), default=0)


def _exit_code_for(message: str) -> int:
    """Exit code of the error class named at the start of a failure message."""
    name = message.split(":", 1)[0]
    for cls in (PreconditionError, DivergenceError, InsufficientDataError):
        if cls.__name__ == name:
            return cls.exit_code
    return 1


def cmd_sweep(args) -> int:
    if args.config is None:
        raise PreconditionError("sweep needs --config <sweep config>")
    plan = load_plan(args.config, master_seed=args.seed)
    out = _out(args)
    result = run_sweep(plan, out, jobs=args.jobs)
    render_report(result, out)
    failed = sum(r.status != "ok" for r in result.rows)
    print(f"{len(result.rows)} points ({failed} failed); Spearman vs |value| {result.spearman():.3f}; "
          f"results in {out}")
    return 0


def cmd_report(args) -> int:
    src = Path(args.input) if args.input else Path(args.out)
    result = SweepResult.read(src)
    path = render_report(result, src if src.is_dir() else src.parent, _out(args))
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------- parser

def _globals(parser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)  # noqa: E731
    parser.add_argument("--config", default=d(None), help="config file (path or shipped name)")
    parser.add_argument("--seed", type=int, default=d(None), help="seed override (unsigned 64-bit)")
    parser.add_argument("--out", default=d("optochaos_out"), help="output directory")
    parser.add_argument("--jobs", type=int, default=d(1), help="worker processes for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optochaos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        _globals(sp, suppress=True)
        sp.set_defaults(func=fn)
        return sp

    sp = add("simulate", cmd_simulate, "integrate a config and write the trajectory")
    sp.add_argument("--t-record-periods", type=float)

    sp = add("synthesize", cmd_synthesize, "write a gated periodic/chaotic fixture")
    sp.add_argument("--duty", type=float, required=True, help="duty cycle D")
    sp.add_argument("--ts", type=float, required=True, help="gating period (s)")
    sp.add_argument("--duration", type=float, required=True, help="length (s)")
    sp.add_argument("--fs", type=float, default=1.0)
    sp.add_argument("--f0", type=float, help="periodic source frequency, fs/8 by default")
    sp.add_argument("--noise", type=float, default=0.0)

    for name, fn, help_ in (("segment", cmd_segment, "label periodic and chaotic epochs"),
                            ("classify", cmd_classify, "three-way regime label")):
        sp = add(name, fn, help_)
        sp.add_argument("--input", required=(name == "segment"))
        sp.add_argument("--observable", default="intensity", choices=("intensity", "x", "v"))
        sp.add_argument("--window", type=float, help="window length (s)")
        if name == "segment":
            sp.add_argument("--calibrate", help="periodic reference for the return-error threshold")
            sp.add_argument("--fit-duty-cycle", action="store_true",
                            help="exit 4 unless at least 3 chaotic epochs are found")
        else:
            sp.add_argument("--lyapunov", action="store_true")

    sp = add("spectrum", cmd_spectrum, "Welch power spectral density")
    sp.add_argument("--input", required=True)
    sp.add_argument("--observable", default="intensity", choices=("intensity", "x", "v"))
    sp.add_argument("--nfft", type=int)
    sp.add_argument("--overlap", type=float, default=0.5)
    sp.add_argument("--window", default="hann")

    sp = add("portrait", cmd_portrait, "phase-space density grid")
    sp.add_argument("--input", required=True)
    sp.add_argument("--bins", type=int, default=64)
    sp.add_argument("--tau", type=int, help="embedding delay for scalar series")

    sp = add("sense", cmd_sense, "stimulus response, SNR and NEP per regime")
    sp.add_argument("--configs", nargs="+", help="regime configs, the shipped triple by default")
    sp.add_argument("--f-u", type=float, help="stimulus frequency (Hz)")
    sp.add_argument("--amplitude", type=float, help="stimulus amplitude (SI)")
    sp.add_argument("--amplitude-per-omega-m", type=float)
    sp.add_argument("--p-u", type=float, help="nominal stimulus power (W)")
    sp.add_argument("--b", type=float, help="bandwidth for NEP (Hz); the resolution bandwidth by default")
    sp.add_argument("--coupling", choices=("force", "drive"))

    add("sweep", cmd_sweep, "run a parameter sweep")

    sp = add("report", cmd_report, "render the report of a finished sweep")
    sp.add_argument("--input", help="sweep directory, --out by default")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except OptochaosError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
