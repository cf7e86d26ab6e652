"""Batch command-line front end.

Every command reads an optional TOML config, applies --override pairs,
runs one simulation or analysis, and writes deterministic CSV/JSON
artifacts plus a manifest.json (version, seed, config hash, effective
config echo, output hashes) into the output directory.  Files are
written atomically (temp file then rename) and contain no timestamps,
so reruns with identical inputs are bitwise identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, _io, dynamics, fit, kernels, model, spectrum, tomography

OUTPUT_DIR_ENV = "NVBATH_OUTPUT_DIR"
_DEFAULT_OUTPUT_DIR = "nvbath_out"


class CliError(Exception):
    """User-facing command/config error; printed as a single line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _round9(x):
    return float(f"{float(x):.8e}")


class Emitter:
    """Collects output files, writes them atomically, and hashes them."""

    def __init__(self, outdir):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self.hashes = {}

    def write_text(self, name, text):
        path = self.outdir / name
        _io.atomic_write_text(path, text)
        self.hashes[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return path

    def write_csv(self, name, columns, metadata=None):
        return self.write_text(name, _io.csv_text(columns, metadata))

    def write_json(self, name, obj):
        return self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def manifest(self, command, cfg, args_echo, seed):
        cfg_text = model.dump_config(cfg)
        payload = {
            "command": command,
            "version": __version__,
            "kernel_backend": kernels.BACKEND,
            "seed": seed,
            "config_sha256": hashlib.sha256(cfg_text.encode("utf-8")).hexdigest(),
            "effective_config": cfg_text,
            "parameters": args_echo,
            "outputs": dict(sorted(self.hashes.items())),
        }
        self.write_text("manifest.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_effective_config(args):
    if args.config:
        cfg = model.load_config(args.config)
    else:
        cfg = model.default_config()
    items = [s.strip() for s in (args.override or [])]
    if items:
        cfg = model.apply_overrides(cfg, items)
    return cfg


def _args_echo(args):
    skip = {"func", "config", "output_dir"}
    echo = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if isinstance(value, (list, tuple)):
            echo[key] = list(value)
        elif isinstance(value, (str, int, float, bool)) or value is None:
            echo[key] = value
        else:
            echo[key] = str(value)
    return echo


def _tau_grid(tau_min, tau_max, tau_step):
    if not (tau_min > 0 and tau_max > tau_min and tau_step > 0):
        raise CliError("require 0 < tau-min < tau-max and tau-step > 0")
    count = int(round((tau_max - tau_min) / tau_step))
    return tau_min + tau_step * np.arange(count + 1)


def _even_n(n_max):
    n_max = int(n_max)
    if n_max < 2:
        raise CliError("n-max must be >= 2")
    return list(range(2, n_max + 1, 2))


def _scan(cfg, taus, n):
    return dynamics.coherence_scan(cfg.carbons, cfg.constants, taus, n)


def _ent(cfg, tau, n_max, carbons=None):
    carbons = cfg.carbons if carbons is None else carbons
    return dynamics.entanglement_trace(carbons, cfg.constants, tau, _even_n(n_max))


def cmd_coherence_scan(args, cfg, em):
    trace = _scan(cfg, _tau_grid(args.tau_min, args.tau_max, args.tau_step), args.n)
    em.write_csv(
        "coherence_scan.csv",
        {"tau": trace.x, "w": trace.w, "p0": dynamics.p0_from_w(trace.w)},
        {"n": trace.n, **trace.metadata},
    )


def cmd_entanglement_trace(args, cfg, em):
    trace = _ent(cfg, args.tau, args.n_max)
    em.write_csv(
        "entanglement_trace.csv",
        {"t": trace.t, "concurrence": trace.c, "w": trace.w},
        {"tau_us": _io.format_float(trace.tau), **trace.metadata},
    )


def cmd_spectrum(args, cfg, em):
    trace = _scan(cfg, _tau_grid(args.tau_min, args.tau_max, args.tau_step), args.n)
    spec = spectrum.reconstruct_spectrum([trace])
    em.write_csv(
        "spectrum.csv",
        {"omega_over_2pi_MHz": spec.omega / (2.0 * np.pi), "s_value": spec.s},
        {"n": trace.n, **spec.metadata},
    )


def _make_state(args):
    if args.state == "bell":
        return dynamics.dephased_bell_state(1.0)
    if args.state == "dephased-bell":
        return dynamics.dephased_bell_state(args.w)
    if args.state == "werner":
        return dynamics.werner_state(args.p)
    raise CliError(f"unknown state '{args.state}'")


def cmd_tomography_demo(args, cfg, em):
    rho_true = _make_state(args)
    if args.exact:
        cal = tomography.EXACT_CALIBRATION
    else:
        cal = tomography.ReadoutCalibration(args.cal_bright, args.cal_dark)
    records = tomography.simulate_counts(
        rho_true, shots=args.shots, cal=cal, seed=args.seed, exact=args.exact
    )
    em.write_text(
        "counts.csv",
        tomography.counts_to_csv_text(
            records, {"state": args.state, "shots": args.shots, "seed": args.seed}
        ),
    )
    rho = tomography.mle_reconstruct(records, cal=cal)
    em.write_text("rho_mle.txt", tomography.density_matrix_to_text(rho))
    em.write_json(
        "metrics.json",
        {
            "concurrence_true": _round9(tomography.concurrence(rho_true)),
            "concurrence_mle": _round9(tomography.concurrence(rho)),
            "fidelity": _round9(tomography.fidelity(rho_true, rho)),
            "trace_distance": _round9(tomography.trace_distance(rho_true, rho)),
            "shots": args.shots,
            "state": args.state,
        },
    )


def cmd_calibrate(args, cfg, em):
    if not 1 <= args.carbon <= len(cfg.carbons):
        raise CliError(f"carbon index must be in 1..{len(cfg.carbons)}")
    target = cfg.carbons[args.carbon - 1]
    others = [c for i, c in enumerate(cfg.carbons) if i != args.carbon - 1]
    trace = _scan(cfg, _tau_grid(args.tau_min, args.tau_max, args.tau_step), args.n)
    bounds = (
        (target.a_zz - args.azz_window, target.a_zz + args.azz_window),
        (target.a_xz - args.axz_window, target.a_xz + args.axz_window),
    )
    result = fit.calibrate_hyperfine(
        trace,
        args.carbon,
        bounds,
        fixed_others=others,
        constants=cfg.constants,
        threads=args.threads,
    )
    em.write_text("calibration.txt", result.to_text())
    em.write_text("calibration.json", result.to_json() + "\n")


def cmd_fit_decay(args, cfg, em):
    if args.input:
        _meta, cols = _io.read_csv(args.input)
        names = list(cols)
        t, y = cols[names[0]], cols[names[1]]
    else:
        t = np.linspace(0.0, 2.5 * args.t_decay, args.points)
        y = np.exp(-((t / args.t_decay) ** 2))
        if args.noise > 0:
            y = y + args.noise * np.random.default_rng(args.seed).standard_normal(t.size)
    result = fit.fit_gaussian_decay(t, y, with_floor=args.with_floor)
    fitted = result.params["a"] * np.exp(-((t / result.params["t_decay"]) ** 2)) + result.params.get(
        "floor", 0.0
    )
    em.write_csv("decay_trace.csv", {"t": t, "y": y, "y_fit": fitted})
    em.write_text("fit_decay.txt", result.to_text())
    em.write_text("fit_decay.json", result.to_json() + "\n")


def _repro_gaussian(em, name, t_decay, t_max, points):
    t = np.linspace(0.0, t_max, points)
    w = np.exp(-((t / t_decay) ** 2))
    result = fit.fit_gaussian_decay(t, w)
    em.write_csv(name + ".csv", {"t": t, "w": w}, {"t_decay_us": _io.format_float(t_decay)})
    em.write_json(
        name + "_fit.json",
        {k: _round9(v) for k, v in result.params.items()},
    )


def _repro_entanglement(em, cfg, name, tau, n_max, single=()):
    nvals = _even_n(n_max)
    cols = {}
    all_trace = dynamics.entanglement_trace(cfg.carbons, cfg.constants, tau, nvals)
    cols["t"] = all_trace.t
    cols["c_all"] = all_trace.c
    for label in single:
        carbon = _carbon_by_label(cfg, label)
        solo = dynamics.entanglement_trace([carbon], cfg.constants, tau, nvals)
        cols[f"c_{label.lower()}"] = solo.c
    em.write_csv(name + ".csv", cols, {"tau_us": _io.format_float(tau), "n_max": n_max})


def _carbon_by_label(cfg, label):
    for c in cfg.carbons:
        if c.label == label:
            return c
    raise CliError(f"config has no carbon labeled {label}")


def _repro_scan(em, cfg, name, tau_min, tau_max, n, concurrence_column=False):
    trace = _scan(cfg, _tau_grid(tau_min, tau_max, 0.01), n)
    cols = {"tau": trace.x, "w": trace.w}
    if concurrence_column:
        cols["concurrence"] = np.abs(trace.w)
    cols["p0"] = dynamics.p0_from_w(trace.w)
    em.write_csv(name + ".csv", cols, {"n": n})


REPRODUCE_TARGETS = {
    "fig1c": "free-induction Gaussian decay, T_c = 3.7 us",
    "fig1d": "Hahn-echo Gaussian decay, T = 602 us",
    "fig2b": "entanglement decay at tau = 2.0 us",
    "fig2c": "entanglement sudden death at tau = 0.47 us",
    "fig2d": "entanglement death and rebirth at tau = 0.44 us",
    "fig2e": "entanglement death and rebirth at tau = 0.51 us",
    "fig3a": "N=16 coherence scan with derived concurrence",
    "fig3c": "simulated entanglement at tau = 0.47 us with single-carbon references",
    "fig3d": "simulated entanglement at tau = 0.44 us with C1 reference",
    "fig3e": "simulated entanglement at tau = 0.51 us with C2 reference",
    "fig4a": "N=16 coherence scan, tau 0.2-3.0 us",
    "fig4b": "entanglement Rabi at tau = 2.253 us (C2 resonance)",
    "fig4c": "entanglement Rabi at tau = 2.579 us (C1 resonance)",
}


def cmd_reproduce(args, cfg, em):
    target = args.target
    if target not in REPRODUCE_TARGETS:
        raise CliError(
            f"unknown target '{target}'; choose from {', '.join(sorted(REPRODUCE_TARGETS))}"
        )
    if target == "fig1c":
        _repro_gaussian(em, target, 3.7, 12.0, 241)
    elif target == "fig1d":
        _repro_gaussian(em, target, 602.0, 1500.0, 301)
    elif target == "fig2b":
        _repro_entanglement(em, cfg, target, 2.0, 64)
    elif target == "fig2c":
        _repro_entanglement(em, cfg, target, 0.47, 64)
    elif target == "fig2d":
        _repro_entanglement(em, cfg, target, 0.44, 64)
    elif target == "fig2e":
        _repro_entanglement(em, cfg, target, 0.51, 64)
    elif target == "fig3a":
        _repro_scan(em, cfg, target, 0.3, 2.1, 16, concurrence_column=True)
    elif target == "fig3c":
        _repro_entanglement(em, cfg, target, 0.47, 64, single=("C1", "C2"))
    elif target == "fig3d":
        _repro_entanglement(em, cfg, target, 0.44, 64, single=("C1",))
    elif target == "fig3e":
        _repro_entanglement(em, cfg, target, 0.51, 64, single=("C2",))
    elif target == "fig4a":
        _repro_scan(em, cfg, target, 0.2, 3.0, 16)
    elif target == "fig4b":
        _repro_entanglement(em, cfg, target, 2.253, 160, single=("C2",))
    elif target == "fig4c":
        _repro_entanglement(em, cfg, target, 2.579, 160, single=("C1",))


def build_parser():
    parser = _Parser(prog="nvbath", description=__doc__)
    parser.add_argument("--version", action="version", version=f"nvbath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config path (defaults to built-in parameters)")
        p.add_argument(
            "--output-dir",
            default=os.environ.get(OUTPUT_DIR_ENV, _DEFAULT_OUTPUT_DIR),
            help=f"output directory (or ${OUTPUT_DIR_ENV})",
        )
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--override", action="append", metavar="KEY=VALUE")
        p.add_argument("--threads", type=int, default=1, help="worker cap for internal scans")

    p = sub.add_parser("coherence-scan", help="W(tau) scan at fixed pulse count")
    common(p)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--tau-min", type=float, default=0.2)
    p.add_argument("--tau-max", type=float, default=3.0)
    p.add_argument("--tau-step", type=float, default=0.01)
    p.set_defaults(func=cmd_coherence_scan)

    p = sub.add_parser("entanglement-trace", help="concurrence vs total time at fixed tau")
    common(p)
    p.add_argument("--tau", type=float, default=0.47)
    p.add_argument("--n-max", type=int, default=64)
    p.set_defaults(func=cmd_entanglement_trace)

    p = sub.add_parser("spectrum", help="first-harmonic noise spectrum from a simulated scan")
    common(p)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--tau-min", type=float, default=0.3)
    p.add_argument("--tau-max", type=float, default=0.7)
    p.add_argument("--tau-step", type=float, default=0.01)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("tomography-demo", help="counts -> MLE reconstruction round trip")
    common(p)
    p.add_argument("--state", choices=("bell", "dephased-bell", "werner"), default="bell")
    p.add_argument("--w", type=float, default=0.6, help="coherence for dephased-bell")
    p.add_argument("--p", type=float, default=0.8, help="mixing weight for werner")
    p.add_argument("--shots", type=int, default=1_000_000)
    p.add_argument("--cal-bright", type=float, default=0.03)
    p.add_argument("--cal-dark", type=float, default=0.02)
    p.add_argument("--exact", action="store_true", help="noiseless counts (exact probabilities)")
    p.set_defaults(func=cmd_tomography_demo)

    p = sub.add_parser("calibrate", help="recover one carbon's hyperfine pair from a synthetic scan")
    common(p)
    p.add_argument("--carbon", type=int, default=1, help="1-based index into the config carbons")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--tau-min", type=float, default=2.3)
    p.add_argument("--tau-max", type=float, default=2.9)
    p.add_argument("--tau-step", type=float, default=0.01)
    p.add_argument("--azz-window", type=float, default=20.0, help="half width of the A_zz box, kHz")
    p.add_argument("--axz-window", type=float, default=30.0, help="half width of the A_xz box, kHz")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit-decay", help="Gaussian decay fit of a CSV trace or synthetic data")
    common(p)
    p.add_argument("--input", help="CSV whose first two columns are (t, y)")
    p.add_argument("--t-decay", type=float, default=3.7)
    p.add_argument("--points", type=int, default=30)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--with-floor", action="store_true")
    p.set_defaults(func=cmd_fit_decay)

    p = sub.add_parser("reproduce", help="emit plot data for a known figure target")
    common(p)
    p.add_argument("target", help=", ".join(sorted(REPRODUCE_TARGETS)))
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_effective_config(args)
        em = Emitter(args.output_dir)
        args.func(args, cfg, em)
        em.manifest(args.command, cfg, _args_echo(args), args.seed)
    except (CliError, ValueError, OSError, fit.FitError, tomography.MLEError) as exc:
        message = str(exc).splitlines()[0] if str(exc) else exc.__class__.__name__
        print(f"nvbath: error: {message}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
