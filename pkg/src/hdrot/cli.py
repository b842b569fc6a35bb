"""Command-line entry point: ``hdrot {linecalc,simulate,spectrum,selftest,defaults}``.

Exit codes: 0 success, 1 configuration error, 2 runtime or physics error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance, analysis, pipeline
from .analysis import DegenerateFitError
from .config import ConfigError, SimulationConfig, dumps_config, load_config
from .kinetics import IntegrationError
from .levelcat import CatalogError
from .protocol import SignalFloorError, method2_levels, write_traces_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class RuntimeFailure(RuntimeError):
    pass


def _config(args) -> SimulationConfig:
    cfg = load_config(args.config) if args.config else SimulationConfig()
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["master_seed"] = args.seed
    b = getattr(args, "b_field", None)
    if isinstance(b, float):
        kw["magnetic_field_gauss"] = b
    try:
        return cfg.replace(**kw) if kw else cfg
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lists(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    if not names:
        raise ConfigError("--list needs at least one name")
    return names


def _check_lists(cfg: SimulationConfig, names) -> None:
    cat = pipeline.catalog_for(cfg)
    missing = [n for n in names if n not in cat.lists]
    if missing:
        raise ConfigError("unknown frequency list(s): %s (have: %s)" % (
            ", ".join(missing), ", ".join(cat.lists)))


# --- linecalc --------------------------------------------------------------------------

def line_table(cfg: SimulationConfig, b_values, tolerance: float) -> list[dict]:
    """Position of every catalog line at each field, with the list entries it hits."""
    cat = pipeline.catalog_for(cfg)
    rows = []
    for b in b_values:
        for ln in cat.lines:
            pos = ln.position(b)
            hits = ["%s[%d]" % (name, k) for name, fl in cat.lists.items()
                    for k, e in enumerate(fl.entries) if abs(pos - e) <= tolerance]
            rows.append({"B_G": b, "line": ln.label, "position_MHz": pos / 1e6,
                         "targeted": ln.targeted, "matches": " ".join(hits)})
    return rows


def cmd_linecalc(args) -> int:
    cfg = _config(args)
    rows = line_table(cfg, args.b_values, args.tolerance_khz * 1e3)
    text = ["B_G,line,position_MHz,targeted,matches"]
    text += ['%.17g,"%s",%.9f,%s,%s' % (r["B_G"], r["line"], r["position_MHz"],
                                        "yes" if r["targeted"] else "no", r["matches"]) for r in rows]
    body = "\n".join(text) + "\n"
    if args.out:
        (_out_dir(args) / "linecalc.csv").write_text(body)
    sys.stdout.write(body)
    return EXIT_OK


# --- simulate --------------------------------------------------------------------------

def write_simulation_outputs(res: pipeline.SimulationResult, cfg: SimulationConfig, out) -> dict:
    """Write traces, per-repetition results, trajectory, timeline and a summary into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_traces_csv(res.traces, out / "traces.csv")
    write_traces_csv([res.average], out / "average_trace.csv")
    res.trajectory.to_csv(out / "trajectory.csv")
    (out / "timeline.json").write_text(res.timeline.to_text() + "\n")
    bg = cfg.fluorescence(res.method).background_counts_per_s
    if res.method == "I":
        rows = ["rep,seed,rate_per_s,rate_stddev,amplitude,converged,iterations"]
        rows += ["%d,%d,%.17g,%.17g,%.17g,%s,%d" % (tr.rep, tr.seed, f.rate, f.rate_stddev, f.amplitude,
                                                    f.converged, f.iterations)
                 for tr, f in zip(res.traces, res.fits)]
    else:
        rows = ["rep,seed,level_before,level_after,relative_decrease"]
        for tr, v in zip(res.traces, res.values):
            before, after = method2_levels(tr, res.timeline, background=bg)
            rows.append("%d,%d,%.17g,%.17g,%.17g" % (tr.rep, tr.seed, before, after, v))
    (out / "fits.csv").write_text("\n".join(rows) + "\n")
    pt = analysis.aggregate(res.values, list_name=res.list_name, method=res.method)
    summary = {
        "method": res.method,
        "list": res.list_name,
        "reps": len(res.values),
        "master_seed": cfg.master_seed,
        "quantity": "decay_rate_per_s" if res.method == "I" else "relative_decrease",
        "mean": pt.normalized_signal,
        "stddev": pt.stddev,
        "all_converged": all(f.converged for f in res.fits),
    }
    if res.method == "I":
        avg = res.average
        sub = avg.replace(fluorescence=avg.fluorescence - bg)
        fit = analysis.fit_exponential(sub, cfg.fit_window_s, offset=False)
        summary["average_trace_rate_per_s"] = fit.rate
        t = res.trajectory.times - res.timeline.rempd_start
        mid = 0.5 * sum(cfg.rate_window_s)
        if t[-1] >= cfg.rate_window_s[1]:
            summary["rate_at_%g_s_per_s" % mid] = analysis.local_decay_rate(
                t, res.trajectory.molecules, cfg.rate_window_s)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_simulate(args) -> int:
    cfg = _config(args)
    names = _lists(args.list)
    if len(names) != 1:
        raise ConfigError("simulate takes a single list; use spectrum for several")
    _check_lists(cfg, names)
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    res = pipeline.simulate(cfg, args.method, names[0], args.reps)
    summary = write_simulation_outputs(res, cfg, _out_dir(args))
    print("%s %s: %s = %.6g +- %.3g (%d reps)" % (
        res.method, res.list_name, summary["quantity"], summary["mean"], summary["stddev"], summary["reps"]))
    if not summary["all_converged"]:
        raise RuntimeFailure("decay fit did not converge for at least one repetition")
    return EXIT_OK


# --- spectrum --------------------------------------------------------------------------

def cmd_spectrum(args) -> int:
    cfg = _config(args)
    names = _lists(args.list)
    _check_lists(cfg, names + ([pipeline.BACKGROUND_LIST] if args.method == "I" else []))
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    pts = pipeline.spectrum(cfg, args.method, names, args.reps, args.workers)
    out = _out_dir(args)
    analysis.write_spectrum_csv(pts, out / "spectrum.csv")
    analysis.write_plot_data(np.arange(len(pts)), [p.normalized_signal for p in pts],
                             [p.stddev for p in pts], out / "spectrum_plot.csv")
    for p in pts:
        print("%-10s %8.4f +- %.4f  (n=%d)" % (p.list_name, p.normalized_signal, p.stddev, p.n_reps))
    return EXIT_OK


# --- selftest / defaults ---------------------------------------------------------------

def cmd_selftest(args) -> int:
    cfg = _config(args)
    ok = True
    for chk in acceptance.iter_checks(cfg, args.workers):
        print(chk.line(), flush=True)
        ok &= chk.passed
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_defaults(args) -> int:
    sys.stdout.write(dumps_config(SimulationConfig()))
    return EXIT_OK


def _b_values(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated field values in gauss")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdrot", description="Rotational spectroscopy simulator for trapped HD+.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="TOML configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        return p

    p = common(sub.add_parser("linecalc", help="line positions versus magnetic field"))
    p.add_argument("--b-field", dest="b_values", type=_b_values, default=[0.0, 1.0],
                   metavar="G[,G...]", help="field values in gauss (default 0,1)")
    p.add_argument("--tolerance-khz", type=float, default=1.0, help="match tolerance (default 1 kHz)")
    p.add_argument("--out", metavar="DIR", help="also write linecalc.csv here")
    p.set_defaults(func=cmd_linecalc)

    for name, fn, reps, hlp in (("simulate", cmd_simulate, 10, "seeded repetitions of one data point"),
                                ("spectrum", cmd_spectrum, 9, "one spectrum point per frequency list")):
        p = common(sub.add_parser(name, help=hlp))
        p.add_argument("--method", choices=("I", "II"), default="I")
        p.add_argument("--list", default="detuned500" if name == "simulate" else "A',B,C,detuned500",
                       metavar="NAME[,NAME...]")
        p.add_argument("--reps", type=int, default=reps)
        p.add_argument("--b-field", dest="b_field", type=float, metavar="G")
        p.add_argument("--out", metavar="DIR", default="hdrot_out")
        p.set_defaults(func=fn)

    p = common(sub.add_parser("selftest", help="run the acceptance checks"))
    p.set_defaults(func=cmd_selftest)
    p = sub.add_parser("defaults", help="print the reference configuration")
    p.set_defaults(func=cmd_defaults)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CatalogError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeFailure, IntegrationError, DegenerateFitError, SignalFloorError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
