"""Command line front end.

Exit codes: 0 success, 1 IO/parse/usage error, 2 insufficient data
(missing bus, poor overlap, zero variance, solver divergence), 3 decision
made but its margin is below ``--margin-threshold`` (or a sweep whose
windows disagree).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .core import AngleMode, MagnitudeMode, MagnitudeScale, ScoringConfig, SignConvention
from .errors import (
    AlignmentError,
    InsufficientDataError,
    InvalidInputError,
    ParseError,
    SolverDivergenceError,
)
from .ingest import DEFAULT_MIN_OVERLAP, align_records, find_bus, parse_phasor_csv
from .search import identify, sweep_lengths, window_sweep
from .synthfeeder import load_scenario, simulate_to_csv

SCHEMA_VERSION = 1

PRESETS = {
    "sim": {"alpha": 1.0, "beta": 1.0},
    "field": {"alpha": 10000.0, "beta": 1.0},
}

DEFAULTS = {
    "alpha": 1.0,
    "beta": 1.0,
    "magnitude_mode": MagnitudeMode.PEARSON.value,
    "angle_mode": AngleMode.RAW.value,
    "sign_convention": SignConvention.PENALIZE_ANGLE.value,
    "magnitude_scale": MagnitudeScale.PER_UNIT.value,
    "margin_threshold": 0.0,
    "tolerance_us": None,
    "min_overlap": DEFAULT_MIN_OVERLAP,
    "nominal": [],
    "preset": None,
    "windows": 21,
    "schedule": "linear",
}

# keys a --config file may set
CONFIG_KEYS = set(DEFAULTS) | {"ref", "tgt"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _add_scoring_flags(p: argparse.ArgumentParser):
    p.add_argument("data", help="phasor CSV (timestamp_us,bus_id,phase,magnitude_v,angle_deg)")
    p.add_argument("--ref", help="reference bus id")
    p.add_argument("--tgt", help="target bus id")
    p.add_argument("--config", help="JSON file with any of the flags below; flags win")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="sim: alpha=1 beta=1; field: alpha=10000 beta=1")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--magnitude-mode", choices=[m.value for m in MagnitudeMode], default=None)
    p.add_argument("--angle-mode", choices=[m.value for m in AngleMode], default=None)
    p.add_argument("--sign-convention", choices=[m.value for m in SignConvention], default=None)
    p.add_argument("--magnitude-scale", choices=[m.value for m in MagnitudeScale], default=None)
    p.add_argument("--margin-threshold", type=float, default=None)
    p.add_argument("--tolerance-us", type=float, default=None,
                   help="alignment tolerance, default a quarter sample period")
    p.add_argument("--min-overlap", type=float, default=None)
    p.add_argument("--nominal", action="append", default=None, metavar="BUS=VOLTS",
                   help="line-to-neutral nominal voltage; default is the bus median magnitude")
    p.add_argument("-o", "--output", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phaseid", description="Phase identification from voltage phasors.")
    parser.add_argument("--version", action="version", version=f"phaseid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a feeder scenario to phasor CSV")
    p.add_argument("scenario", help="scenario JSON, or a bundled name (ieee13like, twobus)")
    p.add_argument("out", help="output CSV path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--snapshots", type=int, default=None)

    p = sub.add_parser("identify", help="rank phase assignments between two buses")
    _add_scoring_flags(p)

    p = sub.add_parser("sweep", help="identify over growing windows")
    _add_scoring_flags(p)
    p.add_argument("--windows", type=int, default=None)
    p.add_argument("--schedule", choices=["linear", "geometric"], default=None)
    p.add_argument("--plot-csv", default=None, help="per-window, per-assignment scores as CSV")

    p = sub.add_parser("report", help="summarize a saved JSON report")
    p.add_argument("report", help="report JSON written by identify or sweep")
    return parser


def resolve_settings(args) -> dict:
    """Defaults, then preset, then --config file, then explicit flags."""
    explicit = {k: v for k, v in vars(args).items() if k in CONFIG_KEYS and v is not None}
    from_file = {}
    if args.config:
        from_file = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(from_file, dict):
            raise UsageError("--config must hold a JSON object")
        from_file = {k.replace("-", "_"): v for k, v in from_file.items()}
        unknown = set(from_file) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    merged = {**from_file, **explicit}
    preset = merged.get("preset")
    settings = {**DEFAULTS, **PRESETS.get(preset, {}), **merged, "data": args.data}
    if not settings.get("ref") or not settings.get("tgt"):
        raise UsageError("--ref and --tgt are required (flag or config file)")
    return settings


def _nominals(entries) -> dict[str, float]:
    out = {}
    for item in entries or []:
        bus, sep, volts = str(item).partition("=")
        if not sep:
            raise UsageError(f"--nominal expects BUS=VOLTS, got {item!r}")
        try:
            out[bus] = float(volts)
        except ValueError:
            raise UsageError(f"--nominal {item!r}: volts is not a number") from None
    return out


def _scoring_config(s: dict) -> ScoringConfig:
    return ScoringConfig(
        alpha=s["alpha"],
        beta=s["beta"],
        magnitude_mode=s["magnitude_mode"],
        angle_mode=s["angle_mode"],
        sign_convention=s["sign_convention"],
        magnitude_scale=s["magnitude_scale"],
    )


def _load_pair(s: dict):
    nominal = _nominals(s["nominal"])
    records = parse_phasor_csv(s["data"], nominal)
    ref = find_bus(records, s["ref"])
    tgt = find_bus(records, s["tgt"])
    return align_records(ref, tgt, s["tolerance_us"], s["min_overlap"])


def _report_head(command: str, s: dict, cfg: ScoringConfig, ref, tgt, alignment) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": {
            "data": Path(s["data"]).name,
            "data_sha256": sha256_of(s["data"]),
            "ref": s["ref"],
            "tgt": s["tgt"],
        },
        "config": {
            **cfg.to_dict(),
            "preset": s["preset"],
            "margin_threshold": s["margin_threshold"],
            "tolerance_us": s["tolerance_us"],
            "min_overlap": s["min_overlap"],
            "nominal_voltages": {ref.bus_id: ref.nominal_voltage, tgt.bus_id: tgt.nominal_voltage},
        },
        "alignment": alignment.to_dict(),
    }


def _emit(report: dict, output) -> None:
    text = json.dumps(report, indent=2) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.snapshots is not None:
        changes["snapshots"] = args.snapshots
    if changes:
        scenario = scenario.with_updates(**changes)
    records = simulate_to_csv(scenario, args.out)
    echo = {
        "scenario": scenario.name,
        "scenario_sha256": hashlib.sha256(
            json.dumps(scenario.to_dict(), sort_keys=True).encode()).hexdigest(),
        "seed": scenario.seed,
        "snapshots": scenario.snapshots,
        "buses": len(records),
        "channels": sum(r.channel_count for r in records),
        "samples_per_channel": len(records[0].channels[0]),
        "output": str(args.out),
        "output_sha256": sha256_of(args.out),
    }
    sys.stdout.write(json.dumps(echo, indent=2) + "\n")
    return 0


def cmd_identify(args) -> int:
    t0 = time.perf_counter()
    s = resolve_settings(args)
    cfg = _scoring_config(s)
    ref, tgt, alignment = _load_pair(s)
    result = identify(ref, tgt, cfg)
    low = result.margin < s["margin_threshold"]
    report = _report_head("identify", s, cfg, ref, tgt, alignment)
    report["result"] = result.to_dict()
    report["decision"] = {
        "winner": result.winner.code(result.ref_labels),
        "margin": result.margin,
        "below_threshold": low,
        "exit_code": 3 if low else 0,
    }
    report["timing"] = {"wall_seconds": time.perf_counter() - t0}
    _emit(report, args.output)
    print(f"{s['ref']} -> {s['tgt']}: winner {report['decision']['winner']} "
          f"margin {result.margin:.6g}{' (below threshold)' if low else ''}", file=sys.stderr)
    return 3 if low else 0


def write_plot_csv(path, sweep, ref_labels) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_length", "assignment", "rank", "f", "g", "objective"])
        for n, res in sweep.windows:
            for sa in sorted(res.ranked, key=lambda x: x.assignment.mapping):
                w.writerow([n, sa.assignment.code(ref_labels), sa.rank,
                            repr(sa.f_score), repr(sa.g_score), repr(sa.objective)])


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    s = resolve_settings(args)
    cfg = _scoring_config(s)
    ref, tgt, alignment = _load_pair(s)
    n = len(ref)
    try:
        lengths = sweep_lengths(n, int(s["windows"]), s["schedule"])
    except InvalidInputError as exc:
        raise InsufficientDataError(str(exc)) from exc
    sweep = window_sweep(ref, tgt, cfg, lengths)
    final = sweep.windows[-1][1]
    low = min(res.margin for _, res in sweep.windows) < s["margin_threshold"]
    code = 3 if (low or not sweep.consistent) else 0
    report = _report_head("sweep", s, cfg, ref, tgt, alignment)
    report["config"]["windows"] = int(s["windows"])
    report["config"]["schedule"] = s["schedule"]
    report["sweep"] = sweep.to_dict()
    report["decision"] = {
        "winner": final.winner.code(final.ref_labels),
        "consistent": sweep.consistent,
        "min_margin": min(res.margin for _, res in sweep.windows),
        "below_threshold": low,
        "exit_code": code,
    }
    if args.plot_csv:
        write_plot_csv(args.plot_csv, sweep, final.ref_labels)
    report["timing"] = {"wall_seconds": time.perf_counter() - t0}
    _emit(report, args.output)
    print(f"{s['ref']} -> {s['tgt']}: {len(lengths)} windows, consistent={str(sweep.consistent).lower()}, "
          f"winner {report['decision']['winner']}", file=sys.stderr)
    return code


def cmd_report(args) -> int:
    try:
        rep = json.loads(Path(args.report).read_text(encoding="utf-8"))
        if rep.get("schema_version") != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema_version {rep.get('schema_version')!r}")
        inputs, cfg, dec = rep["inputs"], rep["config"], rep["decision"]
    except (json.JSONDecodeError, KeyError, AttributeError) as exc:
        raise ParseError(f"{args.report}: not a phaseid report ({exc})") from exc
    out = [
        f"{rep['command']}: {inputs['ref']} -> {inputs['tgt']} on {inputs['data']}",
        f"  alpha={cfg['alpha']:g} beta={cfg['beta']:g} magnitude={cfg['magnitude_mode']} "
        f"angle={cfg['angle_mode']} sign={cfg['sign_convention']} scale={cfg['magnitude_scale']}",
        f"  aligned samples: {rep['alignment']['paired_count']} "
        f"(overlap {rep['alignment']['overlap_fraction']:.3f})",
    ]
    if rep["command"] == "identify":
        res = rep["result"]
        out.append(f"  {'rank':>4}  {'assign':<6} {'F':>12} {'G':>12} {'J':>14}")
        for row in res["ranked"]:
            out.append(f"  {row['rank']:>4}  {row['assignment']:<6} {row['f']:>12.6g} "
                       f"{row['g']:>12.6g} {row['objective']:>14.8g}")
        out.append(f"  winner {dec['winner']} margin {dec['margin']:.6g}")
    else:
        out.append(f"  {'window':>7}  {'winner':<6} {'margin':>12}")
        for w in rep["sweep"]["windows"]:
            out.append(f"  {w['length']:>7}  {w['winner']:<6} {w['margin']:>12.6g}")
        out.append(f"  consistent={str(dec['consistent']).lower()} winner {dec['winner']}")
    print("\n".join(out))
    return 0


COMMANDS = {"simulate": cmd_simulate, "identify": cmd_identify, "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, ParseError, InvalidInputError, OSError, json.JSONDecodeError) as exc:
        print(f"phaseid: error: {exc}", file=sys.stderr)
        return 1
    except (InsufficientDataError, AlignmentError, SolverDivergenceError) as exc:
        print(f"phaseid: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
