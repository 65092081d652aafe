"""Command-line entry point: ``rayleigh-watch``.

Exit codes: 0 when every certified inequality passed (or was not
applicable), 2 when at least one was violated, 1 on configuration or
runtime errors (a one-line JSON object is written to stderr).
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import _backend
from .io import read_csv, sanitize, write_json
from .logmean import LogMeanDomainError, WeightedSamples, limit_study
from .scenario import ConfigError, ScenarioConfig, dictionary_study, preset_names, run_scenario, system_of_preset

EXIT_OK, EXIT_ERROR, EXIT_VIOLATED = 0, 1, 2


class CliError(Exception):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def _parser():
    p = argparse.ArgumentParser(prog="rayleigh-watch", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario from a config file or a preset")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON scenario config")
    src.add_argument("--preset", help=f"one of: {', '.join(preset_names())}")
    r.add_argument("--system", choices=["semilagrangian-1d", "semilagrangian-2d"],
                   help="dimension for sl-compressive / sl-uniform")
    r.add_argument("--nx", type=int)
    r.add_argument("--ny", type=int)
    r.add_argument("--n", type=int, help="torus resolution per direction (semi-Lagrangian)")
    r.add_argument("--na", type=int)
    r.add_argument("--dt", type=float)
    r.add_argument("--t-end", type=float)
    r.add_argument("--snapshot-every", type=int)
    r.add_argument("--out")

    d = sub.add_parser("verify-dictionary", help="dictionary residuals under grid refinement")
    d.add_argument("--config", required=True)
    d.add_argument("--out")

    m = sub.add_parser("log-mean", help="p-norms approaching the geometric mean")
    m.add_argument("--values", required=True,
                   help="CSV file (first column, optional header) or an inline comma-separated list")
    m.add_argument("--weights", help="same format as --values; normalised to sum 1")
    m.add_argument("--p-list", required=True, help="comma-separated positive exponents")

    rep = sub.add_parser("report", help="re-check and summarise an output directory")
    rep.add_argument("--dir", required=True)
    return p


def _overrides(args):
    keys = ("nx", "ny", "n", "na", "dt", "t_end", "snapshot_every", "out")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _config_for_run(args):
    if args.config:
        cfg = ScenarioConfig.load(args.config)
        data = cfg.to_dict()
    else:
        system = system_of_preset(args.preset, 2 if args.system == "semilagrangian-2d" else 1)
        data = {"system": system, "preset": args.preset, "schema_version": 1,
                "out": f"rayleigh-watch-{args.preset}"}
        if system == "semilagrangian-2d":
            data.update(dt=2e-3)
    data.update(_overrides(args))
    return ScenarioConfig.from_dict(data)


def _summary_line(report):
    bad = sorted(k for k, v in report.get("certification", {}).items() if v["status"] == "fail")
    return json.dumps(sanitize({
        "status": report.get("certification_status"),
        "stop_reason": report.get("stop_reason"),
        "final_t": report.get("final_t"),
        "violated": bad,
    }))


def cmd_run(args):
    cfg = _config_for_run(args)
    report = run_scenario(cfg)
    print(_summary_line(report))
    return EXIT_VIOLATED if report["certification_status"] == "violated" else EXIT_OK


def cmd_verify_dictionary(args):
    cfg = ScenarioConfig.load(args.config)
    if args.out:
        cfg.out = args.out
    os.makedirs(cfg.out, exist_ok=True)
    _backend.configure_threads()
    study = dictionary_study(cfg)
    path = os.path.join(cfg.out, "dictionary.json")
    write_json(path, sanitize(study))
    worst = {k: min(v) for k, v in study["observed_orders"].items()}
    print(json.dumps(sanitize({"status": study["status"], "min_observed_order": worst, "file": path})))
    return EXIT_OK if study["status"] == "pass" else EXIT_VIOLATED


def _read_numbers(source, what):
    if os.path.isfile(source):
        try:
            header, rows = read_csv(source)
        except (OSError, UnicodeDecodeError) as exc:
            raise CliError("input", f"cannot read {what} file {source!r}: {exc}") from None
        cells = [header[0]] + [r[0] for r in rows if r and r[0].strip()]
        try:
            float(cells[0])
        except ValueError:
            cells = cells[1:]   # header line
    else:
        cells = [c for c in source.replace(";", ",").split(",") if c.strip()]
    try:
        vals = np.array([float(c) for c in cells], dtype=float)
    except ValueError as exc:
        raise CliError("input", f"non-numeric entry in {what}: {exc}") from None
    if vals.size == 0:
        raise CliError("input", f"no {what} given")
    return vals


def cmd_log_mean(args):
    vals = _read_numbers(args.values, "values")
    if args.weights:
        w = _read_numbers(args.weights, "weights")
        if w.shape != vals.shape:
            raise CliError("input", f"{w.size} weights for {vals.size} values")
        s = WeightedSamples.normalized(vals, w)
    else:
        s = WeightedSamples.uniform(vals)
    ps = sorted((float(p) for p in _read_numbers(args.p_list, "p-list")), reverse=True)
    study = limit_study(s, ps)
    print(json.dumps(sanitize(study)))
    return EXIT_OK


def cmd_report(args):
    path = os.path.join(args.dir, "report.json")
    try:
        with open(path, encoding="utf-8") as fh:
            report = json.load(fh)
    except OSError as exc:
        raise CliError("input", f"cannot read {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError("input", f"malformed report {path!r}: {exc.msg}") from None
    missing = []
    for entry in report.get("manifest", []):
        full = os.path.join(args.dir, entry)
        if not os.path.exists(full):
            missing.append(entry)
        elif entry.endswith(".json"):
            with open(full, encoding="utf-8") as fh:
                json.load(fh)
        elif entry.endswith(".csv"):
            read_csv(full)
    if missing:
        raise CliError("manifest", f"files listed in the manifest are missing: {missing}")
    print(_summary_line(report))
    return EXIT_VIOLATED if report.get("certification_status") == "violated" else EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "verify-dictionary": cmd_verify_dictionary,
    "log-mean": cmd_log_mean,
    "report": cmd_report,
}


def _fail(kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    return EXIT_ERROR


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage; keep its exit code for --help
        if exc.code == 0:
            return EXIT_OK
        return _fail("usage", "invalid command-line arguments")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _backend.configure_threads()
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail("config", exc)
    except CliError as exc:
        return _fail(exc.kind, exc)
    except LogMeanDomainError as exc:
        return _fail("domain", exc)
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        return _fail(type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
