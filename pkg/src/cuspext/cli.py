"""Command-line runner.

Every run writes a self-describing JSON record (config echo, version, results,
wall-clock, emitted files) plus CSV series to the output directory.  Exit
codes: 0 success, 2 precondition or input failure, 1 internal error, 64 for
unknown flags.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CuspextError, InsufficientDataError, PreconditionError
from .extension import continuity_check, extension_exponents, exp_extension_exponents, extend, norm_ratio
from .geometry import QuadratureSpec
from .integrability import (
    angular_stretch_series,
    classify_integrability,
    closed_form_threshold,
    radial_profile_oracle,
    radial_profile_quadrature,
)
from .rational import format_exponent, is_inf, parse_exponent, to_float
from .sharpness import l1_quasidisk_demo, phase_diagram, threshold_scan
from .sobolev import function_from_config

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_PRECONDITION = 2
EXIT_USAGE = 64

SUBCOMMANDS = ("distortion-scan", "extend", "sharpness", "classify", "exponents", "l1-demo", "report")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _list(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cuspext", description="Sobolev extension numerics across planar cusps.")
    parser.add_argument("--version", action="version", version=f"cuspext {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def common(p):
        p.add_argument("--config", help="TOML config file; flags override its values")
        p.add_argument("--out", help="output directory (default: runs/)")
        p.add_argument("--seed", type=int, help="seed for sampled checks")
        p.add_argument("--no-files", action="store_true", help="print only, write nothing")
        return p

    def quad(p, n=None, levels=None):
        p.add_argument("--n", type=int, help=f"cells per cross-section (default {n})")
        p.add_argument("--levels", type=int, help=f"finest cutoff level (default {levels})")
        p.add_argument("--stride", type=int, help="octaves per level (default 1)")
        return p

    p = common(sub.add_parser("distortion-scan", help="int K^p for the angular stretch over (s, p)"))
    quad(p, 128, 16)
    p.add_argument("--s", help="comma-separated degrees, e.g. 3/2,2,3")
    p.add_argument("--p", help="comma-separated exponents, e.g. 3/2,2,4")

    p = common(sub.add_parser("extend", help="reflection extension norm ratio"))
    quad(p, 64, 16)
    p.add_argument("--s", help="cusp degree")
    p.add_argument("--q", help="complement distortion exponent (rational or inf)")
    p.add_argument("--direction", choices=("in", "out"))
    p.add_argument("--gamma", help="test-function exponent")
    p.add_argument("--family", help="test-function family (default angular-jump)")
    p.add_argument("--ru", help="neighbourhood radius r_U (default 1/2)")

    p = common(sub.add_parser("sharpness", help="threshold table and phase diagram"))
    p.add_argument("--p", help="comma-separated p values")
    p.add_argument("--q", help="comma-separated q values")
    p.add_argument("--s", help="comma-separated s values")
    p.add_argument("--svg", dest="svg", action="store_true", default=None, help="emit the SVG phase diagram")
    p.add_argument("--no-svg", dest="svg", action="store_false")

    p = common(sub.add_parser("classify", help="classify a cutoff series"))
    p.add_argument("--values", help="comma-separated I_0..I_K")
    p.add_argument("--increments", help="comma-separated increments (I_0 = 0)")

    p = common(sub.add_parser("exponents", help="extension exponents (P, Q)"))
    p.add_argument("--p", help="interior distortion exponent")
    p.add_argument("--q", help="exterior distortion exponent")
    p.add_argument("--direction", choices=("in", "out"))
    p.add_argument("--p-lambda", dest="p_lambda", help="exponential-integrability exponent")

    p = common(sub.add_parser("l1-demo", help="exponential cusp demonstration"))
    quad(p, 64, 16)

    p = common(sub.add_parser("report", help="index the run records in the output directory"))
    return parser


# ---------------------------------------------------------------------------
# Config handling


def load_config(path) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


class Settings:
    """Flag value if given, else config value, else default."""

    def __init__(self, args, config):
        self.args = vars(args)
        self.config = config
        self.used = {}

    def get(self, key, default=None):
        val = self.args.get(key)
        if val is None:
            val = self.config.get(key.replace("_", "-"), self.config.get(key))
        if val is None:
            val = default
        self.used[key] = val
        return val

    def quadrature(self, n, levels):
        qcfg = self.config.get("quadrature", {})

        def pick(key, default):
            val = self.args.get(key)
            return qcfg.get(key, default) if val is None else val

        spec = QuadratureSpec(
            n=int(pick("n", n)),
            grading=float(qcfg.get("grading", QuadratureSpec.grading)),
            levels=int(pick("levels", levels)),
            stride=int(pick("stride", 1)),
        )
        self.used["quadrature"] = spec.to_config()
        return spec


def output_dir(args, config) -> Path:
    """``--out`` wins, then ``CUSPEXT_OUT``, then the config file, then ``runs``."""
    if args.out:
        return Path(args.out)
    env = os.environ.get("CUSPEXT_OUT")
    if env:
        return Path(env)
    return Path(config.get("out", "runs"))


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return format_exponent(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([jsonable(v) for v in row])


def _fmt_float(v):
    return repr(float(v)) if math.isfinite(v) else ("inf" if v > 0 else "nan")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_distortion_scan(st: Settings, out: Path, files: list):
    s_vals = [parse_exponent(v) for v in _list(st.get("s", "3/2,2,3"))]
    p_vals = [parse_exponent(v) for v in _list(st.get("p", "3/2,2,4"))]
    spec = st.quadrature(128, 16)
    rows, results = [], []
    for s in s_vals:
        for p in p_vals:
            series = angular_stretch_series(s, p, spec)
            thr = closed_form_threshold("angular-stretch", p)
            oracle = radial_profile_oracle(s, p)
            prof = radial_profile_quadrature(s, p, spec)
            rows.append([format_exponent(s), format_exponent(p)] + [_fmt_float(v) for v in series.values]
                        + [series.verdict, format_exponent(thr)])
            results.append({
                "s": s, "p": p, "series": series.to_dict(), "verdict": series.verdict,
                "oracle_threshold": thr, "expected": "finite" if s < to_float(thr) else "divergent",
                "profile_oracle": oracle, "profile_quadrature": prof.final,
            })
            print(f"s={format_exponent(s)} p={format_exponent(p)} s*={format_exponent(thr)} "
                  f"I_K={series.final:.6g} verdict={series.verdict}")
    if out is not None:
        path = out / "distortion-scan.csv"
        header = ["s", "p"] + [f"I_{k}" for k in range(spec.levels + 1)] + ["verdict", "oracle_threshold"]
        _write_csv(path, header, rows)
        files.append(path)
    return {"cells": results}


def cmd_extend(st: Settings, out: Path, files: list):
    s = parse_exponent(st.get("s", "2"))
    q = parse_exponent(st.get("q", "4"))
    direction = st.get("direction", "in")
    gamma = to_float(parse_exponent(st.get("gamma", "1/5")))
    fcfg = dict(st.config.get("function", {}))
    family = st.get("family", fcfg.get("family", "angular-jump"))
    fcfg.update({"family": family, "gamma": gamma})
    u = function_from_config(fcfg)
    r_u = to_float(parse_exponent(st.get("ru", "1/2")))
    spec = st.quadrature(64, 16)
    P, Q = extension_exponents(math.inf, q, direction)
    report = norm_ratio(u, to_float(s), P, Q, r_u, spec, direction, p=math.inf, q=q)
    seed = st.get("seed", 0)
    rel_jump = continuity_check(extend(u, to_float(s), direction), seed=seed)
    print(f"P={format_exponent(P)}, Q={format_exponent(Q)}; ratio growth {report.growth:.6g} -> {report.verdict}")
    if out is not None:
        path = out / "extend.csv"
        _write_csv(path, ["level", "cutoff", "source_seminorm", "extension_seminorm", "ratio"],
                   [[k, report.source.cutoffs[k], report.source.values[k], report.extension.values[k],
                     report.ratios[k]] for k in range(len(report.ratios))])
        files.append(path)
    result = report.to_dict()
    result["continuity_max_relative_jump"] = rel_jump
    return result


def cmd_sharpness(st: Settings, out: Path, files: list):
    ps = _list(st.get("p", "2,3,4,inf"))
    qs = _list(st.get("q", "3/2,2,3,4"))
    ss = _list(st.get("s", "5/4,3/2,2,3"))
    table = threshold_scan(ps, qs, ss)
    text = table.to_csv()
    sys.stdout.write(text)
    if out is not None:
        path = out / "sharpness.csv"
        path.write_text(text, encoding="utf-8")
        files.append(path)
        if st.get("svg", True):
            svg = out / "phase-diagram.svg"
            finite_ps = [p for p in map(parse_exponent, ps) if not is_inf(p)]
            phase_diagram(finite_ps[0] if finite_ps else 4, svg)
            files.append(svg)
    return {"rows": table.rows}


def cmd_classify(st: Settings, out: Path, files: list):
    values = st.get("values")
    incs = st.get("increments")
    if values is not None:
        vals = [float(v) for v in _list(values)]
    elif incs is not None:
        vals = [0.0]
        for d in _list(incs):
            vals.append(vals[-1] + float(d))
    else:
        raise UsageError("classify needs --values or --increments")
    verdict = classify_integrability(vals)
    print(verdict)
    return {"values": vals, "verdict": verdict}


def cmd_exponents(st: Settings, out: Path, files: list):
    p_lambda = st.get("p_lambda")
    if p_lambda is not None:
        P, Q = exp_extension_exponents(p_lambda)
    else:
        P, Q = extension_exponents(st.get("p", "inf"), st.get("q", "inf"), st.get("direction", "in"))
    print(f"P={format_exponent(P)}, Q={format_exponent(Q)}")
    return {"P": P, "Q": Q}


def cmd_l1_demo(st: Settings, out: Path, files: list):
    spec = st.quadrature(64, 16)
    rep = l1_quasidisk_demo(spec)
    a = rep["a_distortion_integrable"]
    print(f"(a) int K dA = {a['integral_K']:.6g} (oracle 1, within 1%: {a['within_1pct']}); "
          f"int J dA = {a['integral_J']:.6g}")
    print("(b) " + ", ".join(f"Q={b['Q']}: {b['verdict']}" for b in rep["b_fiber_bounds"]))
    print(f"(c) Q=1: {rep['c_q_equals_1']['verdict']}")
    return rep


def cmd_report(st: Settings, out: Path, files: list):
    if out is None or not out.exists():
        raise UsageError("report needs an existing output directory")
    entries = []
    for path in sorted(out.glob("*.json")):
        if path.name == "report.json":
            continue
        try:
            rec = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            continue
        entries.append({"file": path.name, "command": rec.get("command"), "version": rec.get("version"),
                        "wall_clock_seconds": rec.get("wall_clock_seconds")})
        print(f"{path.name}: {rec.get('command')}")
    return {"records": entries}


HANDLERS = {
    "distortion-scan": cmd_distortion_scan,
    "extend": cmd_extend,
    "sharpness": cmd_sharpness,
    "classify": cmd_classify,
    "exponents": cmd_exponents,
    "l1-demo": cmd_l1_demo,
    "report": cmd_report,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    start = time.perf_counter()
    try:
        config = load_config(args.config)
        settings = Settings(args, config)
        out = None if args.no_files else output_dir(args, config)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        files = []
        result = HANDLERS[args.command](settings, out, files)
        if out is not None:
            record_path = out / f"{args.command}.json"
            files.append(record_path)
            record = {
                "tool": "cuspext",
                "version": __version__,
                "command": args.command,
                "config": {"file": args.config, "values": settings.used, "seed": args.seed},
                "results": result,
                "files": [str(f) for f in files],
                "wall_clock_seconds": time.perf_counter() - start,
            }
            record_path.write_text(json.dumps(jsonable(record), indent=2, sort_keys=True), encoding="utf-8")
        return EXIT_OK
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (CuspextError, InsufficientDataError, UsageError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
