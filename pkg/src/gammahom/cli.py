"""Command-line entry point: ``gammahom <command> [options]``.

Every option can also come from an INI file given with ``--config``; keys
live in a ``[run]`` or ``[solver]`` section and use the option names below
(dashes or underscores).  Flags override file values and unknown keys are
errors.  Results go to stdout and to ``<output>/<command>.<ext>``; a
manifest ``<output>/<command>.manifest.json`` is written before any result.

Exit status: 0 when every check passes and no solver quality flag is
raised, 1 when a check fails, 2 on any execution error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .errors import ConstructionError, NumericalError, ParameterError, StructuralError
from .models.builtin import BUILTIN_MODELS, get_model, parse_matrix_literal
from .reports import VerificationReport, _jsonable

COMMANDS = ("homogenize", "cell", "epsilon-sweep", "tiling", "verify", "qc-check")
FORMATS = {"text": "txt", "delimited": "csv", "structured": "json"}
OUTPUT_ENV = "GAMMAHOM_OUTPUT_DIR"
DEFAULT_OUTPUT = "gammahom-output"
CONFIG_SECTIONS = ("run", "solver")


class ConfigError(Exception):
    """Invalid command line or config file."""


def _float_list(text: str) -> list:
    try:
        vals = [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"malformed number list {text!r}") from exc
    if not vals:
        raise ConfigError(f"empty number list {text!r}")
    return vals


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"malformed boolean {text!r}")


@dataclass(frozen=True)
class _Option:
    name: str
    kind: Callable
    default: object
    help: str
    commands: tuple


_ALL = COMMANDS
_FIELD = ("homogenize", "cell", "epsilon-sweep", "qc-check")
_SOLVE = ("homogenize", "cell", "epsilon-sweep", "tiling")

OPTIONS = (
    _Option("model", str, None, "built-in model id or path to a quadratic-form INI file", _FIELD + ("tiling",)),
    _Option("Y", str, None, "macroscopic gradient, rows separated by ';' (e.g. '1 0; 0 1')", _FIELD + ("tiling",)),
    _Option("t", str, None, "cell side(s): comma list for homogenize/epsilon-sweep, one value otherwise",
            ("homogenize", "cell", "epsilon-sweep", "tiling")),
    _Option("s", int, None, "outer cube side (integer)", ("tiling",)),
    _Option("m", int, None, "spatial dimension", ("tiling",)),
    _Option("eps", str, "0.5,0.25", "comma list of oscillation periods", ("epsilon-sweep",)),
    _Option("resolution", int, 32, "grid nodes per unit length", _SOLVE),
    _Option("max_iterations", int, 2000, "descent iteration cap per run", _SOLVE),
    _Option("tolerance", float, 1e-6, "max-norm residual tolerance", _SOLVE),
    _Option("restarts", int, 0, "extra seeded random starts", _SOLVE),
    _Option("subadditivity", _bool, False, "also check the subadditivity chain (needs model and Y)", ("tiling",)),
    _Option("suite", str, "all", "verifier suite: all, density, swap, products, identities, cartan, bump, lsc",
            ("verify",)),
    _Option("samples", int, 32, "test fields for the Jensen probe", ("qc-check",)),
    _Option("directions", int, 16, "rank-one directions", ("qc-check",)),
    _Option("qc_tolerance", float, 1e-8, "allowed negative Jensen or second-difference gap", ("qc-check",)),
    _Option("seed", int, 0, "random seed", _ALL),
    _Option("format", str, "text", "output format: text, delimited or structured", _ALL),
    _Option("output", str, None, f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})", _ALL),
)


@dataclass
class RunConfig:
    """Fully resolved options for one command."""

    command: str
    model: Optional[str] = None
    Y: Optional[np.ndarray] = None
    schedule: list = field(default_factory=list)
    resolution: int = 32
    seed: int = 0
    output_path: Path = Path(DEFAULT_OUTPUT)
    format: str = "text"
    options: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = asdict(self)
        d["Y"] = None if self.Y is None else self.Y.tolist()
        d["output_path"] = str(self.output_path)
        return _jsonable(d)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gammahom", description="Periodic homogenization cell problems and counterexample checks.")
    parser.add_argument("--version", action="version", version=f"gammahom {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=f"run {cmd}")
        p.add_argument("--config", default=None, help="INI file with [run]/[solver] sections")
        for opt in OPTIONS:
            if cmd not in opt.commands:
                continue
            flags = [f"--{opt.name}"]
            if "_" in opt.name:
                flags.append(f"--{opt.name.replace('_', '-')}")
            # None marks "not given" so file values can fill in
            p.add_argument(*flags, dest=opt.name, default=None, help=f"{opt.help} (default {opt.default})")
    return parser


def _read_config_file(path: str, command: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(p.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {str(exc).splitlines()[0]}") from exc
    allowed = {opt.name for opt in OPTIONS if command in opt.commands}
    values = {}
    for section in parser.sections():
        if section not in CONFIG_SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, val in parser[section].items():
            name = key.replace("-", "_")
            if name not in allowed:
                raise ConfigError(f"{path}: unknown key {key!r} for command {command}")
            values[name] = val
    return values


def parse_config(argv=None) -> RunConfig:
    """Merge defaults, config file and flags into a validated :class:`RunConfig`."""
    args = build_parser().parse_args(argv)
    cmd = args.command
    merged = {opt.name: opt.default for opt in OPTIONS if cmd in opt.commands}
    if args.config:
        merged.update(_read_config_file(args.config, cmd))
    for name in merged:
        given = getattr(args, name, None)
        if given is not None:
            merged[name] = given
    kinds = {opt.name: opt.kind for opt in OPTIONS}
    vals = {}
    for name, raw in merged.items():
        if raw is None:
            vals[name] = None
            continue
        try:
            vals[name] = kinds[name](raw)
        except ValueError as exc:
            raise ConfigError(f"malformed value for {name}: {raw!r}") from exc

    if vals["format"] not in FORMATS:
        raise ConfigError(f"unknown format {vals['format']!r}; choose from {sorted(FORMATS)}")
    out = vals["output"] or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    cfg = RunConfig(command=cmd, seed=vals["seed"], format=vals["format"], output_path=Path(out),
                    resolution=vals.get("resolution") or 32)

    if vals.get("model") is not None:
        cfg.model = vals["model"]
        lag = _load_model(cfg.model)
        if vals.get("Y") is None:
            raise ConfigError("--Y is required with --model")
        try:
            cfg.Y = parse_matrix_literal(vals["Y"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.Y.shape != (lag.n_target, lag.m):
            raise ConfigError(f"Y has shape {cfg.Y.shape}, model {lag.name} needs {(lag.n_target, lag.m)}")
    elif cmd in _FIELD:
        raise ConfigError(f"{cmd} needs --model")

    if cmd in ("homogenize", "epsilon-sweep"):
        cfg.schedule = _float_list(vals["t"] if vals["t"] is not None else "1,2")
    elif cmd == "cell":
        cfg.schedule = _float_list(vals["t"] if vals["t"] is not None else "1")
        if len(cfg.schedule) != 1:
            raise ConfigError("cell takes a single --t value")
    elif cmd == "tiling":
        for key in ("t", "s", "m"):
            if vals[key] is None:
                raise ConfigError(f"tiling needs --{key}")
        t = _float_list(vals["t"])
        if len(t) != 1 or t[0] != int(t[0]):
            raise ConfigError("tiling needs a single integer --t")
        cfg.schedule = [int(t[0])]
        if vals["subadditivity"] and cfg.model is None:
            raise ConfigError("--subadditivity needs --model and --Y")
    if cmd == "epsilon-sweep":
        vals["eps"] = _float_list(vals["eps"])
    skip = {"model", "Y", "t", "resolution", "seed", "format", "output"}
    cfg.options = {k: v for k, v in vals.items() if k not in skip}
    return cfg


def _load_model(identifier: str):
    try:
        return get_model(identifier)
    except KeyError as exc:
        raise ConfigError(f"unknown model {identifier!r}; built-ins: {', '.join(sorted(BUILTIN_MODELS))}") from exc
    except (ValueError, OSError, StructuralError) as exc:
        raise ConfigError(f"cannot load model file {identifier}: {exc}") from exc


# =============================================================================
# output
# =============================================================================

@dataclass
class Outcome:
    """What one command produced: a structured payload, a table and pass/fail state."""

    payload: dict
    header: list
    rows: list
    text: str
    passed: bool
    warnings: list = field(default_factory=list)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(outcome: Outcome, fmt: str) -> str:
    if fmt == "structured":
        return json.dumps(_jsonable(outcome.payload), indent=2, sort_keys=True) + "\n"
    if fmt == "delimited":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(outcome.header)
        for row in outcome.rows:
            writer.writerow([_cell(v) for v in row])
        return buf.getvalue()
    return outcome.text


class Manifest:
    """Run manifest, rewritten after every task so partial runs stay diagnosable."""

    def __init__(self, config: RunConfig, path: Path):
        self.path = path
        self.data = {"toolkit": "gammahom", "version": __version__, "python": platform.python_version(),
                     "config": config.echo(), "status": "running", "tasks": [], "warnings": []}

    def write(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(_jsonable(self.data), indent=2, sort_keys=True) + "\n")

    def task(self, name: str, status: str, seconds: float, **extra):
        self.data["tasks"].append({"name": name, "status": status, "seconds": round(seconds, 6), **extra})
        self.write()


# =============================================================================
# commands
# =============================================================================

def _solve_config(cfg: RunConfig):
    from .cell import SolveConfig
    o = cfg.options
    return SolveConfig(max_iterations=o["max_iterations"], gradient_tolerance=o["tolerance"],
                       restarts=o["restarts"], seed=cfg.seed)


def _report_outcome(reports: list, extra_payload: Optional[dict] = None) -> Outcome:
    rows = [(r.name, c.passed, c.margin, c.description) for r in reports for c in r.clauses]
    payload = {"reports": [r.to_dict() for r in reports], "overall": all(r.overall for r in reports)}
    payload.update(extra_payload or {})
    text = "".join(r.to_text() for r in reports)
    return Outcome(payload, ["report", "pass", "margin", "clause"], rows, text, payload["overall"])


def _run_homogenize(cfg: RunConfig, manifest: Manifest) -> Outcome:
    from .homogenize import HomSchedule, estimate_f_hom
    lag = get_model(cfg.model)
    sched = HomSchedule(tuple(cfg.schedule), cfg.resolution, _solve_config(cfg))
    start = time.perf_counter()
    res = estimate_f_hom(lag, cfg.Y, sched)
    manifest.task("estimate_f_hom", "ok" if res.ok else "flagged", time.perf_counter() - start,
                  quality_flags=list(res.quality_flags))
    rec = res.to_record()
    lines = [f"model {res.model}", f"Y {res.Y.tolist()}"]
    lines += [f"t={t!r} g_t={e!r} converged={c} iterations={i}" for t, e, c, i in res.rows()]
    lines += [f"f_hom_estimate {res.f_hom_estimate!r}", f"fit_slope {res.fit_slope!r}",
              f"fit_residual {res.fit_residual!r}", f"quality_flags {','.join(res.quality_flags) or 'none'}"]
    rows = [(t, e, c, i, res.f_hom_estimate) for t, e, c, i in res.rows()]
    return Outcome(rec, ["t", "g_t", "converged", "iterations", "f_hom_estimate"], rows,
                   "\n".join(lines) + "\n", res.ok, [f"quality flag {f}" for f in res.quality_flags])


def _run_cell(cfg: RunConfig, manifest: Manifest) -> Outcome:
    from .cell import CellProblem, minimize
    lag = get_model(cfg.model)
    problem = CellProblem.build(lag, cfg.Y, cfg.schedule[0], cfg.resolution)
    sc = _solve_config(cfg)
    start = time.perf_counter()
    sol = minimize(problem, sc)
    manifest.task("minimize", "converged" if sol.converged else "not_converged", time.perf_counter() - start,
                  converged=sol.converged)
    rec = sol.to_record(problem, sc)
    lines = [f"model {lag.name}", f"t {problem.t!r}", f"energy {sol.energy!r}", f"converged {sol.converged}",
             f"iterations {sol.iterations_used}", f"residual {sol.residual!r}"]
    warns = [] if sol.converged else [f"solver did not reach tolerance {sc.gradient_tolerance} "
                                      f"in {sc.max_iterations} iterations"]
    row = (problem.t, sol.energy, sol.converged, sol.iterations_used, sol.residual)
    # non-convergence is reported, not treated as a failed check
    return Outcome(rec, ["t", "energy", "converged", "iterations", "residual"], [row],
                   "\n".join(lines) + "\n", True, warns)


def _run_sweep(cfg: RunConfig, manifest: Manifest) -> Outcome:
    from .homogenize import HomSchedule, epsilon_sweep_compare
    lag = get_model(cfg.model)
    sched = HomSchedule(tuple(cfg.schedule), cfg.resolution, _solve_config(cfg))
    start = time.perf_counter()
    res = epsilon_sweep_compare(lag, cfg.Y, cfg.options["eps"], sched)
    ok = res.passed and not res.quality_flags
    manifest.task("epsilon_sweep_compare", "ok" if ok else "failed", time.perf_counter() - start)
    lines = [f"f_hom_estimate {res.f_hom_estimate!r}"]
    lines += [f"eps={e!r} energy={v!r} converged={c} iterations={i}" for e, v, c, i in res.rows()]
    lines += [f"relative_gap {res.relative_gap!r}", f"passed {res.passed}",
              f"quality_flags {','.join(res.quality_flags) or 'none'}"]
    rows = [(e, v, c, i, res.f_hom_estimate) for e, v, c, i in res.rows()]
    return Outcome(res.to_record(), ["epsilon", "energy", "converged", "iterations", "f_hom_estimate"], rows,
                   "\n".join(lines) + "\n", ok, [f"quality flag {f}" for f in res.quality_flags])


def _run_tiling(cfg: RunConfig, manifest: Manifest) -> Outcome:
    from .tiling import TilingParams, build_tiling, verify_subadditivity, verify_tiling
    t, s, m = cfg.schedule[0], int(cfg.options["s"]), int(cfg.options["m"])
    start = time.perf_counter()
    tiling = build_tiling(TilingParams(t, s, m))
    reports = [verify_tiling(tiling)]
    manifest.task("verify_tiling", "pass" if reports[0].overall else "fail", time.perf_counter() - start)
    if cfg.options["subadditivity"]:
        start = time.perf_counter()
        rep = verify_subadditivity(get_model(cfg.model), cfg.Y, t, s, _solve_config(cfg), cfg.resolution)
        reports.append(rep)
        manifest.task("verify_subadditivity", "pass" if rep.overall else "fail", time.perf_counter() - start)
    out = _report_outcome(reports, {"tiling_dump": tiling.dumps()})
    out.text = tiling.dumps() + out.text
    return out


def _run_verify(cfg: RunConfig, manifest: Manifest) -> Outcome:
    from . import verifier
    groups = [g for g in verifier.SUITES if g != "all"] if cfg.options["suite"] == "all" else [cfg.options["suite"]]
    if cfg.options["suite"] not in verifier.SUITES:
        raise ConfigError(f"unknown suite {cfg.options['suite']!r}; choose from {verifier.SUITES}")
    reports = []
    for group in groups:
        start = time.perf_counter()
        got = verifier.run_suite(group, seed=cfg.seed)
        reports.extend(got)
        manifest.task(group, "pass" if all(r.overall for r in got) else "fail", time.perf_counter() - start)
    return _report_outcome(reports)


def _run_qc(cfg: RunConfig, manifest: Manifest) -> Outcome:
    from .homogenize import quasiconvexity_probe, rank_one_probe
    lag = get_model(cfg.model)
    density = lag.density()
    tol = cfg.options["qc_tolerance"]
    start = time.perf_counter()
    jensen = quasiconvexity_probe(density, cfg.Y, samples=cfg.options["samples"], seed=cfg.seed)
    second = rank_one_probe(density, cfg.Y, directions=cfg.options["directions"], seed=cfg.seed)
    rep = VerificationReport(f"qc-check[{lag.name}]", inputs={"Y": cfg.Y, "tolerance": tol})
    rep.add("Jensen gap over zero-boundary test fields >= -tolerance", jensen >= -tol, jensen + tol,
            worst_gap=jensen)
    rep.add("second differences along rank-one lines >= -tolerance", second >= -tol, second + tol,
            worst_second_difference=second)
    manifest.task("qc-check", "pass" if rep.overall else "fail", time.perf_counter() - start)
    return _report_outcome([rep])


RUNNERS = {
    "homogenize": _run_homogenize,
    "cell": _run_cell,
    "epsilon-sweep": _run_sweep,
    "tiling": _run_tiling,
    "verify": _run_verify,
    "qc-check": _run_qc,
}


def execute(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Run one command; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    manifest = Manifest(cfg, cfg.output_path / f"{cfg.command}.manifest.json")
    try:
        manifest.write()
    except OSError as exc:
        print(f"gammahom: error: cannot write manifest: {exc}", file=stderr)
        return 2
    try:
        outcome = RUNNERS[cfg.command](cfg, manifest)
    except (ConfigError, StructuralError, ParameterError, NumericalError, ConstructionError,
            ValueError, KeyError, OSError) as exc:
        manifest.data["status"] = "error"
        manifest.data["error"] = f"{type(exc).__name__}: {exc}"
        manifest.write()
        print(f"gammahom: error: {type(exc).__name__}: {exc}", file=stderr)
        return 2
    text = render(outcome, cfg.format)
    result_path = cfg.output_path / f"{cfg.command}.{FORMATS[cfg.format]}"
    result_path.write_text(text)
    stdout.write(text)
    for w in outcome.warnings:
        print(f"gammahom: warning: {w}", file=stderr)
    manifest.data["warnings"] = outcome.warnings
    manifest.data["status"] = "pass" if outcome.passed else "fail"
    manifest.data["result_file"] = result_path.name
    manifest.write()
    return 0 if outcome.passed else 1


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"gammahom: error: {exc}", file=sys.stderr)
        return 2
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
