"""Command-line front end: ``irkwavelab {schemes,analyze,optimize,map,run,verify}``.

Artifacts (CSV for curves, maps and tables; JSON for tableaux and reports)
go to ``--output-dir``.  Every artifact-producing command finishes by writing
``manifest.json`` listing what it wrote.  Exit status is 0 when all requested
checks pass, 1 when a check or run fails and 2 for unknown names or bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .butcher import (
    ButcherTableau,
    SchemeLookupError,
    TableauError,
    builtin_scheme,
    order_of_accuracy,
    registry_names,
    scheme_info,
)
from .optimizer import (
    BracketError,
    NoSolutionError,
    WeightedObjective,
    minimize_param,
    parse_closures,
    solve_three_stage,
    solve_two_stage,
    system_residual,
    verify_scheme,
)
from .problems import REDUCED_LENGTH, build_problem, reference_table, run, run_cell
from .spatial import KINDS, build_operator, qwave_threshold, velocity_map
from .spectral import dispersion_norm, dispersive_order, sample_curve

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# comparison rules per tolerance profile
PROFILES = {
    "paper": {"factor": 3.0, "loose_factor": 5.0, "rate": 0.15},
    "strict": {"factor": 1.5, "loose_factor": 2.0, "rate": 0.05},
}


class UsageError(Exception):
    """Bad user input; maps to exit code 2."""


@dataclass
class RunManifest:
    command: list
    config: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    version: str = __version__
    wall_time: float = 0.0

    def add(self, path: Path) -> Path:
        self.artifacts.append(str(path))
        return path

    def write(self, outdir: Path) -> Path:
        path = outdir / "manifest.json"
        self.artifacts.append(str(path))
        path.write_text(json.dumps(self.__dict__, indent=2, default=str) + "\n")
        return path


# ------------------------------------------------------------------ helpers


def parse_range(text: str) -> np.ndarray:
    """``a:b:n`` -> n uniform samples from a to b inclusive; a bare number -> [a]."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected a:b:n") from None
    if n < 1:
        raise UsageError(f"range {text!r} needs n >= 1")
    return np.linspace(a, b, n) if n > 1 else np.array([a])


def load_scheme(spec: str) -> ButcherTableau:
    """Registry name, or path to a tableau JSON file."""
    path = Path(spec)
    if path.suffix == ".json" or path.is_file():
        try:
            return ButcherTableau.from_dict(json.loads(path.read_text()))
        except FileNotFoundError:
            raise UsageError(f"no such file: {spec}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{spec}: line {exc.lineno}: {exc.msg}") from None
        except (KeyError, TableauError, ValueError) as exc:
            raise UsageError(f"{spec}: {exc}") from None
    try:
        return builtin_scheme(spec)
    except SchemeLookupError as exc:
        raise UsageError(exc.args[0]) from None


def _outdir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


# ----------------------------------------------------------------- schemes


def cmd_schemes(args) -> int:
    if args.action == "show":
        if not args.name:
            raise UsageError("schemes show needs a scheme name")
        tab = load_scheme(args.name)
        print(json.dumps(tab.to_dict(), indent=2))
        return EXIT_OK
    print(f"{'name':8s} {'stages':>6s} {'order':>5s} {'disp':>6s} {'phi[0,pi]':>12s}  family")
    for name in registry_names():
        tab = builtin_scheme(name)
        info = scheme_info(name)
        try:
            phi = f"{dispersion_norm(tab):.6e}"
        except ArithmeticError:
            phi = "singular"
        disp = dispersive_order(tab)
        print(f"{name:8s} {tab.stages:6d} {order_of_accuracy(tab):5d} {str(disp):>6s} {phi:>12s}  "
              f"{info.get('family', '')}")
    return EXIT_OK


# ----------------------------------------------------------------- analyze


def cmd_analyze(args, manifest: RunManifest) -> int:
    if args.samples < 16:
        raise UsageError("--samples must be at least 16")
    tab = load_scheme(args.scheme)
    out = _outdir(args)
    stem = tab.name or Path(args.scheme).stem
    curve = sample_curve(tab, args.samples)
    curve.to_csv(manifest.add(out / f"{stem}_curve.csv"))
    report = verify_scheme(tab)
    path = manifest.add(out / f"{stem}_report.json")
    path.write_text(json.dumps(report, indent=2) + "\n")
    manifest.config = {"scheme": args.scheme, "samples": args.samples}
    print(json.dumps(report, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- optimize


def _auto_reference(stages: int, alpha, lines) -> str | None:
    """Registry row derived from the same alpha and closure text, if any."""
    want = sorted(s.replace(" ", "") for s in lines)
    for name in registry_names():
        info = scheme_info(name)
        if info.get("stages") != stages or str(info.get("alpha")) != str(alpha):
            continue
        if sorted(s.replace(" ", "") for s in info.get("closures", [])) == want and want:
            return name
    return None


def _parse_alpha(text: str):
    if text.lower() in ("inf", "infinity"):
        return "inf"
    try:
        a = float(text)
    except ValueError:
        raise UsageError(f"--alpha must be a number or 'inf', got {text!r}") from None
    if a < 0 or math.isnan(a):
        raise UsageError("--alpha must be non-negative")
    return int(a) if a.is_integer() else a


def cmd_optimize(args, manifest: RunManifest) -> int:
    alpha = _parse_alpha(args.alpha)
    try:
        text = Path(args.closures).read_text() if Path(args.closures).is_file() else args.closures
        closures = parse_closures(text, args.family)
        closures.check()
    except ValueError as exc:
        raise UsageError(f"closures: {exc}") from None
    reference = args.reference
    if reference is None and not args.no_reference:
        reference = _auto_reference(args.family, alpha, closures.lines)
    ref_tab = load_scheme(reference) if reference else None

    log = {"family": args.family, "alpha": alpha, "closures": list(closures.lines)}
    try:
        if args.param is not None:
            param = float(args.param)
            log["param_source"] = "given"
        else:
            param = minimize_param(WeightedObjective(args.family, alpha))
            log["param_source"] = "minimized"
        log["param_min"] = param
        solve = solve_two_stage if args.family == 2 else solve_three_stage
        tab = solve(param, closures, reference=ref_tab, seed=args.seed,
                    name=args.name or (reference or f"S{args.family}-opt"))
    except (BracketError, NoSolutionError) as exc:
        log["error"] = str(exc)
        print(f"optimize failed: {exc}", file=sys.stderr)
        out = _outdir(args)
        path = manifest.add(out / "derivation.json")
        path.write_text(json.dumps(log, indent=2) + "\n")
        manifest.checks["solve"] = False
        return EXIT_FAIL

    log["residual"] = system_residual(tab, param, closures)
    log["tie_break"] = f"nearest to {reference}" if ref_tab is not None else "bounded, smallest max|a|"
    if ref_tab is not None:
        log["max_abs_diff_to_reference"] = float(max(np.abs(tab.A - ref_tab.A).max(),
                                                     np.abs(tab.b - ref_tab.b).max()))
    out = _outdir(args)
    stem = args.name or reference or f"S{args.family}-opt"
    manifest.add(out / f"{stem}.json").write_text(json.dumps(tab.to_dict(), indent=2) + "\n")
    manifest.add(out / f"{stem}_derivation.json").write_text(json.dumps(log, indent=2) + "\n")
    manifest.config = log
    manifest.checks["solve"] = True
    print(json.dumps(tab.to_dict(), indent=2))
    print(json.dumps(log, indent=2), file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------- map


def cmd_map(args, manifest: RunManifest) -> int:
    tab = load_scheme(args.scheme)
    if args.operator not in KINDS:
        raise UsageError(f"unknown operator {args.operator!r}; choose from {', '.join(KINDS)}")
    nc, kh = parse_range(args.nc), parse_range(args.kh)
    h = args.h
    try:
        op = build_operator(args.operator, args.nodes, h, args.boundary)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    probe = None if args.probe == "mid" else int(args.probe)
    try:
        vmap = velocity_map(op, tab, nc, kh, probe)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _outdir(args)
    vmap.to_csv(manifest.add(out / f"map_{tab.name}_{args.operator}.csv"))
    report = {"scheme": tab.name, "operator": args.operator, "nodes": args.nodes,
              "boundary": args.boundary, "probe": args.probe}
    if args.threshold:
        report["qwave_kh"] = qwave_threshold(op, tab, nc, probe)
        print(f"q-wave threshold kh = {report['qwave_kh']}")
    manifest.add(out / f"map_{tab.name}_{args.operator}.json").write_text(
        json.dumps(report, indent=2) + "\n")
    manifest.config = report
    return EXIT_OK


# --------------------------------------------------------------------- run


RUN_KEYS = {"problem", "scheme", "output", "solver"}


def cmd_run(args, manifest: RunManifest) -> int:
    try:
        config = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such config: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: line {exc.lineno}: {exc.msg}") from None
    if "problem" not in config or "scheme" not in config:
        raise UsageError("config needs 'problem' and 'scheme'")
    tab = load_scheme(config["scheme"])
    params = {k: v for k, v in config.items() if k not in RUN_KEYS}
    if "operator" in params:
        params["kind"] = params.pop("operator")
    try:
        setup = build_problem(int(config["problem"]), **params)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"config: {exc}") from None
    manifest.config = config
    out = _outdir(args)
    stem = config.get("output") or f"problem{config['problem']}_{tab.name}"
    summary = manifest.add(out / f"{stem}.csv")
    header = ["problem", "scheme", "dt", "t_end", "steps", "error"]
    if setup.steps == 0:
        _write_csv(summary, header, [])
        manifest.checks["run"] = True
        return EXIT_OK
    try:
        res = run(setup, tab, solver=config.get("solver"))
    except ArithmeticError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        manifest.checks["run"] = False
        return EXIT_FAIL
    _write_csv(summary, header, [[res.problem, res.scheme, repr(res.dt), repr(res.t_end),
                                  res.report.steps, repr(res.error)]])
    if setup.x is not None and res.u.size == setup.x.size:
        exact = setup.exact(setup.t_end)
        _write_csv(manifest.add(out / f"{stem}_state.csv"), ["x", "u", "exact"],
                   [[repr(float(a)), repr(float(b)), repr(float(c))]
                    for a, b, c in zip(setup.x, res.u, exact)])
    manifest.checks["run"] = True
    print(f"problem {res.problem} {res.scheme}: dt={res.dt:.6g} steps={res.report.steps} "
          f"error={res.error:.6e}")
    return EXIT_OK


# ------------------------------------------------------------------ verify


@dataclass
class Cell:
    table: int
    scheme: str
    column: float
    measured: float | None
    paper: float | None
    rule: str
    passed: bool | None

    def row(self):
        status = "" if self.passed is None else ("pass" if self.passed else "FAIL")
        return [self.table, self.scheme, repr(self.column), _fmt(self.measured),
                _fmt(self.paper), self.rule, status]


def _run_one(job):
    table, scheme, value, reduced = job
    res = run_cell(table, scheme, value, reduced=reduced)
    out = {"error": res.error}
    if not reduced or res.problem != 6:
        return job, out
    ref = reference_table(table)
    setup = build_problem(6, nc=value, family=ref["family"], length=REDUCED_LENGTH)
    out["temporal"] = float(np.sqrt(np.mean((res.u - setup.params["semidiscrete"](setup.t_end)) ** 2)))
    return job, out


def _execute(jobs, n_workers):
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(n_workers) as ex:
            return dict(ex.map(_run_one, jobs))
    return dict(map(_run_one, jobs))


def _within(measured, paper, factor):
    if measured is None or paper is None or paper <= 0 or not measured > 0:
        return False
    return 1.0 / factor <= measured / paper <= factor


def _argmin(d):
    d = {k: v for k, v in d.items() if v is not None}
    return min(d, key=d.get) if d else None


def _group(name):
    return 2 if name.startswith(("S2", "IRK24")) else 3


def _cell_plan(table, full):
    ref = reference_table(table)
    schemes, cols = list(ref["schemes"]), list(ref["columns"])
    extra = []
    if ref["problem"] == 6 and not full:
        extra = [0.3] if ref["family"] == 2 else []
    return ref, schemes, cols + extra


def verify_table(table: int, profile: dict, jobs: int = 1, full: bool = False):
    """Run every cell of one reference table; returns (cells, checks)."""
    ref, schemes, cols = _cell_plan(table, full)
    reduced = not full
    plan = [(table, s, c, reduced) for s in schemes for c in cols]
    results = _execute(plan, jobs)
    meas = {(s, c): results[(table, s, c, reduced)]["error"] for s in schemes for c in cols}
    paper = {(s, c): v for s, d in ref["schemes"].items() for c, v in zip(ref["columns"], d["errors"])}
    cells, checks = [], {}
    f3, f5, drate = profile["factor"], profile["loose_factor"], profile["rate"]

    def add(s, c, rule, passed, measured=None, pap=None):
        cells.append(Cell(table, s, c, measured, pap, rule, passed))
        if passed is not None:
            checks[f"{s}@{c}:{rule}"] = bool(passed)

    if table in (9, 10):
        for s in schemes:
            for c in cols:
                add(s, c, f"factor {f3:g}", _within(meas[s, c], paper[s, c], f3), meas[s, c], paper[s, c])
        if table == 9:
            for s in schemes:
                rates = ref["schemes"][s]["rates"]
                for i in (0, 1):
                    if rates[i] is None:
                        continue
                    got = math.log(meas[s, cols[i + 1]] / meas[s, cols[i]]) / math.log(cols[i + 1] / cols[i])
                    add(s, cols[i], f"rate +-{drate:g}", abs(got - rates[i]) <= drate, got, rates[i])
        for ci, c in enumerate(cols):
            for g in (2, 3):
                names = [s for s in schemes if _group(s) == g]
                ours = _argmin({s: meas[s, c] for s in names})
                if table == 9:
                    best = [s for s in names if ci in ref["schemes"][s].get("best", [])]
                else:
                    best = [_argmin({s: paper[s, c] for s in names})]
                if best:
                    add(ours, c, f"winner among {g}-stage in {'/'.join(best)}", ours in best)
    elif table == 11:
        for s in schemes:
            for c in cols:
                fac = f3 if c <= 7.5 else f5
                if paper[s, c] is None:
                    add(s, c, "no reference", None, meas[s, c])
                    continue
                add(s, c, f"factor {fac:g}", _within(meas[s, c], paper[s, c], fac), meas[s, c], paper[s, c])
        two = [s for s in schemes if _group(s) == 2]
        add(_argmin({s: meas[s, 7.5] for s in two}), 7.5, "S2C1 best two-stage",
            _argmin({s: meas[s, 7.5] for s in two}) == "S2C1")
        add(_argmin({s: meas[s, 15.0] for s in two}), 15.0, "S2B1 best two-stage",
            _argmin({s: meas[s, 15.0] for s in two}) == "S2B1")
    elif table == 12:
        for s in schemes:
            for c in cols:
                required = c in (1.0, 2.0, 3.0) if _group(s) == 2 else c in (2.0, 3.0)
                ok = _within(meas[s, c], paper[s, c], f3)
                add(s, c, f"factor {f3:g}" + ("" if required else " (informative)"),
                    ok if required else None, meas[s, c], paper[s, c])
        two = [s for s in schemes if _group(s) == 2]
        for c in cols:
            if c >= 2.0:
                win = _argmin({s: meas[s, c] for s in two})
                add(win, c, "S2B1 lowest two-stage", win == "S2B1")
    else:
        family = ref["family"]
        if full:
            for s in schemes:
                for c in cols:
                    add(s, c, f"factor {f5:g}", _within(meas[s, c], paper[s, c], f5), meas[s, c], paper[s, c])
        else:
            temporal = {(s, c): results[(table, s, c, reduced)]["temporal"] for s in schemes for c in cols}
            need = 2.0 if family == 2 else 4.0
            for s in schemes:
                errs = [meas[s, c] for c in sorted(ref["columns"])]
                add(s, min(ref["columns"]), "monotone in N_c",
                    all(a < b for a, b in zip(errs, errs[1:])))
                for c in cols:
                    add(s, c, "reduced domain", None, meas[s, c], paper.get((s, c)))
                e_hi, e_lo = temporal[s, 0.6], temporal[s, 0.3]
                rate = math.log(e_hi / e_lo) / math.log(2.0)
                add(s, 0.6, f"temporal order >= {need:g}", rate >= need, rate)
            if family == 3:
                order = [meas[s, 0.6] for s in ("S3B1", "S3C1", "S3D1")]
                add("S3B1<=S3C1<=S3D1", 0.6, "ordering", order[0] <= order[1] <= order[2])
    return cells, checks, meas


def _table_layout(table, meas, cols, path):
    schemes = list(dict.fromkeys(s for s, _ in meas))
    _write_csv(path, ["scheme"] + [f"{c:g}" for c in cols],
               [[s] + [_fmt(meas.get((s, c))) for c in cols] for s in schemes])


def cmd_verify(args, manifest: RunManifest) -> int:
    tables = list(range(9, 15)) if args.all else [args.table]
    if any(t is None or not 9 <= t <= 14 for t in tables):
        raise UsageError("use --table 9..14 or --all")
    profile = PROFILES[args.tol_profile]
    out = _outdir(args)
    manifest.config = {"tables": tables, "profile": args.tol_profile, "full": args.full}
    status = EXIT_OK
    for t in tables:
        cells, checks, meas = verify_table(t, profile, args.jobs, args.full)
        _, _, cols = _cell_plan(t, args.full)
        _table_layout(t, meas, cols, manifest.add(out / f"table{t}.csv"))
        _write_csv(manifest.add(out / f"verify{t}.csv"),
                   ["table", "scheme", "column", "measured", "paper", "rule", "status"],
                   [c.row() for c in cells])
        for c in cells:
            if c.passed is not None:
                print("  ".join(str(v) for v in c.row()))
        manifest.checks.update({f"table{t}:{k}": v for k, v in checks.items()})
        failed = sum(not v for v in checks.values())
        print(f"table {t}: {len(checks) - failed}/{len(checks)} checks pass")
        if failed:
            status = EXIT_FAIL
    return status


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irkwavelab", description=__doc__.splitlines()[0])
    p.add_argument("--output-dir", default="irkwavelab-out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--tol-profile", choices=sorted(PROFILES), default="paper")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("schemes", help="list the registry or show one tableau")
    s.add_argument("action", choices=["list", "show"])
    s.add_argument("name", nargs="?")

    s = sub.add_parser("analyze", help="spectral curve and scheme report")
    s.add_argument("scheme", help="registry name or tableau JSON file")
    s.add_argument("--samples", type=int, default=1024)

    s = sub.add_parser("optimize", help="minimise phase error, then solve for coefficients")
    s.add_argument("--family", type=int, choices=[2, 3], required=True)
    s.add_argument("--alpha", required=True, help="weight exponent or 'inf'")
    s.add_argument("--closures", required=True, help="file, or inline text with ';' separators")
    s.add_argument("--reference", help="tableau used to pick among several roots")
    s.add_argument("--no-reference", action="store_true", help="skip automatic registry matching")
    s.add_argument("--param", type=float, help="use this Y or X instead of minimising")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--name")

    s = sub.add_parser("map", help="phase/group velocity map of a fully discrete scheme")
    s.add_argument("--scheme", required=True)
    s.add_argument("--operator", required=True)
    s.add_argument("--nodes", type=int, default=501)
    s.add_argument("--h", type=float, default=1.0)
    s.add_argument("--boundary", choices=["closed", "periodic"], default="closed")
    s.add_argument("--probe", default="mid")
    s.add_argument("--nc", default="0.1:3:30")
    s.add_argument("--kh", default="0.01:3.14159:315")
    s.add_argument("--threshold", action="store_true", help="also report the q-wave kh")

    s = sub.add_parser("run", help="run one benchmark from a JSON config")
    s.add_argument("--config", required=True)

    s = sub.add_parser("verify", help="reproduce a reference error table")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--table", type=int)
    g.add_argument("--all", action="store_true")
    s.add_argument("--full", action="store_true", help="2D tables on the full 601x601 grid")
    return p


COMMANDS = {"analyze": cmd_analyze, "optimize": cmd_optimize, "map": cmd_map,
            "run": cmd_run, "verify": cmd_verify}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "schemes":
            return cmd_schemes(args)
        manifest = RunManifest(command=["irkwavelab"] + argv)
        clock = time.perf_counter()
        try:
            code = COMMANDS[args.command](args, manifest)
        finally:
            if manifest.artifacts:
                manifest.wall_time = time.perf_counter() - clock
                manifest.write(_outdir(args))
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
