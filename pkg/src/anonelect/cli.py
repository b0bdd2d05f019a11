"""Command-line front end.

Exit codes: 0 when every contract holds, 1 when a violation is found where
the parameters predict success, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from anonelect.errors import BudgetExceeded, InfeasibleParams, StateBoundExceeded
from anonelect.harness import (
    DELECTION,
    EXACT,
    ExecutionTrace,
    RunConfig,
    check_symmetry,
    check_trace_invariants,
    classify,
    execute,
)
from anonelect.memory import make_permutations
from anonelect.numth import Params, feasibility, in_M, witness_size
from anonelect.procs import ALGORITHMS, make_machine
from anonelect.rwlib import RW_MACHINES
from anonelect.sched import explore
from anonelect.sweep import report_ok, sweep, witness

OUT_DIR_ENV = "ANONELECT_OUT_DIR"

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _output_path(args, default_name: str) -> Path | None:
    if getattr(args, "out", None):
        return Path(args.out)
    out_dir = os.environ.get(OUT_DIR_ENV)
    if out_dir:
        return Path(out_dir) / default_name
    return None


def _emit(args, doc: dict, default_name: str, lines: list[str]) -> None:
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    path = _output_path(args, default_name)
    if path is not None:
        write_atomic(path, text)
        lines = lines + [f"wrote {path}"]
    if getattr(args, "json", False):
        sys.stdout.write(text)
    else:
        for line in lines:
            print(line)


def parse_range(text: str) -> list[int]:
    """``"2..6"`` (inclusive), ``"1,3,5"`` or a single integer."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def parse_participation(text: str):
    if text == "all":
        return "all"
    if text.startswith("random:"):
        _, frac, seed = text.split(":")
        return {"random": float(frac), "seed": int(seed)}
    return [int(t) for t in text.split(",")]


def _positive(p: Params):
    try:
        return p.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# check
# --------------------------------------------------------------------------

def cmd_check(args) -> int:
    p = _positive(Params(args.n, args.m, args.d))
    report = feasibility(*p)
    rows = [name for name, ok in report["rows"].items() if ok]
    lines = [
        f"n={p.n} m={p.m} d={p.d}",
        f"in_M(m,n,d)={report['in_M']}  gcd(m,n)={report['gcd']}  "
        f"gcd|d={report['gcd_divides_d']}  gcd<=d={report['gcd_le_d']}",
        f"feasible rows: {', '.join(rows) if rows else 'none'}",
    ]
    if report["bezout"]:
        lines.append(f"bezout u={report['bezout']['u']} v={report['bezout']['v']}")
    _emit(args, {"version": 1, "kind": "check", **report}, f"check-{p.n}-{p.m}-{p.d}.json", lines)
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def _problem(algorithm: str) -> str:
    return EXACT if algorithm == "alg2" else DELECTION


def _predicted_feasible(config: RunConfig) -> bool:
    n, m, d = config.params
    if config.schedule.get("policy") == "ring":
        return False
    if config.algorithm == "alg1":
        return in_M(m, n, d)
    return True  # alg2 / gcd-composition refuse infeasible params; alg3 always works


def config_from_args(args) -> RunConfig:
    base: dict = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key in ("algorithm", "n", "m", "d", "step_bound"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    if args.schedule is not None or "schedule" not in base:
        policy = args.schedule or "random"
        sched = {"policy": policy}
        if policy == "random":
            sched["seed"] = args.seed if args.seed is not None else 0
        elif policy == "ring":
            sched["k"] = args.k if args.k is not None else base.get("n")
        base["schedule"] = sched
    elif args.seed is not None and base["schedule"].get("policy") == "random":
        base["schedule"]["seed"] = args.seed
    if args.perms is not None or "permutations" not in base:
        pol = args.perms or "identity"
        perms = {"policy": pol}
        if pol == "random":
            perms["seed"] = args.perm_seed if args.perm_seed is not None else 0
        if pol == "rotation":
            perms["stride"] = args.stride
        base["permutations"] = perms
    if args.participation is not None:
        try:
            base["participation"] = parse_participation(args.participation)
        except ValueError as exc:
            raise ConfigError(f"bad participation {args.participation!r}") from exc
    missing = [k for k in ("algorithm", "n", "m", "d") if k not in base]
    if missing:
        raise ConfigError(f"missing {', '.join(missing)} (flags or --config)")
    try:
        config = RunConfig.from_json({"participation": "all", **base})
        return config.validate()
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def summarize(trace: ExecutionTrace, config: RunConfig):
    problem = _problem(config.algorithm)
    outcome = classify(trace, problem, config.params)
    bad = check_trace_invariants(trace, config.algorithm, config.params)
    label = "exact-d" if problem == EXACT else "d-election"
    verdict = "OK" if outcome.ok else f"VIOLATION ({outcome.reason})"
    lines = [
        f"leaders={outcome.leaders}, {label} {verdict}",
        f"steps={len(trace.steps)} termination={trace.termination['status']} "
        f"max_register={trace.max_register}",
        "invariants: ok" if not bad else "invariants: " + "; ".join(bad),
    ]
    return outcome, bad, lines


def cmd_simulate(args) -> int:
    if args.replay:
        return _replay(args)
    config = config_from_args(args)
    try:
        trace = execute(config)
    except InfeasibleParams as exc:
        raise ConfigError(str(exc)) from exc
    outcome, bad, lines = summarize(trace, config)
    lines.insert(0, f"{config.algorithm} n={config.n} m={config.m} d={config.d} "
                    f"schedule={config.schedule} permutations={config.permutations}")
    doc = trace.to_json(full_states=args.full_states)
    _emit(args, doc, f"trace-{config.algorithm}-{config.n}-{config.m}-{config.d}.json", lines)
    if _predicted_feasible(config) and (not outcome.ok or bad):
        return EXIT_VIOLATION
    return EXIT_OK


def _replay(args) -> int:
    try:
        original = json.loads(Path(args.replay).read_text())
        config = RunConfig.from_json(original["config"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load trace {args.replay}: {exc}") from exc
    trace = execute(config)
    full = bool(original.get("full_states"))
    fresh = json.dumps(trace.to_json(full_states=full), sort_keys=True)
    same = fresh == json.dumps(original, sort_keys=True)
    _, _, lines = summarize(trace, config)
    lines.append("replay: identical" if same else "replay: MISMATCH")
    for line in lines:
        print(line)
    return EXIT_OK if same else EXIT_VIOLATION


# --------------------------------------------------------------------------
# sweep / witness / explore / symmetry
# --------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    try:
        ns, ms, ds = parse_range(args.n), parse_range(args.m), parse_range(args.d)
    except ValueError as exc:
        raise ConfigError(f"bad range: {exc}") from exc
    if any(v < 1 for v in ns + ms + ds):
        raise ConfigError("ranges must contain positive integers")
    try:
        report = sweep(ns, ms, ds, range(args.seeds), witnesses=not args.no_witness,
                       max_runs=args.max_runs, jobs=args.jobs)
    except BudgetExceeded as exc:
        raise ConfigError(str(exc)) from exc
    lines = []
    for row in report["table"]:
        if "feasible_cells" in row:
            lines.append(
                f"{row['row']}: feasible {row['feasible_cells_passing']}/{row['feasible_cells']} cells pass "
                f"({row['runs_passed']}/{row['runs']} runs); infeasible {row['infeasible_cells']}, "
                f"witnesses {row['witnesses_violating']}/{row['witnesses']} violating"
            )
        else:
            lines.append(f"{row['row']}: {row['machines_checked']} RW machines checked, "
                         f"{row['divergent']} divergent")
    _emit(args, report, "sweep.json", lines)
    return EXIT_OK if report_ok(report) else EXIT_VIOLATION


def cmd_witness(args) -> int:
    p = _positive(Params(args.n, args.m, args.d))
    if witness_size(*p) is None:
        print("parameters feasible: gcd(m, k) <= d for every k <= n; no witness exists")
        return EXIT_CONFIG
    try:
        summary, trace = witness(*p, algorithm=args.algorithm, step_bound=args.step_bound)
    except (InfeasibleParams, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    ring = summary["ring"]
    sym = summary["symmetry"]
    lines = [
        f"witness k={summary['k']} delta={ring['delta']} spacing={ring['spacing']}",
        "P-sets: " + " ".join("{" + ",".join(f"p{i}" for i in s) + "}" for s in ring["p_sets"]),
        "Q-sets: " + " ".join("{" + ",".join(f"p{i}" for i in s) + "}" for s in ring["q_sets"]),
        f"symmetry: {'holds' if sym['symmetric'] else 'BROKEN'} over {sym['rounds']} rounds "
        f"({sym['steps']} steps, {sym['termination']['status']})",
        f"leaders={summary['outcome']['leaders']} contract={summary['outcome']['contract']}"
        + (f" ({summary['outcome']['reason']})" if summary["outcome"]["reason"] else ""),
    ]
    doc = {"version": 1, "kind": "witness", "summary": summary,
           "trace": trace.to_json(full_states=args.full_states)}
    _emit(args, doc, f"witness-{p.n}-{p.m}-{p.d}.json", lines)
    ok = sym["symmetric"] and summary["violation"]
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_explore(args) -> int:
    p = _positive(Params(args.n, args.m, args.d))
    try:
        machine = make_machine(args.algorithm, p)
    except (InfeasibleParams, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    perms = make_permutations(p.n, p.m, args.perms, seed=args.perm_seed)
    partial = False
    try:
        result = explore([machine] * p.n, perms, p.m, state_bound=args.state_bound)
    except StateBoundExceeded as exc:
        result, partial = exc.partial, True
    doc = {"version": 1, "kind": "explore", "algorithm": args.algorithm, "n": p.n, "m": p.m,
           "d": p.d, "permutations": args.perms, "partial": partial, **result.to_json()}
    lines = [
        f"{args.algorithm} n={p.n} m={p.m} d={p.d}: {result.states} states, "
        f"{result.terminals} terminal, outcomes={sorted(result.outcomes)}, cycles={result.cycles}"
        + (" (state bound hit, partial)" if partial else "")
    ]
    _emit(args, doc, f"explore-{args.algorithm}-{p.n}-{p.m}-{p.d}.json", lines)
    if partial:
        return EXIT_VIOLATION
    lo, hi = (p.d, p.d) if args.algorithm == "alg2" else (1, p.d)
    feasible = args.algorithm != "alg1" or in_M(p.m, p.n, p.d)
    if feasible and not all(lo <= k <= hi for k in result.outcomes):
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_symmetry(args) -> int:
    p = _positive(Params(args.n, args.m, args.d))
    by_name = {cls.name: cls for cls in RW_MACHINES}
    names = list(by_name) if args.machine == "rw-all" else [args.machine]
    perms = make_permutations(p.n, p.m, "identity")
    results = []
    lines = []
    for name in names:
        if name in by_name:
            machine = by_name[name](p)
        else:
            try:
                machine = make_machine(name, p)
            except (InfeasibleParams, ValueError) as exc:
                raise ConfigError(str(exc)) from exc
        report, _ = check_symmetry([machine] * p.n, perms, args.bound)
        results.append({"machine": name, **report.to_json()})
        if report.symmetric:
            lines.append(f"{name}: symmetric for {report.rounds} rounds "
                         f"({report.termination['status']}, rw_only={report.rw_only})")
        else:
            dv = report.divergence
            lines.append(f"{name}: diverged at step {dv['step']} (round {dv['round']}, "
                         f"pid {dv['pid']} vs pid {dv['peer']}, op {dv['op']})")
    _emit(args, {"version": 1, "kind": "symmetry", "n": p.n, "m": p.m, "results": results},
          f"symmetry-{p.n}-{p.m}.json", lines)
    # divergence is only a violation for machines restricted to reads and writes
    broken = [r for r in results if r["rw_only"] and not (r["symmetric"] and r["verdicts_uniform"])]
    return EXIT_VIOLATION if broken else EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _add_output(sp):
    sp.add_argument("--out", help=f"write JSON here (default: ${OUT_DIR_ENV}/<name>.json if set)")
    sp.add_argument("--json", action="store_true", help="print the JSON document instead of a summary")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anonelect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("check", help="feasibility conditions for (n, m, d)")
    for name in ("n", "m", "d"):
        sp.add_argument(f"--{name}", type=int, required=True)
    _add_output(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("simulate", help="run one execution and write its trace")
    sp.add_argument("--config", help="JSON run configuration; flags override it")
    sp.add_argument("--algorithm", choices=ALGORITHMS)
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--schedule", choices=("random", "lockstep", "ring"))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--k", type=int, help="participants for the ring schedule")
    sp.add_argument("--perms", choices=("identity", "rotation", "random"))
    sp.add_argument("--perm-seed", type=int)
    sp.add_argument("--stride", type=int, default=1)
    sp.add_argument("--participation", help='"all", "0,2,3" or "random:FRACTION:SEED"')
    sp.add_argument("--step-bound", dest="step_bound", type=int)
    sp.add_argument("--full-states", action="store_true")
    sp.add_argument("--replay", metavar="TRACE", help="re-run a trace from its config and compare")
    _add_output(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="feasibility-table sweep over parameter ranges")
    sp.add_argument("--n", default="2..6")
    sp.add_argument("--m", default="1..8")
    sp.add_argument("--d", default="1..5")
    sp.add_argument("--seeds", type=int, default=50, help="seeds 0..SEEDS-1")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--max-runs", type=int, default=500_000)
    sp.add_argument("--no-witness", action="store_true")
    _add_output(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("witness", help="ring-adversary lock-step run for infeasible parameters")
    for name in ("n", "m", "d"):
        sp.add_argument(f"--{name}", type=int, required=True)
    sp.add_argument("--algorithm", choices=ALGORITHMS, default="alg1")
    sp.add_argument("--step-bound", type=int)
    sp.add_argument("--full-states", action="store_true")
    _add_output(sp)
    sp.set_defaults(func=cmd_witness)

    sp = sub.add_parser("explore", help="exhaustive interleaving search")
    sp.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    for name in ("n", "m", "d"):
        sp.add_argument(f"--{name}", type=int, required=True)
    sp.add_argument("--perms", choices=("identity", "rotation", "random"), default="identity")
    sp.add_argument("--perm-seed", type=int, default=0)
    sp.add_argument("--state-bound", type=int, default=10**6)
    _add_output(sp)
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("symmetry", help="lock-step symmetry check under identical name maps")
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--m", type=int, default=3)
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--machine", default="rw-all",
                    help="rw-all, an RW library machine name, or an algorithm id")
    sp.add_argument("--bound", type=int, default=1000)
    _add_output(sp)
    sp.set_defaults(func=cmd_symmetry)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
