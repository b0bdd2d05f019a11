"""Table-wide sweeps over (n, m, d) and necessity witnesses."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from anonelect.errors import BudgetExceeded
from anonelect.harness import (
    DELECTION,
    EXACT,
    RunConfig,
    check_symmetry,
    check_trace_invariants,
    classify,
    default_step_bound,
    execute,
)
from anonelect.memory import Permutation
from anonelect.numth import Params, divides, feasibility, gcd, in_M, witness_size
from anonelect.procs import make_machine
from anonelect.rwlib import rw_library
from anonelect.sched import ring_adversary

REPORT_VERSION = 1

ROW_NOT_REQUIRED = "d_election_not_required"
ROW_EXACT = "exact_d_election_required"
ROW_REQUIRED = "d_election_required"
ROW_RW = "rw_any"
ROWS = (ROW_NOT_REQUIRED, ROW_EXACT, ROW_REQUIRED)

_ROW_SETUP = {
    # row: (algorithm, problem, participation options allowed)
    ROW_NOT_REQUIRED: ("alg1", DELECTION, True),
    ROW_EXACT: ("alg2", EXACT, False),
    ROW_REQUIRED: ("gcd-composition", DELECTION, False),
}


def participation_for(kind: str, n: int, seed: int):
    if kind == "all":
        return "all"
    if kind == "half":
        return {"random": 0.5, "seed": seed}
    if kind == "singleton":
        return [seed % n]
    raise ValueError(f"unknown participation kind {kind!r}")


def row_feasible(row: str, n: int, m: int, d: int) -> bool:
    if row == ROW_NOT_REQUIRED:
        return in_M(m, n, d)
    if row == ROW_EXACT:
        return divides(gcd(m, n), d)
    if row == ROW_REQUIRED:
        return gcd(m, n) <= d
    raise ValueError(row)


def row_configs(row, n, m, d, seeds, perm_policies, participations):
    algorithm, _, optional = _ROW_SETUP[row]
    parts = participations if optional else ("all",)
    for seed in seeds:
        for pol in perm_policies:
            perms = {"policy": pol} if pol != "random" else {"policy": "random", "seed": seed}
            for part in parts:
                yield RunConfig(algorithm, n, m, d, schedule={"policy": "random", "seed": seed},
                                permutations=perms, participation=participation_for(part, n, seed))


def witness(n: int, m: int, d: int, algorithm: str = "alg1", k: int | None = None,
            problem: str = DELECTION, step_bound: int | None = None):
    """Lock-step ring-adversary run showing the contract cannot be met.

    ``k`` defaults to the largest participant count with gcd(m, k) > d.
    Returns ``(summary, trace)``; ``None`` when no such k exists.
    """
    p = Params(n, m, d).validate()
    if k is None:
        k = witness_size(n, m, d)
        if k is None:
            return None
    cfg, perms, _ = ring_adversary(m, k)
    perms = perms + [Permutation.identity(m)] * (n - k)
    bound = step_bound or default_step_bound(p)
    machine = make_machine(algorithm, p)
    config = RunConfig(algorithm, n, m, d, schedule={"policy": "ring", "k": k},
                       step_bound=bound).to_json()
    report, trace = check_symmetry([machine] * n, perms, bound, classes=cfg.q_sets,
                                   participants=range(k), config=config)
    trace.ring = cfg.to_json()
    outcome = classify(trace, problem, p)
    summary = {
        "n": n, "m": m, "d": d, "k": k, "algorithm": algorithm, "problem": problem,
        "ring": cfg.to_json(),
        "symmetry": report.to_json(),
        "outcome": outcome.to_json(),
        "violation": not outcome.ok,
    }
    return summary, trace


def rw_symmetry_row(ns, m: int = 3, step_bound: int = 1000) -> dict:
    checked = divergent = 0
    for n in ns:
        p = Params(n, m, 1)
        for machine in rw_library(p):
            report, _ = check_symmetry([machine] * n, [Permutation.identity(m)] * n, step_bound)
            checked += 1
            if not (report.symmetric and report.verdicts_uniform and report.rw_only):
                divergent += 1
    return {"machines_checked": checked, "divergent": divergent}


def sweep_cell(n, m, d, seeds, perm_policies, participations, rows=ROWS, witnesses=True):
    cell = {"n": n, "m": m, "d": d, "conditions": feasibility(n, m, d), "rows": {}}
    for row in rows:
        _, problem, _ = _ROW_SETUP[row]
        entry = {"feasible": row_feasible(row, n, m, d), "runs": 0, "passed": 0,
                 "invariant_violations": 0, "failures": [], "witness": None}
        if entry["feasible"]:
            for config in row_configs(row, n, m, d, seeds, perm_policies, participations):
                trace = execute(config)
                outcome = classify(trace, problem, config.params)
                bad = check_trace_invariants(trace, config.algorithm, config.params)
                entry["runs"] += 1
                entry["invariant_violations"] += len(bad)
                if outcome.ok and not bad:
                    entry["passed"] += 1
                elif len(entry["failures"]) < 5:
                    entry["failures"].append({"config": config.to_json(), "outcome": outcome.to_json(),
                                              "invariants": bad})
        elif witnesses:
            k = witness_size(n, m, d) if row == ROW_NOT_REQUIRED else n
            w = witness(n, m, d, k=k, problem=problem)
            if w is not None:
                summary, _ = w
                entry["witness"] = {
                    "k": summary["k"],
                    "delta": summary["ring"]["delta"],
                    "symmetric": summary["symmetry"]["symmetric"],
                    "leaders": summary["outcome"]["leaders"],
                    "termination": summary["symmetry"]["termination"]["status"],
                    "violation": summary["violation"],
                }
        cell["rows"][row] = entry
    return cell


def _cell_job(args):
    return sweep_cell(*args)


def sweep(ns, ms, ds, seeds, perm_policies=("identity", "random"),
          participations=("all", "half", "singleton"), rows=ROWS, witnesses=True,
          max_runs: int = 500_000, jobs: int = 1) -> dict:
    """Run every cell of the grid and fold the results into one row per feasibility condition.

    ``ds`` values are clipped per cell to ``1 <= d <= n - 1``.
    """
    seeds = list(seeds)
    cells = [(n, m, d) for n in ns for m in ms for d in ds if 1 <= d <= n - 1]
    projected = 0
    for n, m, d in cells:
        for row in rows:
            if row_feasible(row, n, m, d):
                per = len(participations) if _ROW_SETUP[row][2] else 1
                projected += len(seeds) * len(perm_policies) * per
    if projected > max_runs:
        raise BudgetExceeded(f"{projected} runs projected, cap is {max_runs}")
    args = [(n, m, d, seeds, tuple(perm_policies), tuple(participations), tuple(rows), witnesses)
            for n, m, d in cells]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_job, args))
    else:
        results = [_cell_job(a) for a in args]
    results.sort(key=lambda c: (c["n"], c["m"], c["d"]))
    table = []
    for row in rows:
        feasible = [c["rows"][row] for c in results if c["rows"][row]["feasible"]]
        infeasible = [c["rows"][row] for c in results if not c["rows"][row]["feasible"]]
        witnessed = [e for e in infeasible if e["witness"] is not None]
        table.append({
            "row": row,
            "feasible_cells": len(feasible),
            "feasible_cells_passing": sum(e["passed"] == e["runs"] for e in feasible),
            "runs": sum(e["runs"] for e in feasible),
            "runs_passed": sum(e["passed"] for e in feasible),
            "infeasible_cells": len(infeasible),
            "witnesses": len(witnessed),
            "witnesses_violating": sum(e["witness"]["violation"] for e in witnessed),
            "witnesses_symmetric": sum(e["witness"]["symmetric"] for e in witnessed),
        })
    ns_rw = sorted({n for n, _, _ in cells})
    rw = rw_symmetry_row(ns_rw) if ns_rw else {"machines_checked": 0, "divergent": 0}
    table.append({"row": ROW_RW, **rw})
    return {
        "version": REPORT_VERSION,
        "ranges": {"n": list(ns), "m": list(ms), "d": list(ds)},
        "seeds": seeds,
        "permutations": list(perm_policies),
        "participations": list(participations),
        "cells": results,
        "table": table,
    }


def report_ok(report: dict) -> bool:
    for row in report["table"]:
        if row["row"] == ROW_RW:
            if row["divergent"]:
                return False
            continue
        if row["feasible_cells_passing"] != row["feasible_cells"]:
            return False
        if not row["witnesses"] == row["witnesses_violating"] == row["witnesses_symmetric"]:
            return False
    return True
