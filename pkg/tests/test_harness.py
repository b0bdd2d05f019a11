import json

import pytest
from hypothesis import given, settings, strategies as st

from anonelect import BudgetExceeded
from anonelect.harness import (
    ALL_HALTED,
    CYCLE,
    DELECTION,
    EXACT,
    STEP_BOUND,
    ExecutionTrace,
    OutcomeClass,
    RunConfig,
    TraceStep,
    check_symmetry,
    check_trace_invariants,
    classify,
    default_step_bound,
    execute,
    replay,
    state_digest,
)
from anonelect.memory import CompareAndSwap, Permutation, Read, make_permutations
from anonelect.numth import Params
from anonelect.procs import Alg1State, Verdict, make_machine
from anonelect.rwlib import RW_MACHINES, rw_library
from anonelect.sched import ring_adversary
from anonelect.sweep import ROW_EXACT, ROW_NOT_REQUIRED, ROW_REQUIRED, report_ok, sweep, sweep_cell, witness
from oracles import brute_leader_count


def cfg(alg, n, m, d, seed=0, **kw):
    return RunConfig(alg, n, m, d, schedule={"policy": "random", "seed": seed}, **kw)


def forged(verdicts, steps=(), participants=None):
    return ExecutionTrace(config={"m": 1}, participants=participants or sorted(verdicts), perms=[],
                          steps=list(steps), verdicts=verdicts, termination={"status": ALL_HALTED})


class TestRun:
    def test_alg3_single(self):
        trace = execute(RunConfig("alg3", 1, 1, 1, step_bound=10))
        assert trace.termination == {"status": ALL_HALTED}
        assert [s.op for s in trace.steps] == [Read(1), CompareAndSwap(1, 0, 1)]
        assert trace.verdicts == {0: Verdict.LEADER}

    def test_alg1_feasible(self):
        trace = execute(cfg("alg1", 3, 5, 1, seed=1, step_bound=10**5))
        assert trace.termination["status"] == ALL_HALTED and trace.leaders == 1

    def test_alg1_ring_witness_never_ok(self):
        config = RunConfig("alg1", 2, 2, 1, schedule={"policy": "ring", "k": 2}, step_bound=10**4)
        trace = execute(config)
        assert classify(trace, DELECTION, config.params).contract == "violation"

    def test_step_bound(self):
        trace = execute(cfg("alg2", 5, 3, 1, step_bound=5))
        assert trace.termination == {"status": STEP_BOUND, "bound": 5}
        assert len(trace.steps) == 5
        assert classify(trace, EXACT, Params(5, 3, 1)).reason == "non-termination"

    def test_lockstep_cycle_detected(self):
        from anonelect.rwlib import SpinOnFlag
        from anonelect.harness import run
        from anonelect.memory import AnonymousMemory
        from anonelect.sched import LockStep

        mc = SpinOnFlag(Params(2, 1, 1))
        trace = run([mc] * 2, AnonymousMemory(1, make_permutations(2, 1)), LockStep([0, 1]), 1000)
        assert trace.termination["status"] == CYCLE

    def test_physical_address_recorded(self):
        trace = execute(cfg("alg1", 3, 4, 1, seed=5, permutations={"policy": "random", "seed": 5}))
        for s in trace.steps:
            assert trace.perms[s.pid](s.op.addr) == s.phys

    def test_default_step_bound(self):
        assert default_step_bound(Params(3, 5, 1)) == 200 * 3 * 5 * 4

    def test_participation_forms(self):
        assert RunConfig("alg1", 6, 5, 1, participation={"random": 0.5, "seed": 1}).participants() == \
            RunConfig("alg1", 6, 5, 1, participation={"random": 0.5, "seed": 1}).participants()
        assert len(RunConfig("alg1", 6, 5, 1, participation={"random": 0.5, "seed": 1}).participants()) == 3
        with pytest.raises(ValueError):
            RunConfig("alg1", 3, 5, 1, participation=[5]).participants()
        with pytest.raises(ValueError):
            RunConfig("alg2", 5, 3, 1, participation=[0]).validate()
        with pytest.raises(ValueError):
            RunConfig("alg3", 5, 3, 1).validate()


class TestClassify:
    def test_examples(self):
        assert classify(forged({0: Verdict.LEADER}), DELECTION, Params(4, 1, 3)).contract == "d_election_ok"
        two = forged({0: Verdict.LEADER, 1: Verdict.LEADER})
        assert classify(two, EXACT, Params(3, 1, 2)) == OutcomeClass(2, "exact_d_ok")
        none = forged({0: Verdict.NOT_LEADER, 1: Verdict.NOT_LEADER})
        assert classify(none, DELECTION, Params(3, 1, 2)) == OutcomeClass(0, "violation", "no leader")
        assert classify(two, DELECTION, Params(3, 1, 1)).reason == "leader bound violated"

    def test_leader_count_matches_brute_count(self):
        trace = execute(cfg("alg3", 5, 1, 3, seed=4))
        assert trace.leaders == brute_leader_count(trace) == 3


class TestSymmetry:
    @pytest.mark.parametrize("cls", RW_MACHINES)
    def test_rw_machines_stay_symmetric(self, cls):
        p = Params(3, 3, 1)
        report, _ = check_symmetry([cls(p)] * 3, make_permutations(3, 3), 1000)
        assert report.symmetric and report.rw_only and report.verdicts_uniform

    def test_alg1_ring_delta2(self):
        cfg_, perms, _ = ring_adversary(2, 2)
        report, _ = check_symmetry([make_machine("alg1", Params(2, 2, 1))] * 2, perms, 1000,
                                   classes=cfg_.q_sets)
        assert report.symmetric and not report.rw_only

    def test_alg3_diverges_at_first_cas(self):
        report, trace = check_symmetry([make_machine("alg3", Params(2, 1, 1))] * 2,
                                       make_permutations(2, 1), 1000)
        assert not report.symmetric
        dv = report.divergence
        first_cas = next(s.index for s in trace.steps if isinstance(s.op, CompareAndSwap))
        assert dv["op"] == "cas" and dv["round"] == 2
        # the second process's CAS (the one that fails) is where states split
        assert dv["step"] == first_cas + 1 == 3


class TestInvariants:
    def test_clean_alg1_trace(self):
        trace = execute(cfg("alg1", 3, 5, 1, seed=2))
        assert check_trace_invariants(trace, "alg1", Params(3, 5, 1)) == []

    def test_forged_two_leaders(self):
        assert check_trace_invariants(forged({0: Verdict.LEADER, 1: Verdict.LEADER}), "alg1",
                                      Params(2, 1, 1)) == ["leader bound violated"]

    def test_alg2_capture_total(self):
        trace = execute(cfg("alg2", 5, 3, 1, seed=3))
        assert check_trace_invariants(trace, "alg2", Params(5, 3, 1)) == []
        assert sum(trace.final_registers) == 6

    def test_forged_ownership_mismatch(self):
        st = Alg1State(pc="read", j=1, round=1, counter=1, competitors=0, myview=(True, False))
        step = TraceStep(0, 0, Read(2), 2, 0, (0, 0), st, None)
        trace = forged({}, steps=[step], participants=[0])
        trace.termination = {"status": STEP_BOUND, "bound": 1}
        trace.perms = [Permutation.identity(2)]
        msgs = check_trace_invariants(trace, "alg1", Params(2, 2, 1))
        assert any("counter 1 but owns 0" in msg for msg in msgs)

    def test_invariants_on_infeasible_alg1_catch_occupancy(self):
        # 5 is not in M(6, 2); find a run that overfills round 3
        found = False
        for seed in range(50):
            trace = execute(cfg("alg1", 6, 5, 2, seed=seed, permutations={"policy": "random", "seed": seed}))
            if any("round occupancy" in v for v in check_trace_invariants(trace, "alg1", Params(6, 5, 2))):
                found = True
                break
        assert found

    def test_states_regenerated_when_missing(self):
        trace = execute(cfg("alg1", 3, 5, 1, seed=7))
        loaded = ExecutionTrace.from_json(json.loads(trace.dumps(full_states=False)))
        assert all(s.state is None for s in loaded.steps)
        assert check_trace_invariants(loaded, "alg1", Params(3, 5, 1)) == []

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from([(5, 3, 1), (6, 4, 2), (4, 4, 4), (3, 2, 1)]))
    def test_alg2_monotone_and_capped(self, seed, params):
        n, m, d = params
        trace = execute(cfg("alg2", n, m, d, seed=seed, permutations={"policy": "random", "seed": seed}))
        assert check_trace_invariants(trace, "alg2", Params(n, m, d)) == []
        assert trace.leaders == d


class TestTraces:
    def test_json_roundtrip_full_states(self):
        trace = execute(cfg("alg2", 4, 2, 2, seed=9))
        text = trace.dumps(full_states=True)
        loaded = ExecutionTrace.from_json(json.loads(text))
        assert loaded.dumps(full_states=True) == text

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from(["alg1", "alg2", "gcd-composition"]))
    def test_replay_is_byte_identical(self, seed, alg):
        trace = execute(cfg(alg, 4, 3, 1, seed=seed, permutations={"policy": "random", "seed": seed}))
        assert replay(trace).dumps(True) == trace.dumps(True)

    def test_digest_depends_on_verdict(self):
        st = Alg1State("read", 0, 1, 0, 0, (False,))
        assert state_digest(st) != state_digest(st, Verdict.LEADER)
        assert len(state_digest(st)) == 16


class TestSweep:
    def test_infeasible_cell_4_6_1(self):
        cell = sweep_cell(4, 6, 1, range(3), ("identity",), ("all",))
        row1 = cell["rows"][ROW_NOT_REQUIRED]
        assert not row1["feasible"] and row1["runs"] == 0
        assert row1["witness"]["violation"] and row1["witness"]["symmetric"]
        assert not cell["rows"][ROW_REQUIRED]["feasible"]
        assert not cell["rows"][ROW_EXACT]["feasible"]

    def test_small_sweep_passes(self):
        report = sweep([2, 3], [1, 2, 3], [1, 2], range(3))
        assert report_ok(report)
        assert [r["row"] for r in report["table"]] == [ROW_NOT_REQUIRED, ROW_EXACT, ROW_REQUIRED, "rw_any"]

    def test_parallel_matches_serial(self):
        a = sweep([2, 3], [2, 3], [1], range(2), jobs=1)
        b = sweep([2, 3], [2, 3], [1], range(2), jobs=2)
        assert a == b

    def test_empty_range(self):
        report = sweep([], [1], [1], range(3))
        assert report["cells"] == [] and report_ok(report)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            sweep(range(2, 7), range(1, 9), range(1, 6), range(50), max_runs=10)

    def test_witness_none_when_feasible(self):
        assert witness(3, 5, 1) is None
