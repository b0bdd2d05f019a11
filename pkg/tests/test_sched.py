from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from anonelect import StateBoundExceeded
from anonelect.harness import RunConfig, check_symmetry, execute
from anonelect.memory import make_permutations
from anonelect.numth import Params, gcd, bezout_pair
from anonelect.procs import make_machine
from anonelect.rwlib import rw_library
from anonelect.sched import LockStep, Scripted, SeededRandom, explore, ring_adversary


def test_lockstep_round_robin():
    ls = LockStep([0, 1, 2])
    assert [ls.next({0, 1, 2}) for _ in range(6)] == [0, 1, 2, 0, 1, 2]


def test_lockstep_skips_halted():
    ls = LockStep([0, 1, 2])
    assert [ls.next({0, 2}) for _ in range(4)] == [0, 2, 0, 2]


def test_seeded_random_is_roughly_fair():
    sr = SeededRandom(7)
    counts = Counter(sr.next({0, 1}) for _ in range(10_000))
    for pid in (0, 1):
        assert 4500 <= counts[pid] <= 5500


def test_seeded_random_reproducible():
    a, b = SeededRandom(3), SeededRandom(3)
    assert [a.next({0, 1, 2}) for _ in range(50)] == [b.next({0, 1, 2}) for _ in range(50)]


def test_scripted_replays_sequence():
    sc = Scripted([1, 0, 1])
    assert [sc.next({0, 1}) for _ in range(3)] == [1, 0, 1]
    with pytest.raises(IndexError):
        sc.next({0, 1})


def test_ring_k6_delta3_partitions():
    cfg, _, sched = ring_adversary(9, 6)
    assert cfg.delta == 3
    assert cfg.p_sets == [[0, 3], [1, 4], [2, 5]]
    assert cfg.q_sets == [[0, 1, 2], [3, 4, 5]]
    assert sched.order == list(range(6))
    # m = delta**2, so consecutive P-sets start exactly delta apart
    assert [cfg.initial_offsets[i] for i in range(3)] == [0, 3, 6]


def test_ring_m3_k6_same_partitions():
    cfg, _, _ = ring_adversary(3, 6)
    assert cfg.p_sets == [[0, 3], [1, 4], [2, 5]]
    assert cfg.q_sets == [[0, 1, 2], [3, 4, 5]]


def test_ring_m4_k2():
    cfg, perms, _ = ring_adversary(4, 2)
    assert cfg.delta == 2 and cfg.p_sets == [[0], [1]] and cfg.q_sets == [[0, 1]]
    assert (perms[1](1) - perms[0](1)) % 4 == 2


def test_ring_delta_one_is_inert():
    cfg, perms, _ = ring_adversary(3, 2)
    assert cfg.delta == 1
    assert cfg.p_sets == [[0, 1]] and cfg.q_sets == [[0], [1]]
    assert perms[0] == perms[1]


@given(st.integers(1, 12), st.integers(1, 8))
def test_ring_well_formed(m, k):
    cfg, perms, _ = ring_adversary(m, k)
    delta = gcd(m, k)
    assert all(len(p) == k // delta for p in cfg.p_sets)
    assert all(len(q) == delta for q in cfg.q_sets)
    assert sorted(sum(cfg.p_sets, [])) == list(range(k)) == sorted(sum(cfg.q_sets, []))
    for p in perms:
        assert sorted(p.map) == list(range(1, m + 1))
        # logical name x sits at ring distance x - 1 from the initial register
        assert all((p(x) - p(1)) % m == x - 1 for x in range(1, m + 1))
    starts = [perms[cfg.p_sets[j][0]](1) - 1 for j in range(delta)]
    for j in range(delta):
        assert (starts[(j + 1) % delta] - starts[j]) % m == (m // delta) % m
        assert all(perms[i](1) - 1 == starts[j] for i in cfg.p_sets[j])


def _position_oblivious_machines(n, m):
    out = [make_machine("alg1", Params(n, m, 1))]
    for d in range(1, n + 1):
        if d % gcd(m, n) == 0:
            out.append(make_machine("alg2", Params(n, m, d)))
            break
    return out + rw_library(Params(n, m, 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(2, 6))
def test_q_class_symmetry_under_ring_lockstep(m, k):
    cfg, perms, _ = ring_adversary(m, k)
    for machine in _position_oblivious_machines(k, m):
        report, trace = check_symmetry([machine] * k, perms, 2000, classes=cfg.q_sets)
        assert report.symmetric, (machine.name, report.divergence)
        assert report.verdicts_uniform
        if trace.termination["status"] == "all_halted":
            assert trace.leaders % cfg.delta == 0


def test_explore_alg3():
    mc = make_machine("alg3", Params(2, 1, 1))
    result = explore([mc] * 2, make_permutations(2, 1, "identity"), 1)
    assert result.outcomes == {1} and not result.cycles


@pytest.mark.parametrize("policy", ["identity", "rotation"])
def test_explore_alg2_two_by_two(policy):
    p = Params(2, 2, 2)
    assert bezout_pair(p) == (2, 1)
    mc = make_machine("alg2", p)
    result = explore([mc] * 2, make_permutations(2, 2, policy), 2)
    assert result.outcomes == {2}


@pytest.mark.parametrize("policy", ["identity", "rotation"])
def test_explore_alg1_feasible(policy):
    mc = make_machine("alg1", Params(2, 3, 1))
    result = explore([mc] * 2, make_permutations(2, 3, policy), 3)
    assert result.outcomes and result.outcomes <= {1}
    assert result.cycles  # spin loops revisit states on unfair paths


def test_explore_alg1_infeasible_finds_zero_leaders():
    # 2 is not in M(3, 1): some interleaving elects nobody
    mc = make_machine("alg1", Params(3, 2, 1))
    result = explore([mc] * 3, make_permutations(3, 2, "identity"), 2)
    assert 0 in result.outcomes


def test_explore_state_bound():
    mc = make_machine("alg2", Params(3, 3, 3))
    with pytest.raises(StateBoundExceeded) as info:
        explore([mc] * 3, make_permutations(3, 3, "identity"), 3, state_bound=50)
    assert info.value.partial.states > 50


def test_explore_respects_participation():
    mc = make_machine("alg1", Params(3, 5, 1))
    result = explore([mc] * 3, make_permutations(3, 5, "identity"), 5, participants=[1])
    assert result.outcomes == {1}


@pytest.mark.parametrize("alg,n,m,d", [("alg3", 3, 1, 2), ("alg2", 2, 2, 2), ("alg1", 2, 3, 1),
                                       ("alg2", 3, 2, 1), ("alg1", 3, 2, 1)])
def test_simulation_outcomes_within_explored_set(alg, n, m, d):
    p = Params(n, m, d)
    perms_pol = {"policy": "rotation", "stride": 1}
    perms = make_permutations(n, m, "rotation")
    explored = explore([make_machine(alg, p)] * n, perms, m).outcomes
    for seed in range(200):
        trace = execute(RunConfig(alg, n, m, d, schedule={"policy": "random", "seed": seed},
                                  permutations=perms_pol))
        assert trace.leaders in explored
