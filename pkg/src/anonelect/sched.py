"""Scheduling policies, the ring adversary, and exhaustive interleaving search."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from anonelect.errors import StateBoundExceeded
from anonelect.memory import Permutation, execute
from anonelect.numth import gcd
from anonelect.procs import Verdict


class SeededRandom:
    """Uniform choice among live processes; fair with probability 1."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    def next(self, live):
        return self._rng.choice(sorted(live))

    def descriptor(self) -> dict:
        return {"policy": "random", "seed": self.seed}


class LockStep:
    """Round-robin over a fixed order, skipping halted processes."""

    def __init__(self, order):
        order = list(order)
        if not order:
            raise ValueError("lock-step order must not be empty")
        self.order = order
        self._pos = 0

    @property
    def at_round_start(self) -> bool:
        return self._pos == 0

    def next(self, live):
        n = len(self.order)
        for _ in range(n):
            pid = self.order[self._pos]
            self._pos = (self._pos + 1) % n
            if pid in live:
                return pid
        raise ValueError("no live process in lock-step order")

    def descriptor(self) -> dict:
        return {"policy": "lockstep", "order": list(self.order)}


class Scripted:
    """Replays an explicit pid sequence (forged traces, explorer paths)."""

    def __init__(self, pids):
        self.pids = list(pids)
        self._i = 0

    def next(self, live):
        while self._i < len(self.pids):
            pid = self.pids[self._i]
            self._i += 1
            if pid in live:
                return pid
        raise IndexError("scripted schedule exhausted")

    def descriptor(self) -> dict:
        return {"policy": "scripted", "pids": list(self.pids)}


@dataclass
class RingAdversaryConfig:
    """Placement of k lock-stepped processes around a ring of m registers.

    ``p_sets[i]`` share an initial register; ``q_sets[j]`` are the
    processes that stay state-identical under lock-step.
    """

    m: int
    k: int
    delta: int
    spacing: int
    p_sets: list[list[int]] = field(default_factory=list)
    q_sets: list[list[int]] = field(default_factory=list)
    initial_offsets: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "k": self.k,
            "delta": self.delta,
            "spacing": self.spacing,
            "p_sets": self.p_sets,
            "q_sets": self.q_sets,
            "initial_offsets": self.initial_offsets,
        }


def ring_adversary(m: int, k: int) -> tuple[RingAdversaryConfig, list[Permutation], LockStep]:
    """Build the symmetric lock-step run for k participants on m registers.

    With ``delta = gcd(m, k)``, process i joins P-set ``i mod delta`` and
    Q-set ``i // delta``.  P-set j starts on ring position ``j * m/delta``
    and every process walks the ring clockwise, logical name x being the
    register at distance x - 1 from its start.  The members of a Q-set then
    sit on one orbit of the rotation by ``m/delta`` and step consecutively,
    so each lock-step round leaves memory invariant under that rotation.
    """
    if m < 1 or k < 1:
        raise ValueError("m and k must be positive")
    delta = gcd(m, k)
    spacing = m // delta
    p_sets = [[i for i in range(k) if i % delta == j] for j in range(delta)]
    q_sets = [[i for i in range(k) if i // delta == j] for j in range(k // delta)]
    offsets = [(i % delta) * spacing for i in range(k)]
    perms = [Permutation.rotation(m, off) for off in offsets]
    cfg = RingAdversaryConfig(m=m, k=k, delta=delta, spacing=spacing, p_sets=p_sets,
                              q_sets=q_sets, initial_offsets=offsets)
    return cfg, perms, LockStep(range(k))


# --------------------------------------------------------------------------
# Exhaustive exploration
# --------------------------------------------------------------------------

@dataclass
class ExploreResult:
    outcomes: set = field(default_factory=set)  # leader counts at terminal states
    cycles: bool = False
    states: int = 0
    terminals: int = 0

    def to_json(self) -> dict:
        return {
            "outcomes": sorted(self.outcomes),
            "cycles": self.cycles,
            "states": self.states,
            "terminals": self.terminals,
        }


def explore(machines, perms, m: int, state_bound: int = 10**6, participants=None) -> ExploreResult:
    """Depth-first search over every interleaving of the participants.

    Global states are (per-process (local state, pending action), physical
    registers) and are hashed so each is expanded once.  Reaching a state
    already on the DFS stack means some unfair schedule loops forever; that
    sets ``cycles`` rather than failing.
    """
    n = len(machines)
    pids = list(range(n)) if participants is None else sorted(participants)
    procs = []
    for pid in range(n):
        if pid in pids:
            procs.append(machines[pid].start())
        else:
            procs.append(None)
    root = (tuple(procs), (0,) * m)
    maps = [p.map for p in perms]
    result = ExploreResult()

    def successors(gstate):
        procs, regs = gstate
        for pid in pids:
            entry = procs[pid]
            st, action = entry
            if isinstance(action, Verdict):
                continue
            phys = maps[pid][action.addr - 1] - 1
            value, res = execute(regs[phys], action)
            nregs = regs if value == regs[phys] else regs[:phys] + (value,) + regs[phys + 1:]
            nprocs = procs[:pid] + (machines[pid].resume(st, res),) + procs[pid + 1:]
            yield (nprocs, nregs)

    on_stack = {root}
    done = set()
    stack = [(root, successors(root))]
    result.states = 1
    while stack:
        gstate, it = stack[-1]
        child = next(it, None)
        if child is None:
            stack.pop()
            on_stack.discard(gstate)
            done.add(gstate)
            procs = gstate[0]
            if all(isinstance(procs[p][1], Verdict) for p in pids):
                result.terminals += 1
                result.outcomes.add(sum(procs[p][1] is Verdict.LEADER for p in pids))
            continue
        if child in on_stack:
            result.cycles = True
            continue
        if child in done:
            continue
        result.states += 1
        if result.states > state_bound:
            raise StateBoundExceeded(f"more than {state_bound} states", partial=result)
        on_stack.add(child)
        stack.append((child, successors(child)))
    return result
