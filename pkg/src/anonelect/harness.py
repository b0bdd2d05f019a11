"""Execution driver, trace model, outcome classification and invariant checks."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

from anonelect.memory import AnonymousMemory, CompareAndSwap, Permutation, Write, make_permutations, op_from_json, op_to_json
from anonelect.numth import Params, bezout_pair, gcd
from anonelect.procs import Alg1State, Alg2State, Alg3State, Verdict, encode_state, make_machine
from anonelect.sched import LockStep, Scripted, SeededRandom, ring_adversary

TRACE_VERSION = 1

ALL_HALTED = "all_halted"
STEP_BOUND = "step_bound_exhausted"
CYCLE = "cycle_detected"

DELECTION = "d_election"
EXACT = "exact_d_election"


def default_step_bound(p: Params) -> int:
    n, m, d = p
    return 200 * n * m * max(n - d + 2, 1)


def state_digest(state, verdict=None) -> str:
    payload = {"state": encode_state(state), "verdict": None if verdict is None else verdict.value}
    raw = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(raw.encode(), digest_size=8).hexdigest()


_STATE_TYPES = {"alg1": Alg1State, "alg2": Alg2State, "gcd-composition": Alg2State, "alg3": Alg3State}


def state_from_json(algorithm: str, data: dict):
    cls = _STATE_TYPES[algorithm]
    data = dict(data)
    if "myview" in data and isinstance(data["myview"], list):
        data["myview"] = tuple(data["myview"])
    return cls(**data)


# --------------------------------------------------------------------------
# Run configuration
# --------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Everything needed to rebuild an execution from scratch.

    ``schedule``: ``{"policy": "random", "seed": s}``, ``{"policy":
    "lockstep"}`` or ``{"policy": "ring", "k": k}``.  ``permutations``:
    ``{"policy": "identity" | "rotation" | "random", "seed", "stride"}``
    (ignored under the ring schedule, which places registers itself).
    ``participation``: ``"all"``, a list of pids, or ``{"random": frac,
    "seed": s}``.
    """

    algorithm: str
    n: int
    m: int
    d: int
    schedule: dict = field(default_factory=lambda: {"policy": "random", "seed": 0})
    permutations: dict = field(default_factory=lambda: {"policy": "identity"})
    participation: Any = "all"
    step_bound: int | None = None

    @property
    def params(self) -> Params:
        return Params(self.n, self.m, self.d)

    def validate(self) -> "RunConfig":
        self.params.validate()
        if self.algorithm == "alg3" and self.m != 1:
            raise ValueError("alg3 requires m = 1")
        if self.algorithm in ("alg2", "gcd-composition") and self.participation != "all":
            raise ValueError(f"{self.algorithm} requires participation = all")
        if self.schedule.get("policy") == "ring":
            k = self.schedule.get("k")
            if not isinstance(k, int) or not 1 <= k <= self.n:
                raise ValueError("ring schedule needs 1 <= k <= n")
        if self.step_bound is not None and self.step_bound < 1:
            raise ValueError("step_bound must be positive")
        return self

    def resolved_step_bound(self) -> int:
        return self.step_bound if self.step_bound is not None else default_step_bound(self.params)

    def participants(self) -> list[int]:
        if self.schedule.get("policy") == "ring":
            return list(range(self.schedule["k"]))
        part = self.participation
        if part == "all":
            return list(range(self.n))
        if isinstance(part, dict):
            count = max(1, round(part["random"] * self.n))
            return sorted(random.Random(part["seed"]).sample(range(self.n), count))
        pids = sorted(set(part))
        if not pids or not all(0 <= p < self.n for p in pids):
            raise ValueError(f"participation {part!r} is not a non-empty subset of 0..{self.n - 1}")
        return pids

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n": self.n,
            "m": self.m,
            "d": self.d,
            "schedule": self.schedule,
            "permutations": self.permutations,
            "participation": self.participation,
            "step_bound": self.resolved_step_bound(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        return cls(
            algorithm=data["algorithm"],
            n=data["n"],
            m=data["m"],
            d=data["d"],
            schedule=dict(data["schedule"]),
            permutations=dict(data["permutations"]),
            participation=data["participation"],
            step_bound=data.get("step_bound"),
        )


def build(config: RunConfig):
    """Instantiate machines, memory and schedule for ``config``."""
    config.validate()
    p = config.params
    machine = make_machine(config.algorithm, p)
    machines = [machine] * p.n
    participants = config.participants()
    sched = config.schedule
    policy = sched.get("policy")
    ring = None
    if policy == "ring":
        ring, ring_perms, schedule = ring_adversary(p.m, sched["k"])
        perms = ring_perms + [Permutation.identity(p.m)] * (p.n - sched["k"])
    else:
        pp = config.permutations
        perms = make_permutations(p.n, p.m, pp.get("policy", "identity"),
                                  stride=pp.get("stride", 1), seed=pp.get("seed"))
        if policy == "random":
            schedule = SeededRandom(sched["seed"])
        elif policy == "lockstep":
            schedule = LockStep(sched.get("order", participants))
        elif policy == "scripted":
            schedule = Scripted(sched["pids"])
        else:
            raise ValueError(f"unknown schedule policy {policy!r}")
    return machines, AnonymousMemory(p.m, perms), schedule, participants, ring


# --------------------------------------------------------------------------
# Traces
# --------------------------------------------------------------------------

class TraceStep(NamedTuple):
    index: int
    pid: int
    op: Any
    phys: int
    result: Any
    regs: tuple
    state: Any  # acting process's post-step local state
    verdict: Verdict | None
    stored_digest: str | None = None  # kept from a loaded trace without states

    @property
    def digest(self) -> str:
        if self.state is None and self.stored_digest is not None:
            return self.stored_digest
        return state_digest(self.state, self.verdict)

    def to_json(self, full_states: bool = False) -> dict:
        out = {
            "index": self.index,
            "pid": self.pid,
            "op": op_to_json(self.op),
            "phys": self.phys,
            "result": self.result,
            "regs": list(self.regs),
            "digest": self.digest,
            "verdict": None if self.verdict is None else self.verdict.value,
        }
        if full_states and self.state is not None:
            out["state"] = encode_state(self.state)
        return out


@dataclass
class ExecutionTrace:
    config: dict
    participants: list
    perms: list
    steps: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    termination: dict = field(default_factory=dict)
    ring: dict | None = None

    @property
    def leaders(self) -> int:
        return sum(v is Verdict.LEADER for v in self.verdicts.values())

    @property
    def final_registers(self) -> list:
        if self.steps:
            return list(self.steps[-1].regs)
        return [0] * self.config["m"]

    @property
    def max_register(self) -> int:
        return max((max(s.regs) for s in self.steps), default=0)

    def to_json(self, full_states: bool = False) -> dict:
        return {
            "version": TRACE_VERSION,
            "config": self.config,
            "participants": list(self.participants),
            "permutations": [list(p.map) for p in self.perms],
            "ring": self.ring,
            "full_states": full_states,
            "steps": [s.to_json(full_states) for s in self.steps],
            "verdicts": {str(pid): v.value for pid, v in sorted(self.verdicts.items())},
            "termination": self.termination,
            "leaders": self.leaders,
            "max_register": self.max_register,
        }

    def dumps(self, full_states: bool = False) -> str:
        return json.dumps(self.to_json(full_states), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, data: dict) -> "ExecutionTrace":
        algorithm = data["config"]["algorithm"]
        steps = []
        for s in data["steps"]:
            state = state_from_json(algorithm, s["state"]) if "state" in s else None
            verdict = None if s["verdict"] is None else Verdict(s["verdict"])
            steps.append(TraceStep(s["index"], s["pid"], op_from_json(s["op"]), s["phys"],
                                   s["result"], tuple(s["regs"]), state, verdict, s.get("digest")))
        return cls(
            config=data["config"],
            participants=data["participants"],
            perms=[Permutation(p) for p in data["permutations"]],
            steps=steps,
            verdicts={int(k): Verdict(v) for k, v in data["verdicts"].items()},
            termination=data["termination"],
            ring=data.get("ring"),
        )


def run(machines, mem: AnonymousMemory, schedule, step_bound: int, participants=None,
        observer: Callable | None = None, config: dict | None = None) -> ExecutionTrace:
    """Activate processes per ``schedule`` until all halt or ``step_bound`` steps.

    Under lock-step a repeated global state at a round boundary means the
    run loops forever; it stops with ``cycle_detected``.
    """
    if step_bound < 1:
        raise ValueError("step_bound must be positive")
    n = len(machines)
    pids = list(range(n)) if participants is None else sorted(participants)
    trace = ExecutionTrace(config=config or {}, participants=pids, perms=list(mem.perms))
    states, actions = {}, {}
    live = set()
    for pid in pids:
        st, act = machines[pid].start()
        states[pid] = st
        actions[pid] = act
        if isinstance(act, Verdict):
            trace.verdicts[pid] = act
        else:
            live.add(pid)
    steps = trace.steps
    lockstep = isinstance(schedule, LockStep)
    seen = set()
    termination = {"status": ALL_HALTED}
    while live:
        if len(steps) >= step_bound:
            termination = {"status": STEP_BOUND, "bound": step_bound}
            break
        if lockstep and schedule.at_round_start:
            key = (tuple((states[p], actions[p]) for p in pids), tuple(mem.registers))
            if key in seen:
                termination = {"status": CYCLE, "step": len(steps)}
                break
            seen.add(key)
        pid = schedule.next(live)
        op = actions[pid]
        phys = mem.resolve(pid, op.addr)
        res = mem.apply(pid, op)
        st, act = machines[pid].resume(states[pid], res)
        states[pid] = st
        actions[pid] = act
        verdict = None
        if isinstance(act, Verdict):
            verdict = act
            trace.verdicts[pid] = act
            live.discard(pid)
        step = TraceStep(len(steps), pid, op, phys, res, tuple(mem.registers), st, verdict)
        steps.append(step)
        if observer is not None:
            observer(step)
    trace.termination = termination
    return trace


def execute(config: RunConfig, observer: Callable | None = None) -> ExecutionTrace:
    machines, mem, schedule, participants, ring = build(config)
    trace = run(machines, mem, schedule, config.resolved_step_bound(), participants,
                observer=observer, config=config.to_json())
    trace.ring = ring.to_json() if ring is not None else None
    return trace


def replay(trace: ExecutionTrace | dict) -> ExecutionTrace:
    config = trace.config if isinstance(trace, ExecutionTrace) else trace["config"]
    return execute(RunConfig.from_json(config))


# --------------------------------------------------------------------------
# Classification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OutcomeClass:
    leaders: int
    contract: str  # "d_election_ok" | "exact_d_ok" | "violation"
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.contract != "violation"

    def to_json(self) -> dict:
        return {"leaders": self.leaders, "contract": self.contract, "reason": self.reason}


def classify(trace: ExecutionTrace, problem: str, p: Params) -> OutcomeClass:
    leaders = trace.leaders
    if trace.termination.get("status") != ALL_HALTED:
        return OutcomeClass(leaders, "violation", "non-termination")
    if problem == DELECTION:
        if leaders < 1:
            return OutcomeClass(leaders, "violation", "no leader")
        if leaders > p.d:
            return OutcomeClass(leaders, "violation", "leader bound violated")
        return OutcomeClass(leaders, "d_election_ok")
    if problem == EXACT:
        if leaders != p.d:
            return OutcomeClass(leaders, "violation", f"expected exactly {p.d} leaders")
        return OutcomeClass(leaders, "exact_d_ok")
    raise ValueError(f"unknown problem {problem!r}")


# --------------------------------------------------------------------------
# Lock-step symmetry
# --------------------------------------------------------------------------

@dataclass
class SymmetryReport:
    symmetric: bool
    rounds: int
    steps: int
    classes: list
    divergence: dict | None = None
    rw_only: bool = True
    verdicts_uniform: bool = True
    termination: dict = field(default_factory=dict)
    leaders: int = 0

    def to_json(self) -> dict:
        return {
            "symmetric": self.symmetric,
            "rounds": self.rounds,
            "steps": self.steps,
            "classes": self.classes,
            "divergence": self.divergence,
            "rw_only": self.rw_only,
            "verdicts_uniform": self.verdicts_uniform,
            "termination": self.termination,
            "leaders": self.leaders,
        }


def check_symmetry(machines, perms, step_bound: int, classes=None, participants=None,
                   config: dict | None = None) -> tuple[SymmetryReport, ExecutionTrace]:
    """Lock-step the processes and compare states inside each symmetry class.

    Processes of one class that have taken the same number of steps must
    hold identical local states (digest equality, verdict included).  The
    first step breaking this is reported.  With no ``classes`` every
    participant forms a single class, the right notion when all name maps
    coincide.
    """
    n = len(machines)
    pids = list(range(n)) if participants is None else sorted(participants)
    if classes is None:
        classes = [pids]
    class_of = {p: ci for ci, members in enumerate(classes) for p in members}
    counts = {p: 0 for p in pids}
    seen: dict = {}
    info = {"divergence": None, "rw_only": True}

    def observe(step):
        if isinstance(step.op, CompareAndSwap):
            info["rw_only"] = False
        counts[step.pid] += 1
        key = (class_of[step.pid], counts[step.pid])
        digest = step.digest
        ref = seen.setdefault(key, (digest, step.pid))
        if ref[0] != digest and info["divergence"] is None:
            info["divergence"] = {
                "step": step.index,
                "round": counts[step.pid],
                "pid": step.pid,
                "peer": ref[1],
                "op": step.op.kind,
            }

    mem = AnonymousMemory(len(perms[0]), perms)
    trace = run(machines, mem, LockStep(pids), step_bound, pids, observer=observe, config=config)
    verdicts_uniform = True
    for members in classes:
        outcome = {trace.verdicts.get(p) for p in members}
        if len(outcome) > 1:
            verdicts_uniform = False
    report = SymmetryReport(
        symmetric=info["divergence"] is None,
        rounds=max(counts.values(), default=0),
        steps=len(trace.steps),
        classes=[list(c) for c in classes],
        divergence=info["divergence"],
        rw_only=info["rw_only"],
        verdicts_uniform=verdicts_uniform,
        termination=trace.termination,
        leaders=trace.leaders,
    )
    return report, trace


# --------------------------------------------------------------------------
# Trace invariants
# --------------------------------------------------------------------------

def _states_available(trace) -> bool:
    return all(s.state is not None for s in trace.steps)


def check_trace_invariants(trace: ExecutionTrace, algorithm: str, p: Params) -> list[str]:
    """Return human-readable violations; empty means every check passed."""
    if trace.steps and not _states_available(trace):
        # states were not serialized; regenerate them from the config
        trace = replay(trace)
    out = []
    finished = trace.termination.get("status") == ALL_HALTED
    for s in trace.steps:
        if min(s.regs) < 0:
            out.append(f"step {s.index}: negative register value")
            break
    perms = trace.perms
    for s in trace.steps:
        if perms and perms[s.pid](s.op.addr) != s.phys:
            out.append(f"step {s.index}: physical address does not match the name map")
            break
    if [s.index for s in trace.steps] != list(range(len(trace.steps))):
        out.append("step indices are not gap-free")
    if algorithm == "alg1":
        out += _alg1_invariants(trace, p, finished)
    elif algorithm in ("alg2", "gcd-composition"):
        inner = p if algorithm == "alg2" else Params(p.n, p.m, gcd(p.m, p.n))
        out += _alg2_invariants(trace, inner, finished)
    elif algorithm == "alg3":
        out += _alg3_invariants(trace, p, finished)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return out


def _alg1_invariants(trace, p, finished):
    out = []
    last = p.n - p.d + 1
    reached: dict[int, set] = {}
    owner = [None] * p.m
    for s in trace.steps:
        st = s.state
        if st is not None:
            if not 0 <= st.round <= last:
                out.append(f"step {s.index}: pid {s.pid} in round {st.round} outside 0..{last}")
            reached.setdefault(st.round, set()).add(s.pid)
        op = s.op
        if isinstance(op, Write):
            owner[s.phys - 1] = s.pid if op.val > 0 else None
        elif isinstance(op, CompareAndSwap) and s.result:
            owner[s.phys - 1] = s.pid if op.new > 0 else None
        # the counter is stale only while owned registers are being freed
        freeing = isinstance(op, Write) and op.val == 0
        if st is not None and not freeing:
            owned = sum(o == s.pid for o in owner)
            if owned != st.counter:
                out.append(f"step {s.index}: pid {s.pid} counter {st.counter} but owns {owned}")
                break
        if max(s.regs) > last:
            out.append(f"step {s.index}: register value above {last}")
            break
    for r, who in sorted(reached.items()):
        if r >= 1 and len(who) > p.n - r + 1:
            out.append(f"round occupancy: {len(who)} processes reached round {r} (max {p.n - r + 1})")
    if trace.leaders > p.d:
        out.append("leader bound violated")
    if finished and trace.participants and trace.leaders < 1:
        out.append("no leader elected")
    return out


def _alg2_invariants(trace, p, finished):
    out = []
    try:
        u, v = bezout_pair(p)
    except ValueError:
        return [f"no Bezout pair for {tuple(p)}"]
    prev = [0] * p.m
    won = {pid: 0 for pid in trace.participants}
    for s in trace.steps:
        regs = s.regs
        if any(a < b for a, b in zip(regs, prev)):
            out.append(f"step {s.index}: register decreased")
            break
        if max(regs) > u:
            out.append(f"step {s.index}: register exceeds u={u}")
            break
        prev = regs
        if s.state is not None:
            won[s.pid] = s.state.won
        if s.verdict is Verdict.LEADER:
            lagging = [q for q, w in won.items() if w != v]
            if lagging:
                out.append(f"step {s.index}: leader elected before pids {lagging} captured v={v}")
    if trace.leaders > p.d:
        out.append("leader bound violated")
    if finished:
        if sum(prev) != u * p.m:
            out.append(f"capture total {sum(prev)} != u*m = {u * p.m}")
        if trace.leaders != p.d:
            out.append(f"exact-d violated: {trace.leaders} leaders, expected {p.d}")
    return out


def _alg3_invariants(trace, p, finished):
    out = []
    for s in trace.steps:
        if s.regs[0] > p.d:
            out.append(f"step {s.index}: register exceeds d={p.d}")
            break
    if trace.leaders > p.d:
        out.append("leader bound violated")
    if finished:
        expected = min(len(trace.participants), p.d)
        if trace.leaders != expected:
            out.append(f"{trace.leaders} leaders, expected {expected}")
    return out
