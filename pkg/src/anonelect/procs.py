"""Election algorithms as resumable step machines.

A machine is a pure transformer over immutable local states.  ``start()``
performs the local work preceding the first shared access and returns
``(state, action)``; ``resume(state, result)`` consumes the result of the
pending memory operation, runs local code up to the next shared access and
returns the new ``(state, action)``.  ``action`` is either the next
:data:`~anonelect.memory.MemoryOp` or a terminal :class:`Verdict`.

Every activation therefore performs exactly one atomic register operation.
Identical code and identical initial state for every process is what makes
processes anonymous; a single machine object is shared by all of them.
"""

from __future__ import annotations

import enum
from typing import NamedTuple, Protocol, Union

from anonelect.errors import InfeasibleParams
from anonelect.memory import CompareAndSwap, MemoryOp, OpResult, Read, Write
from anonelect.numth import BezoutPair, Params, bezout_pair, gcd


class Verdict(str, enum.Enum):
    LEADER = "leader"
    NOT_LEADER = "not_leader"


Action = Union[MemoryOp, Verdict]


class StepMachine(Protocol):
    name: str
    params: Params

    def start(self) -> tuple[tuple, Action]: ...

    def resume(self, state: tuple, result: OpResult) -> tuple[tuple, Action]: ...


def encode_state(state: tuple) -> dict:
    """JSON-ready encoding of a machine state (NamedTuple)."""
    return state._asdict()


# --------------------------------------------------------------------------
# Algorithm 1: d-election, participation not required
# --------------------------------------------------------------------------

class Alg1State(NamedTuple):
    pc: str  # "write" | "read" | "cas" | "free"
    j: int  # 0-based register index the pending op targets
    round: int
    counter: int
    competitors: int
    myview: tuple


class Alg1Machine:
    """Round ladder: own at least m/competitors registers or withdraw.

    A register is owned by the last process that wrote a positive value
    into it.  In round r a process refreshes its owned registers with r,
    then walks every register, spinning while it holds a value below r and
    trying ``CAS(R[j], 0, r)`` to claim free ones.  With
    ``competitors = n - r + 1`` it withdraws (freeing what it owns) when
    ``counter < m / competitors``; surviving round ``n - d + 1`` elects it.
    """

    name = "alg1"

    def __init__(self, p: Params):
        self.params = p.validate()
        self.last_round = p.n - p.d + 1

    def start(self):
        m = self.params.m
        st = Alg1State(pc="write", j=0, round=0, counter=0, competitors=0,
                       myview=(False,) * m)
        return self._next_round(st)

    def _next_round(self, st):
        return self._write_owned(st._replace(round=st.round + 1), 0)

    def _write_owned(self, st, j):
        view = st.myview
        for k in range(j, len(view)):
            if view[k]:
                return st._replace(pc="write", j=k), Write(k + 1, st.round)
        return self._scan(st, 0)

    def _scan(self, st, j):
        if j < self.params.m:
            return st._replace(pc="read", j=j), Read(j + 1)
        return self._decide(st)

    def _decide(self, st):
        competitors = self.params.n - st.round + 1
        st = st._replace(competitors=competitors)
        # counter < m / competitors, cross-multiplied to stay exact
        if st.counter * competitors < self.params.m:
            return self._free_owned(st, 0)
        if st.round == self.last_round:
            return st, Verdict.LEADER
        return self._next_round(st)

    def _free_owned(self, st, j):
        view = st.myview
        for k in range(j, len(view)):
            if view[k]:
                return st._replace(pc="free", j=k), Write(k + 1, 0)
        return st, Verdict.NOT_LEADER

    def resume(self, st, result):
        pc = st.pc
        if pc == "read":
            if result < st.round:
                return st._replace(pc="cas"), CompareAndSwap(st.j + 1, 0, st.round)
            return self._scan(st, st.j + 1)
        if pc == "cas":
            if result:
                view = list(st.myview)
                view[st.j] = True
                st = st._replace(myview=tuple(view), counter=st.counter + 1)
            # back to the while test on the same register
            return st._replace(pc="read"), Read(st.j + 1)
        if pc == "write":
            return self._write_owned(st, st.j + 1)
        if pc == "free":
            return self._free_owned(st, st.j + 1)
        raise RuntimeError(f"bad program counter {pc!r}")


# --------------------------------------------------------------------------
# Algorithm 2: exact d-election, participation required
# --------------------------------------------------------------------------

class Alg2State(NamedTuple):
    pc: str  # "read" | "capture" | "claim"
    j: int  # next register to read (0-based) when pc == "read"
    x: int  # 0-based register chosen for the pending CAS
    won: int
    sum: int
    myview: tuple


class Alg2Machine:
    """Square capture driven by a Bezout pair ``u*m = v*n + d``.

    Each register holds ``u`` squares, captured one at a time with
    ``CAS(R[x], seen, seen + 1)``.  A process first captures ``v`` squares;
    once it sees ``v*n`` captures in total it competes for one of the ``d``
    leftover squares, and winning one elects it.  Seeing all ``u*m``
    squares taken means it lost.
    """

    name = "alg2"

    def __init__(self, p: Params, b: BezoutPair | None = None):
        self.params = p.validate()
        if b is None:
            b = bezout_pair(p)
        if b.u * p.m != b.v * p.n + p.d or b.u < 1 or b.v < 1:
            raise InfeasibleParams(f"{b} does not satisfy u*m = v*n + d for {p}")
        self.bezout = b
        self.total = b.u * p.m
        self.vn = b.v * p.n

    def start(self):
        m = self.params.m
        st = Alg2State(pc="read", j=0, x=0, won=0, sum=0, myview=(0,) * m)
        return st, Read(1)

    def _rescan(self, st):
        return st._replace(pc="read", j=0), Read(1)

    def _until(self, st):
        if st.sum == self.total:
            return st, Verdict.NOT_LEADER
        return self._rescan(st)

    def _after_scan(self, st):
        view = st.myview
        st = st._replace(sum=sum(view))
        u = self.bezout.u
        x = next((k for k, val in enumerate(view) if val < u), None)
        if x is None:
            return self._until(st)
        st = st._replace(x=x)
        if st.won < self.bezout.v:
            return st._replace(pc="capture"), CompareAndSwap(x + 1, view[x], view[x] + 1)
        return self._maybe_claim(st)

    def _maybe_claim(self, st):
        if st.sum >= self.vn:
            seen = st.myview[st.x]
            return st._replace(pc="claim"), CompareAndSwap(st.x + 1, seen, seen + 1)
        return self._until(st)

    def resume(self, st, result):
        pc = st.pc
        if pc == "read":
            view = list(st.myview)
            view[st.j] = result
            st = st._replace(myview=tuple(view))
            if st.j + 1 < self.params.m:
                return st._replace(j=st.j + 1), Read(st.j + 2)
            return self._after_scan(st)
        if pc == "capture":
            if result:
                st = st._replace(won=st.won + 1)
            return self._maybe_claim(st)
        if pc == "claim":
            if result:
                return st, Verdict.LEADER
            return self._until(st)
        raise RuntimeError(f"bad program counter {pc!r}")


# --------------------------------------------------------------------------
# Algorithm 3: a single RMW register
# --------------------------------------------------------------------------

class Alg3State(NamedTuple):
    pc: str  # "read" | "cas"
    myview: int


class Alg3Machine:
    """One register counts the leaders elected so far; stop once it hits d."""

    name = "alg3"

    def __init__(self, p: Params):
        self.params = p.validate()
        if p.m != 1:
            raise ValueError("alg3 runs on exactly one register")

    def start(self):
        return Alg3State(pc="read", myview=0), Read(1)

    def resume(self, st, result):
        if st.pc == "read":
            if result >= self.params.d:
                return st._replace(myview=result), Verdict.NOT_LEADER
            return Alg3State("cas", result), CompareAndSwap(1, result, result + 1)
        if result:
            return st, Verdict.LEADER
        return st._replace(pc="read"), Read(1)


def gcd_composition_machine(p: Params) -> Alg2Machine:
    """d-election with full participation: run exact gcd(m, n)-election."""
    p = p.validate()
    g = gcd(p.m, p.n)
    if g > p.d:
        raise InfeasibleParams(f"gcd({p.m}, {p.n}) = {g} exceeds d = {p.d}")
    inner = Params(p.n, p.m, g)
    machine = Alg2Machine(inner, bezout_pair(inner))
    machine.name = "gcd-composition"
    return machine


ALGORITHMS = ("alg1", "alg2", "alg3", "gcd-composition")


def make_machine(algorithm: str, p: Params) -> StepMachine:
    if algorithm == "alg1":
        return Alg1Machine(p)
    if algorithm == "alg2":
        return Alg2Machine(p, bezout_pair(p))
    if algorithm == "alg3":
        return Alg3Machine(p)
    if algorithm == "gcd-composition":
        return gcd_composition_machine(p)
    raise ValueError(f"unknown algorithm {algorithm!r}")
