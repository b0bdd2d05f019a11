"""Deterministic read/write-only step machines used to exercise the RW
symmetry argument.  None of them can elect a strict subset of lock-stepped
processes sharing one name map; several try hard to.
"""

from __future__ import annotations

from typing import NamedTuple

from anonelect.memory import Read, Write
from anonelect.numth import Params
from anonelect.procs import Verdict


class RWState(NamedTuple):
    pc: int
    acc: int
    aux: int
    view: tuple


class ReadIncrement:
    """Read R[1], write back value + 1, a few times; leader on odd final read."""

    name = "rw-read-increment"

    def __init__(self, p: Params, rounds: int = 4):
        self.params = p
        self.rounds = rounds

    def start(self):
        return RWState(0, 0, 0, ()), Read(1)

    def resume(self, st, result):
        if st.pc == 0:  # got a read
            if st.aux == self.rounds:
                return st._replace(acc=result), Verdict.LEADER if result % 2 else Verdict.NOT_LEADER
            return st._replace(pc=1, acc=result), Write(1, result + 1)
        return st._replace(pc=0, aux=st.aux + 1), Read(1)


class ClaimThenVerify:
    """Write a mark into a free register, then re-read it to see if it stuck."""

    name = "rw-claim-verify"

    def __init__(self, p: Params):
        self.params = p

    def start(self):
        return RWState(0, 1, 0, ()), Read(1)

    def resume(self, st, result):
        m = self.params.m
        if st.pc == 0:  # probing register acc
            if result == 0:
                return st._replace(pc=1), Write(st.acc, 1)
            if st.acc == m:
                return st, Verdict.NOT_LEADER
            return st._replace(acc=st.acc + 1), Read(st.acc + 1)
        if st.pc == 1:
            return st._replace(pc=2), Read(st.acc)
        return st, Verdict.LEADER if result == 1 else Verdict.NOT_LEADER


class TicketBakery:
    """Take ticket max+1 over a full scan, publish it, rescan; win if still max."""

    name = "rw-ticket-bakery"

    def __init__(self, p: Params):
        self.params = p

    def start(self):
        return RWState(0, 0, 0, ()), Read(1)

    def resume(self, st, result):
        m = self.params.m
        if st.pc == 0:  # first scan, aux = index just read (0-based)
            view = st.view + (result,)
            if len(view) < m:
                return st._replace(view=view), Read(len(view) + 1)
            ticket = max(view) + 1
            return RWState(1, ticket, 0, ()), Write(1, ticket)
        if st.pc == 1:
            return RWState(2, st.acc, 0, ()), Read(1)
        view = st.view + (result,)
        if len(view) < m:
            return st._replace(view=view), Read(len(view) + 1)
        return st._replace(view=view), Verdict.LEADER if max(view) == st.acc else Verdict.NOT_LEADER


class SpinOnFlag:
    """Raise a flag in R[1], then wait for someone to lower it (nobody does)."""

    name = "rw-spin-flag"

    def __init__(self, p: Params):
        self.params = p

    def start(self):
        return RWState(0, 0, 0, ()), Write(1, 1)

    def resume(self, st, result):
        # never halts: the register it waits on only ever holds 1
        return st._replace(pc=1, aux=min(st.aux + 1, 3)), Read(1)


class RoundRobinToggle:
    """Walk the registers flipping bits and tally the ones seen; parity decides."""

    name = "rw-toggle"

    def __init__(self, p: Params, laps: int = 3):
        self.params = p
        self.laps = laps

    def start(self):
        return RWState(0, 0, 0, ()), Read(1)

    def resume(self, st, result):
        m = self.params.m
        idx = st.aux % m
        if st.pc == 0:
            return st._replace(pc=1, acc=st.acc + result), Write(idx + 1, 1 - result)
        nxt = st.aux + 1
        if nxt == self.laps * m:
            return st._replace(aux=nxt), Verdict.LEADER if st.acc % 2 else Verdict.NOT_LEADER
        return st._replace(pc=0, aux=nxt), Read(nxt % m + 1)


class ReadWriteCounter:
    """The single-register counter election with the CAS split into read + write."""

    name = "rw-split-counter"

    def __init__(self, p: Params):
        self.params = p

    def start(self):
        return RWState(0, 0, 0, ()), Read(1)

    def resume(self, st, result):
        if st.pc == 0:
            if result >= self.params.d:
                return st, Verdict.NOT_LEADER
            return st._replace(pc=1, acc=result), Write(1, result + 1)
        if st.pc == 1:
            return st._replace(pc=2), Read(1)
        if result == st.acc + 1:
            return st, Verdict.LEADER
        return st._replace(pc=0), Read(1)


RW_MACHINES = (ReadIncrement, ClaimThenVerify, TicketBakery, SpinOnFlag, RoundRobinToggle,
               ReadWriteCounter)


def rw_library(p: Params) -> list:
    return [cls(p) for cls in RW_MACHINES]
