"""Anonymous shared memory: m atomic registers seen through per-process name maps.

Logical and physical register names are both 1-based.
"""

from __future__ import annotations

import random
from typing import NamedTuple, Union

from anonelect.errors import AddressOutOfRange, UnknownProcess


class Read(NamedTuple):
    addr: int

    kind = "read"


class Write(NamedTuple):
    addr: int
    val: int

    kind = "write"


class CompareAndSwap(NamedTuple):
    addr: int
    old: int
    new: int

    kind = "cas"


MemoryOp = Union[Read, Write, CompareAndSwap]
# Read -> int, Write -> None, CompareAndSwap -> bool
OpResult = Union[int, None, bool]


def op_to_json(op: MemoryOp) -> dict:
    return {"kind": op.kind, **op._asdict()}


def op_from_json(data: dict) -> MemoryOp:
    kind = data["kind"]
    if kind == "read":
        return Read(data["addr"])
    if kind == "write":
        return Write(data["addr"], data["val"])
    if kind == "cas":
        return CompareAndSwap(data["addr"], data["old"], data["new"])
    raise ValueError(f"unknown op kind {kind!r}")


def execute(value: int, op: MemoryOp) -> tuple[int, OpResult]:
    """Apply ``op`` to a register holding ``value``; return (new value, result)."""
    if type(op) is Read:
        return value, value
    if type(op) is Write:
        if op.val < 0:
            raise ValueError("register values are non-negative")
        return op.val, None
    if value == op.old:
        if op.new < 0:
            raise ValueError("register values are non-negative")
        return op.new, True
    return value, False


class Permutation:
    """Bijection from logical names 1..m to physical registers 1..m."""

    __slots__ = ("map",)

    def __init__(self, mapping):
        mapping = tuple(mapping)
        if sorted(mapping) != list(range(1, len(mapping) + 1)):
            raise ValueError(f"not a permutation of 1..{len(mapping)}: {mapping}")
        self.map = mapping

    def __call__(self, x: int) -> int:
        return self.map[x - 1]

    def __len__(self):
        return len(self.map)

    def __eq__(self, other):
        return isinstance(other, Permutation) and self.map == other.map

    def __hash__(self):
        return hash(self.map)

    def __repr__(self):
        return f"Permutation({list(self.map)})"

    @classmethod
    def identity(cls, m: int) -> "Permutation":
        return cls(range(1, m + 1))

    @classmethod
    def rotation(cls, m: int, offset: int) -> "Permutation":
        return cls(((x - 1 + offset) % m) + 1 for x in range(1, m + 1))


def make_permutations(n: int, m: int, policy: str = "identity", *, stride: int = 1,
                      seed: int | None = None) -> list[Permutation]:
    """Build one name map per process.

    ``policy`` is ``"identity"``, ``"rotation"`` (process i shifted by
    ``i * stride``) or ``"random"`` (Fisher-Yates per process, seeded).
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if policy == "identity":
        return [Permutation.identity(m) for _ in range(n)]
    if policy == "rotation":
        return [Permutation.rotation(m, i * stride) for i in range(n)]
    if policy == "random":
        if seed is None:
            raise ValueError("random permutations need an explicit seed")
        rng = random.Random(seed)
        perms = []
        for _ in range(n):
            phys = list(range(1, m + 1))
            rng.shuffle(phys)
            perms.append(Permutation(phys))
        return perms
    raise ValueError(f"unknown permutation policy {policy!r}")


class AnonymousMemory:
    """``m`` registers, all starting at 0, plus a fixed name map per process."""

    def __init__(self, m: int, perms: list[Permutation]):
        if m < 1:
            raise ValueError("memory needs at least one register")
        for p in perms:
            if len(p) != m:
                raise ValueError("permutation size does not match register count")
        self.m = m
        self.registers = [0] * m
        self.perms = list(perms)
        self.op_count = 0

    def resolve(self, pid: int, addr: int) -> int:
        if not 0 <= pid < len(self.perms):
            raise UnknownProcess(pid)
        if not 1 <= addr <= self.m:
            raise AddressOutOfRange(f"logical address {addr} outside 1..{self.m}")
        return self.perms[pid].map[addr - 1]

    def apply(self, pid: int, op: MemoryOp) -> OpResult:
        phys = self.resolve(pid, op.addr)
        self.registers[phys - 1], result = execute(self.registers[phys - 1], op)
        self.op_count += 1
        return result

    def snapshot(self) -> list[int]:
        return list(self.registers)
