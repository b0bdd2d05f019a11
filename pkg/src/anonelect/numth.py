"""Feasibility predicates for election over anonymous RMW registers.

All functions are pure and operate on plain ints.
"""

from __future__ import annotations

from typing import NamedTuple

from anonelect.errors import InfeasibleParams

MAX_PARAM = 10_000
_INT64_MAX = 2**63 - 1


class Params(NamedTuple):
    """Process count ``n``, register count ``m`` and leader bound ``d``."""

    n: int
    m: int
    d: int

    def validate(self) -> "Params":
        for name, value in zip(self._fields, self):
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            if value > MAX_PARAM:
                raise ValueError(f"{name}={value} exceeds the supported cap {MAX_PARAM}")
        return self


class BezoutPair(NamedTuple):
    u: int
    v: int


def gcd(a: int, b: int) -> int:
    if a < 1 or b < 1:
        raise ValueError("gcd is defined here for positive integers only")
    while b:
        a, b = b, a % b
    return a


def divides(a: int, b: int) -> bool:
    if a < 1:
        raise ValueError("divisor must be positive")
    return b % a == 0


def in_M(m: int, n: int, d: int) -> bool:
    """True iff gcd(l, m) <= d for every 1 < l <= n."""
    return all(gcd(ell, m) <= d for ell in range(2, n + 1))


def _checked_mul(a: int, b: int) -> int:
    r = a * b
    if r > _INT64_MAX:
        raise OverflowError(f"{a} * {b} overflows 64-bit arithmetic")
    return r


def bezout_pair(p: Params) -> BezoutPair:
    """Smallest positive ``(u, v)`` with ``u*m == v*n + d``.

    Scans ``u = 1, 2, ...``; a solution, if any, exists with ``u <= n``
    (plus one extra period to skip a ``v = 0`` hit), so the scan is bounded.
    """
    n, m, d = p.validate()
    if not divides(gcd(m, n), d):
        raise InfeasibleParams(f"gcd({m}, {n}) = {gcd(m, n)} does not divide d = {d}")
    # u*m = d (mod n) has a solution class of period n // gcd(m, n);
    # d // m + 2 * n comfortably covers the first positive-v solution.
    for u in range(1, d // m + 2 * n + 2):
        rest = _checked_mul(u, m) - d
        if rest > 0 and rest % n == 0:
            return BezoutPair(u, rest // n)
    raise AssertionError("unreachable: gcd condition guarantees a solution")


def witness_size(n: int, m: int, d: int) -> int | None:
    """Largest participant count k <= n with gcd(m, k) > d, or None."""
    for k in range(n, 0, -1):
        if gcd(m, k) > d:
            return k
    return None


def feasibility(n: int, m: int, d: int) -> dict:
    """Condition flags for the three RMW rows plus the RW row."""
    Params(n, m, d).validate()
    g = gcd(m, n)
    report = {
        "n": n,
        "m": m,
        "d": d,
        "gcd": g,
        "in_M": in_M(m, n, d),
        "gcd_divides_d": divides(g, d),
        "gcd_le_d": g <= d,
        "bezout": None,
        "rows": {},
    }
    if report["gcd_divides_d"]:
        report["bezout"] = bezout_pair(Params(n, m, d))._asdict()
    report["rows"] = {
        "d_election_not_required": report["in_M"],
        "exact_d_election_required": report["gcd_divides_d"],
        "d_election_required": report["gcd_le_d"],
        "rw_any": False,
    }
    return report
