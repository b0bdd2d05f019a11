"""Leader election in fully anonymous shared-memory systems.

Deterministic simulation of anonymous processes over anonymous RMW
registers: the feasibility predicates, three election algorithms as step
machines, adversarial schedules, an exhaustive explorer and the trace
checks that tie them together.
"""

from anonelect.errors import (
    AddressOutOfRange,
    BudgetExceeded,
    InfeasibleParams,
    StateBoundExceeded,
    UnknownProcess,
)
from anonelect.numth import BezoutPair, Params, bezout_pair, divides, gcd, in_M

__all__ = [
    "AddressOutOfRange",
    "BezoutPair",
    "BudgetExceeded",
    "InfeasibleParams",
    "Params",
    "StateBoundExceeded",
    "UnknownProcess",
    "bezout_pair",
    "divides",
    "gcd",
    "in_M",
]

__version__ = "0.1.0"
