"""
Deterministic Rabin automata over valuations of atomic propositions.

Guards are Boolean formulas over AP indices. Valuations are handled as bit
masks (bit i set iff AP i holds), so the transition table of a DRA is an
integer array of shape (n_states, 2**n_ap), filled and validated once at
construction.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    APMismatchError,
    HoaError,
    IncompletenessError,
    NondeterminismError,
)

logger = logging.getLogger(__name__)

MAX_APS = 16

_PRECEDENCE = {"or": 1, "and": 2, "not": 3, "ap": 4, "t": 4, "f": 4}


@dataclass(frozen=True)
class Guard:
    op: str
    operands: tuple["Guard", ...] = ()
    ap: int | None = None

    @classmethod
    def true(cls) -> "Guard":
        return cls("t")

    @classmethod
    def false(cls) -> "Guard":
        return cls("f")

    @classmethod
    def atom(cls, index: int) -> "Guard":
        return cls("ap", ap=index)

    def __invert__(self) -> "Guard":
        return Guard("not", (self,))

    def __and__(self, other: "Guard") -> "Guard":
        return Guard("and", (self, other))

    def __or__(self, other: "Guard") -> "Guard":
        return Guard("or", (self, other))

    def evaluate(self, mask: int) -> bool:
        if self.op == "t":
            return True
        if self.op == "f":
            return False
        if self.op == "ap":
            return bool(mask >> self.ap & 1)
        if self.op == "not":
            return not self.operands[0].evaluate(mask)
        if self.op == "and":
            return all(g.evaluate(mask) for g in self.operands)
        return any(g.evaluate(mask) for g in self.operands)

    def max_ap(self) -> int:
        if self.op == "ap":
            return self.ap
        return max((g.max_ap() for g in self.operands), default=-1)

    def __str__(self):
        if self.op in ("t", "f"):
            return self.op
        if self.op == "ap":
            return str(self.ap)
        if self.op == "not":
            return "!" + self._wrap(self.operands[0], _PRECEDENCE["not"])
        joiner = " & " if self.op == "and" else " | "
        prec = _PRECEDENCE[self.op]
        return joiner.join(self._wrap(g, prec + 1) for g in self.operands)

    @staticmethod
    def _wrap(guard: "Guard", min_prec: int) -> str:
        text = str(guard)
        return text if _PRECEDENCE[guard.op] >= min_prec else f"({text})"


@dataclass(frozen=True)
class Edge:
    guard: Guard
    target: int


@dataclass(frozen=True)
class RabinPair:
    fin: frozenset[int]
    inf: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "fin", frozenset(self.fin))
        object.__setattr__(self, "inf", frozenset(self.inf))


@dataclass(frozen=True)
class DRA:
    ap_names: tuple[str, ...]
    initial: int
    edges: tuple[tuple[Edge, ...], ...]
    rabin_pairs: tuple[RabinPair, ...]
    state_names: tuple[str | None, ...] | None = None
    table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ap_names", tuple(self.ap_names))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "rabin_pairs", tuple(self.rabin_pairs))
        n = len(self.edges)
        if n == 0:
            raise HoaError("automaton has no states")
        if len(self.ap_names) > MAX_APS:
            raise HoaError(f"at most {MAX_APS} atomic propositions are supported")
        if len(set(self.ap_names)) != len(self.ap_names):
            raise HoaError(f"duplicate atomic proposition names {self.ap_names}")
        if not 0 <= self.initial < n:
            raise HoaError(f"initial state {self.initial} out of range")
        if not self.rabin_pairs:
            raise HoaError("a Rabin automaton needs at least one pair")
        for pair in self.rabin_pairs:
            if any(not 0 <= s < n for s in pair.fin | pair.inf):
                raise HoaError(f"Rabin pair {pair} names an unknown state")
        if self.state_names is not None and len(self.state_names) != n:
            raise HoaError("state name count differs from state count")
        object.__setattr__(self, "table", self._build_table())

    def _build_table(self) -> np.ndarray:
        n_ap = len(self.ap_names)
        table = np.full((self.n_states, 1 << n_ap), -1, dtype=np.int64)
        for s, edges in enumerate(self.edges):
            for edge in edges:
                if not 0 <= edge.target < self.n_states:
                    raise HoaError(
                        f"state {s} has an edge to unknown state {edge.target}"
                    )
                if edge.guard.max_ap() >= n_ap:
                    raise HoaError(
                        f"state {s} has a guard over an undeclared AP: {edge.guard}"
                    )
            for mask in range(1 << n_ap):
                targets = [e.target for e in edges if e.guard.evaluate(mask)]
                if not targets:
                    raise IncompletenessError(
                        f"state {s} has no edge for valuation {self.describe(mask)}"
                    )
                if len(targets) > 1:
                    raise NondeterminismError(
                        f"state {s} has {len(targets)} edges for valuation "
                        f"{self.describe(mask)}"
                    )
                table[s, mask] = targets[0]
        return table

    @property
    def n_states(self) -> int:
        return len(self.edges)

    def describe(self, mask: int) -> str:
        held = [name for i, name in enumerate(self.ap_names) if mask >> i & 1]
        return "{" + ", ".join(held) + "}"

    def valuation_mask(self, valuation: Iterable[str]) -> int:
        index = {name: i for i, name in enumerate(self.ap_names)}
        mask = 0
        for name in valuation:
            if name not in index:
                raise APMismatchError(
                    f"proposition {name!r} is not declared "
                    f"by the automaton {self.ap_names}"
                )
            mask |= 1 << index[name]
        return mask

    def step(self, s: int, valuation: Iterable[str]) -> int:
        return int(self.table[s, self.valuation_mask(valuation)])

    def is_accepting(self, states: Iterable[int]) -> bool:
        """Some pair i meets F_i and avoids E_i."""
        states = frozenset(states)
        return any(states & p.inf and not states & p.fin for p in self.rabin_pairs)


def step(dra: DRA, s: int, valuation: Iterable[str]) -> int:
    """Unique successor of automaton state `s` under `valuation`."""
    return dra.step(s, valuation)
