"""
Interval-valued Markov chains and their products with Rabin automata.

Lower and upper bound matrices are CSR matrices sharing one sparsity pattern:
an entry is stored iff its upper bound is positive, so an absent entry means
the transition is structurally impossible. Lower bounds may be explicit zeros.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .automata import DRA
from .exceptions import ModelError
from .geometry import Rect
from .models import Comparison

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
ZERO_TOL = 1e-12


def aligned_bounds(
    n_states: int,
    rows: np.ndarray,
    cols: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """
    Assemble CSR lower/upper matrices with an identical sparsity pattern.

    Entries with a nonpositive upper bound are dropped. Duplicate (row, col)
    pairs are rejected.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    keep = upper > 0
    rows, cols, lower, upper = rows[keep], cols[keep], lower[keep], upper[keep]

    order = np.lexsort((cols, rows))
    rows, cols, lower, upper = rows[order], cols[order], lower[order], upper[order]
    if rows.size > 1:
        dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
        if dup.any():
            k = int(np.flatnonzero(dup)[0])
            raise ModelError(f"duplicate transition ({rows[k]}, {cols[k]})")

    indptr = np.zeros(n_states + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_states), out=indptr[1:])
    shape = (n_states, n_states)
    lo = sparse.csr_matrix((lower, cols, indptr), shape=shape)
    hi = sparse.csr_matrix((upper.copy(), cols.copy(), indptr.copy()), shape=shape)
    return lo, hi


def check_bounds(lower: sparse.csr_matrix, upper: sparse.csr_matrix) -> None:
    """
    Validate elementwise order and per-row feasibility.

    Raises ModelError naming the first offending row: every row must satisfy
    0 ≤ Ť ≤ T̂ ≤ 1 and Σ Ť ≤ 1 ≤ Σ T̂.
    """
    lo, hi = lower.data, upper.data
    bad = (lo < -ZERO_TOL) | (hi > 1 + FEASIBILITY_TOL) | (lo > hi + ZERO_TOL)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        row = int(np.searchsorted(lower.indptr, k, side="right") - 1)
        raise ModelError(
            f"row {row}: bounds [{lo[k]!r}, {hi[k]!r}] violate 0 ≤ lower ≤ upper ≤ 1"
        )
    lower_sums = np.asarray(lower.sum(axis=1)).ravel()
    upper_sums = np.asarray(upper.sum(axis=1)).ravel()
    infeasible = (lower_sums > 1 + FEASIBILITY_TOL) | (upper_sums < 1 - FEASIBILITY_TOL)
    if infeasible.any():
        row = int(np.flatnonzero(infeasible)[0])
        raise ModelError(
            f"row {row} is infeasible: sum of lower bounds {lower_sums[row]!r}, "
            f"sum of upper bounds {upper_sums[row]!r}"
        )


@dataclass(frozen=True, eq=False)
class IMC:
    lower: sparse.csr_matrix
    upper: sparse.csr_matrix
    props: tuple[frozenset[str], ...]
    cells: tuple[Rect, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "props", tuple(frozenset(p) for p in self.props))
        n = self.lower.shape[0]
        if self.lower.shape != (n, n) or self.upper.shape != (n, n):
            raise ModelError(
                "transition bound matrices must be square and equal in shape"
            )
        if len(self.props) != n:
            raise ModelError(f"{len(self.props)} proposition sets for {n} states")
        if self.cells is not None and len(self.cells) != n:
            raise ModelError(f"{len(self.cells)} cells for {n} states")
        if not (
            np.array_equal(self.lower.indptr, self.upper.indptr)
            and np.array_equal(self.lower.indices, self.upper.indices)
        ):
            raise ModelError("lower and upper bounds must share one sparsity pattern")
        check_bounds(self.lower, self.upper)

    @classmethod
    def from_triplets(
        cls,
        n_states: int,
        rows,
        cols,
        lower,
        upper,
        props: Sequence[frozenset[str]],
        cells: Sequence[Rect] | None = None,
    ) -> "IMC":
        lo, hi = aligned_bounds(n_states, rows, cols, lower, upper)
        return cls(lo, hi, tuple(props), tuple(cells) if cells is not None else None)

    @property
    def n_states(self) -> int:
        return self.lower.shape[0]

    def row(self, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (successors, lower bounds, upper bounds) of state j."""
        start, end = self.upper.indptr[j], self.upper.indptr[j + 1]
        return (
            self.upper.indices[start:end],
            self.lower.data[start:end],
            self.upper.data[start:end],
        )

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        counts = np.diff(self.upper.indptr)
        rows = np.repeat(np.arange(self.n_states), counts)
        cols = self.upper.indices.copy()
        return rows, cols, self.lower.data.copy(), self.upper.data.copy()

    def same_bounds(self, other: "IMC") -> bool:
        """Bitwise equality of shape, pattern and both bound arrays."""
        return (
            self.upper.shape == other.upper.shape
            and np.array_equal(self.upper.indptr, other.upper.indptr)
            and np.array_equal(self.upper.indices, other.upper.indices)
            and np.array_equal(self.lower.data, other.lower.data)
            and np.array_equal(self.upper.data, other.upper.data)
        )


@dataclass(frozen=True, eq=False)
class ProductIMC:
    """
    Product of an IMC with a DRA.

    `pairs[q] = (cell, automaton_state)`; `in_fin[q, i]` / `in_inf[q, i]` mark
    membership of q in E_i / F_i of Rabin pair i; `initial[j]` is the index of
    ⟨Q_j, s0⟩.
    """

    lower: sparse.csr_matrix
    upper: sparse.csr_matrix
    pairs: np.ndarray
    in_fin: np.ndarray
    in_inf: np.ndarray
    initial: np.ndarray
    n_cells: int
    n_automaton_states: int
    cell_props: tuple[frozenset[str], ...] = field(default=())

    @property
    def n_states(self) -> int:
        return self.lower.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.in_fin.shape[1]

    def cell_of(self, q: int) -> int:
        return int(self.pairs[q, 0])

    def row(self, q: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        start, end = self.upper.indptr[q], self.upper.indptr[q + 1]
        return (
            self.upper.indices[start:end],
            self.lower.data[start:end],
            self.upper.data[start:end],
        )

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        counts = np.diff(self.upper.indptr)
        rows = np.repeat(np.arange(self.n_states), counts)
        cols = self.upper.indices.copy()
        return rows, cols, self.lower.data.copy(), self.upper.data.copy()

    @cached_property
    def state_index(self) -> dict[tuple[int, int], int]:
        return {(int(c), int(s)): q for q, (c, s) in enumerate(self.pairs)}

    def is_accepting(self, states) -> bool:
        """A state set is accepting if some pair meets F_i and avoids E_i."""
        idx = np.fromiter(states, dtype=np.int64)
        if idx.size == 0:
            return False
        fin = self.in_fin[idx].any(axis=0)
        inf = self.in_inf[idx].any(axis=0)
        return bool(np.any(inf & ~fin))

    def reachable_from_initial(self) -> np.ndarray:
        """Mask of states reachable from an initial state in the optimistic graph."""
        reached = np.zeros(self.n_states, dtype=bool)
        frontier = np.unique(self.initial)
        reached[frontier] = True
        indptr, indices = self.upper.indptr, self.upper.indices
        while frontier.size:
            succ = np.concatenate(
                [indices[indptr[q] : indptr[q + 1]] for q in frontier]
            )
            succ = np.unique(succ)
            frontier = succ[~reached[succ]]
            reached[frontier] = True
        return reached

    def restrict(self, keep: np.ndarray) -> "ProductIMC":
        """
        Sub-product on the states selected by the boolean mask `keep`.

        Every kept state must have all its successors kept, and every
        initial state must be kept; otherwise rows would lose mass.
        """
        keep = np.asarray(keep, dtype=bool)
        if not keep[self.initial].all():
            raise ModelError("restriction must keep every initial state")
        old_to_new = np.full(self.n_states, -1, dtype=np.int64)
        kept = np.flatnonzero(keep)
        old_to_new[kept] = np.arange(kept.size)
        rows, cols, lo, hi = self.triplets()
        mask = keep[rows]
        if not keep[cols[mask]].all():
            raise ModelError("restriction drops transitions of kept states")
        lower, upper = aligned_bounds(
            kept.size,
            old_to_new[rows[mask]],
            old_to_new[cols[mask]],
            lo[mask],
            hi[mask],
        )
        return ProductIMC(
            lower=lower,
            upper=upper,
            pairs=self.pairs[kept],
            in_fin=self.in_fin[kept],
            in_inf=self.in_inf[kept],
            initial=old_to_new[self.initial],
            n_cells=self.n_cells,
            n_automaton_states=self.n_automaton_states,
            cell_props=self.cell_props,
        )

    def tightened(self) -> "ProductIMC":
        """
        Replace each bound by the tightest value attained by some feasible row.

        Ť*(q,q') = max(Ť, 1 − Σ_{others} T̂), T̂*(q,q') = min(T̂, 1 − Σ_{others} Ť).
        The set of induced chains is unchanged; afterwards every stored edge
        can carry positive mass.
        """
        counts = np.diff(self.upper.indptr)
        rows = np.repeat(np.arange(self.n_states), counts)
        lo, hi = self.lower.data, self.upper.data
        lo_sum = np.asarray(self.lower.sum(axis=1)).ravel()[rows]
        hi_sum = np.asarray(self.upper.sum(axis=1)).ravel()[rows]
        new_lo = np.clip(np.maximum(lo, 1.0 - (hi_sum - hi)), 0.0, 1.0)
        new_hi = np.clip(np.minimum(hi, 1.0 - (lo_sum - lo)), 0.0, 1.0)
        new_hi[new_hi < ZERO_TOL] = 0.0
        new_lo = np.minimum(new_lo, new_hi)
        new_lo[new_lo < ZERO_TOL] = 0.0
        lower, upper = aligned_bounds(
            self.n_states, rows, self.upper.indices, new_lo, new_hi
        )
        return ProductIMC(
            lower=lower,
            upper=upper,
            pairs=self.pairs,
            in_fin=self.in_fin,
            in_inf=self.in_inf,
            initial=self.initial,
            n_cells=self.n_cells,
            n_automaton_states=self.n_automaton_states,
            cell_props=self.cell_props,
        )


@dataclass(frozen=True)
class Spec:
    comparison: Comparison
    p_sat: float
    dra: DRA

    def __post_init__(self):
        object.__setattr__(self, "comparison", Comparison(self.comparison))
        if not 0.0 <= self.p_sat <= 1.0:
            raise ModelError(f"p_sat must lie in [0, 1], got {self.p_sat}")

    def __str__(self):
        return f"P{self.comparison.value}{self.p_sat:g}"
