"""
Interval value iteration for maximal reachability on product IMCs.

The inner maximisation over a row's feasible distributions is solved by the
greedy order-statistics allocation: every successor gets its lower bound and
the remaining slack goes to successors in decreasing order of value, each
capped at its upper bound. Ties in value are broken by graph distance to the
target and then by state index, so the returned induced chain routes mass
towards the target whenever values are equal.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed
from scipy import sparse

from .chains import ProductIMC
from .components import ComponentSets, ProductGraph, edge_ids
from .exceptions import ConvergenceError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITERS = 100_000
ROW_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ValueVector:
    values: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True, eq=False)
class InducedMC:
    """Row-stochastic chain on the product's sparsity pattern."""

    matrix: sparse.csr_matrix

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def successors(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        start, end = self.matrix.indptr[q], self.matrix.indptr[q + 1]
        probs = self.matrix.data[start:end]
        keep = probs > 0
        return self.matrix.indices[start:end][keep], probs[keep]

    def max_row_error(self) -> float:
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        return float(np.abs(sums - 1.0).max()) if sums.size else 0.0


class ExtremalChain(NamedTuple):
    mc: InducedMC
    value: ValueVector


def greedy_allocation(lower, upper, key_values, tie_rank=None) -> np.ndarray:
    """
    Feasible row maximising Σ p·key_values within [lower, upper].

    Successors are served in decreasing `key_values`, then increasing
    `tie_rank`, then position. A successor whose allocation reaches its cap
    receives exactly its upper bound.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    key_values = np.asarray(key_values, dtype=float)
    tie_rank = np.zeros(lower.size) if tie_rank is None else np.asarray(tie_rank)
    order = np.lexsort((np.arange(lower.size), tie_rank, -key_values))
    cap = (upper - lower)[order]
    before = np.cumsum(cap) - cap
    alloc = np.clip((1.0 - lower.sum()) - before, 0.0, cap)
    p = np.empty_like(lower)
    p[order] = np.where(alloc >= cap, upper[order], lower[order] + alloc)
    return p


def _greedy_block(
    graph: ProductGraph, ks: np.ndarray, values: np.ndarray, rank: np.ndarray
):
    """
    Greedy rows for the edges `ks` (grouped by ascending source).

    Returns (edge probabilities aligned with `ks`, source rows, per-row expected
    value).
    """
    rows = graph.rows[ks]
    cols = graph.cols[ks]
    order = np.lexsort((cols, rank[cols], -values[cols], rows))
    r = rows[order]
    lo = graph.lo[ks][order]
    hi = graph.hi[ks][order]
    cap = hi - lo
    sources, start, inv = np.unique(r, return_index=True, return_inverse=True)
    pos = np.arange(r.size) - start[inv]
    padded = np.zeros((sources.size, int(pos.max()) + 1 if r.size else 0))
    padded[inv, pos] = cap
    before = (np.cumsum(padded, axis=1) - padded)[inv, pos]
    padded[inv, pos] = lo
    lo_sum = padded.sum(axis=1)
    alloc = np.clip((1.0 - lo_sum)[inv] - before, 0.0, cap)
    p_sorted = np.where(alloc >= cap, hi, lo + alloc)
    padded[inv, pos] = p_sorted * values[cols[order]]
    expected = padded.sum(axis=1)
    p = np.empty_like(p_sorted)
    p[order] = p_sorted
    return p, sources, expected


def _distance_rank(graph: ProductGraph, target: np.ndarray) -> np.ndarray:
    """Edge distance to `target` in the optimistic graph (n where unreachable)."""
    rank = np.full(graph.n, graph.n, dtype=np.int64)
    frontier = np.flatnonzero(target)
    rank[frontier] = 0
    depth = 0
    while frontier.size:
        depth += 1
        src = np.unique(graph.t_src[edge_ids(graph.t_indptr, frontier)])
        frontier = src[rank[src] == graph.n]
        rank[frontier] = depth
    return rank


def induced_chain(
    graph: ProductGraph, values: np.ndarray, rank: np.ndarray
) -> InducedMC:
    ks = np.arange(graph.cols.size, dtype=np.int64)
    p = (
        _greedy_block(graph, ks, values, rank)[0]
        if ks.size
        else np.zeros(0)
    )
    matrix = sparse.csr_matrix(
        (p, graph.cols.copy(), graph.indptr.copy()), shape=(graph.n, graph.n)
    )
    return InducedMC(matrix)


def max_reach(
    product: ProductIMC,
    target,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    graph: ProductGraph | None = None,
) -> tuple[ValueVector, InducedMC]:
    """
    Least upper bound on the probability of reaching `target`, per state.

    Strongly connected components of the states that can reach the target
    are processed sinks first; inside a component the Bellman update is
    repeated until successive values differ by less than `tol`.

    Raises ConvergenceError when a component needs more than `max_iters`
    sweeps.
    """
    graph = graph or ProductGraph(product)
    target = graph.mask(target)
    values = target.astype(float)
    rank = _distance_rank(graph, target)
    candidates = (rank < graph.n) & ~target
    iterations = 0
    residual = 0.0

    for component in graph.sccs(candidates):
        ks = edge_ids(graph.indptr, component)
        trivial = component.size == 1 and not np.any(graph.cols[ks] == component[0])
        change = float("inf")
        sweep = 0
        for sweep in range(1, max(max_iters, 1) + 1):
            _, sources, expected = _greedy_block(graph, ks, values, rank)
            change = float(np.max(np.abs(expected - values[sources])))
            values[sources] = expected
            if trivial or change < tol:
                break
        else:
            raise ConvergenceError(
                f"value iteration did not converge on a component of {component.size} "
                f"states within {max_iters} sweeps (residual {change:.3g})",
                residual=change,
                iterations=max_iters,
            )
        iterations = max(iterations, sweep)
        residual = max(residual, 0.0 if trivial else change)

    np.clip(values, 0.0, 1.0, out=values)
    mc = induced_chain(graph, values, rank)
    logger.debug(
        "max_reach: %d target states, %d sweeps, residual %.3g",
        int(target.sum()),
        iterations,
        residual,
    )
    return ValueVector(values, iterations, residual), mc


def extremal_product_mcs(
    product: ProductIMC,
    components: ComponentSets,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    graph: ProductGraph | None = None,
) -> tuple[ExtremalChain, ExtremalChain]:
    """
    Best-case (towards winning) and worst-case (towards losing) chains.

    Returns (upper, lower): p_max(q) = upper.value.values[q] and
    p_min(q) = 1 − lower.value.values[q].
    """
    graph = graph or ProductGraph(product)
    targets = [components.wc_largest, components.lc_largest]
    results = Parallel(n_jobs=2, prefer="threads")(
        delayed(max_reach)(product, t, tol, max_iters, graph) for t in targets
    )
    (v_u, mc_u), (v_l, mc_l) = results
    return ExtremalChain(mc_u, v_u), ExtremalChain(mc_l, v_l)
