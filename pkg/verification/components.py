"""
Graph analysis of product IMCs.

State sets are boolean masks over product states. The two basic fixpoints
are:

- ``at_question(targets, universe)``: states of `universe` that reach
  `targets` in every induced chain (the complement of the largest set the
  adversary can confine itself to).
- ``at_permanent(targets, universe)``: states of `universe` that reach
  `targets` in at least one induced chain, moving only through `universe`.

On top of these, ``find_bsccs`` enumerates candidate bottom components
(potential: a BSCC of some induced chain; permanent: of every chain) and
``find_components`` derives the largest and permanent winning and losing
components.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .chains import FEASIBILITY_TOL, ZERO_TOL, ProductIMC

logger = logging.getLogger(__name__)


def tarjan_scc(indptr: np.ndarray, indices: np.ndarray, nodes=None) -> list[np.ndarray]:
    """
    Strongly connected components of a CSR graph, sinks first.

    Only vertices selected by the boolean mask `nodes` (default: all) and
    the edges between them are considered. Each component is returned as a
    sorted index array; a component is emitted after every component it can
    reach.
    """
    n = len(indptr) - 1
    ptr = np.asarray(indptr).tolist()
    succ = np.asarray(indices).tolist()
    member = [True] * n if nodes is None else np.asarray(nodes, dtype=bool).tolist()
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[np.ndarray] = []
    counter = 0

    for root in range(n):
        if not member[root] or index[root] >= 0:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        work = [(root, ptr[root])]
        while work:
            v, k = work[-1]
            end = ptr[v + 1]
            while k < end:
                w = succ[k]
                k += 1
                if not member[w]:
                    continue
                if index[w] < 0:
                    work[-1] = (v, k)
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, ptr[w]))
                    break
                if on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    if low[v] < low[parent]:
                        low[parent] = low[v]
                if low[v] == index[v]:
                    component = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        component.append(w)
                        if w == v:
                            break
                    sccs.append(np.array(sorted(component), dtype=np.int64))
    return sccs


def edge_ids(indptr: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Positions in a CSR data array of every edge leaving `nodes`."""
    starts = indptr[nodes]
    counts = indptr[nodes + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    return np.arange(total, dtype=np.int64) - offsets + np.repeat(starts, counts)


class ProductGraph:
    """Forward and reverse adjacency of a product with edge usability flags."""

    def __init__(self, product: ProductIMC):
        self.product = product
        self.n = product.n_states
        self.indptr = product.upper.indptr.astype(np.int64)
        self.cols = product.upper.indices.astype(np.int64)
        self.rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        self.lo = product.lower.data
        self.hi = product.upper.data
        lo_sum = np.bincount(self.rows, weights=self.lo, minlength=self.n)
        slack = (lo_sum[self.rows] - self.lo) < 1.0 - ZERO_TOL
        self.usable = (self.hi > ZERO_TOL) & ((self.lo > ZERO_TOL) | slack)

        order = np.lexsort((self.rows, self.cols))
        self.t_indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.cols, minlength=self.n), out=self.t_indptr[1:])
        self.t_src = self.rows[order]
        self.t_lo = self.lo[order]
        self.t_hi = self.hi[order]
        self.t_usable = self.usable[order]

    def mask(self, states) -> np.ndarray:
        if isinstance(states, np.ndarray) and states.dtype == bool:
            return states.copy()
        out = np.zeros(self.n, dtype=bool)
        out[np.fromiter(states, dtype=np.int64)] = True
        return out

    def sccs(self, nodes=None) -> list[np.ndarray]:
        return tarjan_scc(self.indptr, self.cols, nodes)

    def can_confine(self, q: int, inside: np.ndarray) -> bool:
        """No lower-bound mass leaves `inside` and the upper bounds inside reach 1."""
        start, end = self.indptr[q], self.indptr[q + 1]
        targets = inside[self.cols[start:end]]
        lo_out = self.lo[start:end][~targets].sum()
        hi_in = self.hi[start:end][targets].sum()
        return bool(lo_out <= ZERO_TOL and hi_in >= 1.0 - FEASIBILITY_TOL)

    def at_question(self, targets: np.ndarray, universe: np.ndarray) -> np.ndarray:
        """
        States of `universe` that reach `targets` in every induced chain.

        States outside `universe` count as reached.
        """
        avoid = universe & ~targets
        members = np.flatnonzero(avoid)
        if members.size == 0:
            return universe.copy()
        ks = edge_ids(self.indptr, members)
        src, dst = self.rows[ks], self.cols[ks]
        inside = avoid[dst]
        lo_out = np.bincount(
            src, weights=np.where(inside, 0.0, self.lo[ks]), minlength=self.n
        )
        hi_in = np.bincount(
            src, weights=np.where(inside, self.hi[ks], 0.0), minlength=self.n
        )
        leaving = avoid & ((lo_out > ZERO_TOL) | (hi_in < 1.0 - FEASIBILITY_TOL))
        frontier = np.flatnonzero(leaving)
        avoid[frontier] = False
        while frontier.size:
            ks = edge_ids(self.t_indptr, frontier)
            src = self.t_src[ks]
            live = avoid[src]
            src, ks = src[live], ks[live]
            if src.size == 0:
                break
            np.add.at(lo_out, src, self.t_lo[ks])
            np.subtract.at(hi_in, src, self.t_hi[ks])
            touched = np.unique(src)
            bad = (lo_out[touched] > ZERO_TOL) | (
                hi_in[touched] < 1.0 - FEASIBILITY_TOL
            )
            frontier = touched[bad]
            avoid[frontier] = False
        return universe & ~avoid

    def at_permanent(self, targets: np.ndarray, universe: np.ndarray) -> np.ndarray:
        """
        States of `universe` that reach `targets` in some induced chain.

        Paths use only usable edges and pass through `universe`; targets may
        lie outside it.
        """
        reached = targets.copy()
        frontier = np.flatnonzero(targets)
        while frontier.size:
            ks = edge_ids(self.t_indptr, frontier)
            ks = ks[self.t_usable[ks]]
            src = np.unique(self.t_src[ks])
            frontier = src[universe[src] & ~reached[src]]
            reached[frontier] = True
        return reached & universe

    def is_accepting(self, states: np.ndarray) -> bool:
        return self.product.is_accepting(np.flatnonzero(states))


def can_confine(product: ProductIMC, q: int, inside) -> bool:
    graph = ProductGraph(product)
    return graph.can_confine(q, graph.mask(inside))


def at_question(product: ProductIMC, targets, universe) -> set[int]:
    graph = ProductGraph(product)
    found = graph.at_question(graph.mask(targets), graph.mask(universe))
    return set(np.flatnonzero(found).tolist())


def at_permanent(product: ProductIMC, targets, universe) -> set[int]:
    graph = ProductGraph(product)
    found = graph.at_permanent(graph.mask(targets), graph.mask(universe))
    return set(np.flatnonzero(found).tolist())


# ── BSCC candidates ─────────────────────────────────────────────────────────


class BsccSets(NamedTuple):
    acc_potential: list[np.ndarray]
    acc_permanent: list[np.ndarray]
    nonacc_potential: list[np.ndarray]
    nonacc_permanent: list[np.ndarray]


def _good_pairs(product: ProductIMC, states: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(states)
    fin = product.in_fin[idx].any(axis=0)
    inf = product.in_inf[idx].any(axis=0)
    return inf & ~fin


def _find_candidates(graph: ProductGraph) -> list[tuple[np.ndarray, bool]]:
    product = graph.product
    seen: set[frozenset] = set()
    candidates: list[tuple[np.ndarray, bool]] = []
    queue = deque(graph.sccs())

    def push(component: np.ndarray) -> None:
        key = frozenset(component.tolist())
        if key not in seen:
            seen.add(key)
            queue.append(component)

    while queue:
        component = queue.popleft()
        s = np.zeros(graph.n, dtype=bool)
        s[component] = True
        leaky = graph.at_question(~s, s)
        if leaky.any():
            residue = s & ~leaky
            if residue.any():
                for sub in graph.sccs(residue):
                    push(sub)
            continue

        good = _good_pairs(product, s)
        accepting = bool(good.any())
        candidates.append((s, accepting))
        if accepting:
            avoid_targets = [s & product.in_inf[:, good].any(axis=1)]
        else:
            idx = np.flatnonzero(s)
            with_f = product.in_inf[idx].any(axis=0)
            avoid_targets = [s & product.in_fin[:, i] for i in np.flatnonzero(with_f)]
            # smaller non-accepting sets that never visit an Inf state
            avoid_targets.append(s & product.in_inf.any(axis=1))
        for targets in avoid_targets:
            if not targets.any():
                continue
            residue = s & ~graph.at_question(targets, s)
            if residue.any():
                for sub in graph.sccs(residue):
                    push(sub)
    return candidates


def _classify_candidates(graph: ProductGraph, candidates) -> BsccSets:
    sets = BsccSets([], [], [], [])
    for s, accepting in candidates:
        leaky = graph.at_permanent(~s, s).any()
        opposite_inside = any(
            other_acc != accepting and (other & s).any()
            for other, other_acc in candidates
        )
        permanent = not leaky and not opposite_inside
        states = np.flatnonzero(s)
        if accepting:
            bucket = sets.acc_permanent if permanent else sets.acc_potential
        else:
            bucket = sets.nonacc_permanent if permanent else sets.nonacc_potential
        bucket.append(states)
    return sets


def find_bsccs(product: ProductIMC, graph: ProductGraph | None = None) -> BsccSets:
    """
    Potential and permanent accepting / non-accepting BSCCs.

    Works through the SCCs of the optimistic graph: states that cannot stay
    inside are peeled off and the residue is decomposed again; closed sets
    are classified and searched for nested sets of the opposite status;
    non-accepting sets are also searched for nested sets that avoid every
    Inf state.
    Identical candidate sets found along different routes are kept once.
    """
    graph = graph or ProductGraph(product)
    sets = _classify_candidates(graph, _find_candidates(graph))
    logger.debug(
        "BSCC candidates: %d/%d accepting (potential/permanent), "
        "%d/%d non-accepting",
        len(sets.acc_potential),
        len(sets.acc_permanent),
        len(sets.nonacc_potential),
        len(sets.nonacc_permanent),
    )
    return sets


# ── Components ──────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ComponentSets:
    bscc_acc_potential: list[np.ndarray]
    bscc_acc_permanent: list[np.ndarray]
    bscc_nonacc_potential: list[np.ndarray]
    bscc_nonacc_permanent: list[np.ndarray]
    wc_potential: np.ndarray
    wc_permanent: np.ndarray
    lc_potential: np.ndarray
    lc_permanent: np.ndarray
    owners: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def potential_bsccs(self) -> list[np.ndarray]:
        """Accepting then non-accepting potential BSCCs; `owners` indexes this list."""
        return self.bscc_acc_potential + self.bscc_nonacc_potential

    @property
    def wc_largest(self) -> np.ndarray:
        return self.wc_potential | self.wc_permanent

    @property
    def lc_largest(self) -> np.ndarray:
        return self.lc_potential | self.lc_permanent

    @property
    def potential(self) -> np.ndarray:
        return self.wc_potential | self.lc_potential

    @property
    def permanent(self) -> np.ndarray:
        return self.wc_permanent | self.lc_permanent


def _largest(graph: ProductGraph, target: np.ndarray) -> np.ndarray:
    """States reaching `target` with probability one in some induced chain."""
    universe = np.ones(graph.n, dtype=bool)
    while True:
        reach = graph.at_permanent(target & universe, universe)
        doomed = graph.at_question(universe & ~reach, universe)
        if not doomed.any():
            return universe
        universe &= ~doomed


def _permanent(graph: ProductGraph, start: np.ndarray) -> np.ndarray:
    """Largest subset of `start` that no induced chain can leave."""
    universe = start.copy()
    while universe.any():
        escaping = graph.at_permanent(~universe, universe)
        if not escaping.any():
            break
        universe &= ~escaping
    return universe


def _disjoint_maximal(sets: list[np.ndarray], n: int) -> np.ndarray:
    union = np.zeros(n, dtype=bool)
    for states in sorted(sets, key=lambda s: (-s.size, s.tolist())):
        if not union[states].any():
            union[states] = True
    return union


def _union_of(sets: list[np.ndarray], n: int) -> np.ndarray:
    union = np.zeros(n, dtype=bool)
    for states in sets:
        union[states] = True
    return union


def _side(graph: ProductGraph, potential, permanent, opposite):
    """Largest and permanent components for one status."""
    n = graph.n
    largest = np.zeros(n, dtype=bool)
    per_bscc = []
    for states in potential + permanent:
        target = np.zeros(n, dtype=bool)
        target[states] = True
        w = _largest(graph, target)
        per_bscc.append(w)
        largest |= w
    if potential or permanent:
        largest |= _largest(graph, _disjoint_maximal(potential + permanent, n))

    blocked = _union_of(opposite, n)
    permanent_mask = np.zeros(n, dtype=bool)
    for w in per_bscc[len(potential) :]:
        permanent_mask |= _permanent(graph, w & ~blocked)
    if permanent:
        w = _largest(graph, _union_of(permanent, n))
        permanent_mask |= _permanent(graph, w & ~blocked)
    return largest, permanent_mask, per_bscc[: len(potential)]


def find_components(
    product: ProductIMC, bsccs: BsccSets, graph: ProductGraph | None = None
) -> ComponentSets:
    """
    Largest and permanent winning / losing components.

    The largest component of a BSCC candidate is peeled from the full state
    set: states that cannot reach the candidate are dropped, then states
    forced into dropped states, until stable. Permanent components start
    from the largest component minus every opposite-status candidate and
    drop states that some induced chain can lead outside. A final pass
    against the union of disjoint candidates catches states whose mass
    splits between several BSCCs.
    """
    graph = graph or ProductGraph(product)
    n = graph.n
    acc = bsccs.acc_potential + bsccs.acc_permanent
    nonacc = bsccs.nonacc_potential + bsccs.nonacc_permanent
    wc_largest, wc_perm, w_acc = _side(
        graph, bsccs.acc_potential, bsccs.acc_permanent, nonacc
    )
    lc_largest, lc_perm, w_nonacc = _side(
        graph, bsccs.nonacc_potential, bsccs.nonacc_permanent, acc
    )
    wc_potential = wc_largest & ~wc_perm
    lc_potential = lc_largest & ~lc_perm

    potential = bsccs.acc_potential + bsccs.nonacc_potential
    n_acc = len(bsccs.acc_potential)
    basins = w_acc + w_nonacc
    reach = []
    for states in potential:
        target = np.zeros(n, dtype=bool)
        target[states] = True
        reach.append(graph.at_permanent(target, np.ones(n, dtype=bool)))

    owners: dict[int, tuple[int, ...]] = {}
    for q in np.flatnonzero(wc_potential | lc_potential).tolist():
        statuses = []
        if wc_potential[q]:
            statuses.append(range(n_acc))
        if lc_potential[q]:
            statuses.append(range(n_acc, len(potential)))
        same = [k for ks in statuses for k in ks]
        found = [k for k in same if basins[k][q]]
        if not found:
            found = [k for k in same if reach[k][q]]
        if not found:
            found = [k for k in range(len(potential)) if reach[k][q]]
        owners[q] = tuple(sorted(set(found)))

    overlap = wc_perm & lc_perm
    if overlap.any():
        logger.error(
            "Permanent winning and losing components share %d states",
            int(overlap.sum()),
        )
    logger.debug(
        "Components: wc %d/%d, lc %d/%d (potential/permanent)",
        int(wc_potential.sum()),
        int(wc_perm.sum()),
        int(lc_potential.sum()),
        int(lc_perm.sum()),
    )
    return ComponentSets(
        bscc_acc_potential=bsccs.acc_potential,
        bscc_acc_permanent=bsccs.acc_permanent,
        bscc_nonacc_potential=bsccs.nonacc_potential,
        bscc_nonacc_permanent=bsccs.nonacc_permanent,
        wc_potential=wc_potential,
        wc_permanent=wc_perm,
        lc_potential=lc_potential,
        lc_permanent=lc_perm,
        owners=owners,
    )
