"""
Single-pass verification of an IMC against P⋈p[Ψ] with Ψ given by a DRA.

Pipeline: product construction, pruning to states reachable from the
initial states, bound tightening, component analysis, two maximal
reachability solves, classification of every IMC state.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .automata import DRA
from .chains import IMC, ProductIMC, Spec, aligned_bounds
from .components import ComponentSets, ProductGraph, find_bsccs, find_components
from .models import StateClass
from .reachability import (
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    ExtremalChain,
    extremal_product_mcs,
)

logger = logging.getLogger(__name__)

CLAMP_WARN = 1e-7


def build_product(imc: IMC, dra: DRA) -> ProductIMC:
    """
    Product of `imc` with `dra`: state ⟨Q_j, s⟩ has index j·|S| + s.

    Moving to cell Q_ℓ takes the automaton from s to δ(s, L(Q_ℓ)); the
    transition bounds are those of (Q_j, Q_ℓ). Raises APMismatchError when a
    cell carries a proposition the automaton does not declare.
    """
    m, k = imc.n_states, dra.n_states
    masks = np.array([dra.valuation_mask(props) for props in imc.props], dtype=np.int64)
    successor = dra.table[:, masks]  # (k, m)

    rows, cols, lo, hi = imc.triplets()
    p_rows, p_cols = [], []
    for s in range(k):
        p_rows.append(rows * k + s)
        p_cols.append(cols * k + successor[s, cols])
    n = m * k
    lower, upper = aligned_bounds(
        n,
        np.concatenate(p_rows),
        np.concatenate(p_cols),
        np.tile(lo, k),
        np.tile(hi, k),
    )

    pairs = np.column_stack([np.repeat(np.arange(m), k), np.tile(np.arange(k), m)])
    automaton_state = pairs[:, 1]
    in_fin = np.column_stack(
        [np.isin(automaton_state, sorted(p.fin)) for p in dra.rabin_pairs]
    )
    in_inf = np.column_stack(
        [np.isin(automaton_state, sorted(p.inf)) for p in dra.rabin_pairs]
    )
    return ProductIMC(
        lower=lower,
        upper=upper,
        pairs=pairs,
        in_fin=in_fin,
        in_inf=in_inf,
        initial=np.arange(m, dtype=np.int64) * k + dra.initial,
        n_cells=m,
        n_automaton_states=k,
        cell_props=imc.props,
    )


def classify(p_min: float, p_max: float, spec: Spec) -> StateClass:
    """
    Decide a state from its satisfaction interval.

    For ≤ and ≥ the state is undecided when p_sat lies strictly inside
    (p_min, p_max); for < and > when it lies in the closed interval.
    """
    p_sat = spec.p_sat
    if spec.comparison.is_strict:
        undecided = p_min <= p_sat <= p_max
    else:
        undecided = p_min < p_sat < p_max
    if undecided:
        return StateClass.UNDECIDED
    if spec.comparison.holds(p_min, p_sat) and spec.comparison.holds(p_max, p_sat):
        return StateClass.YES
    return StateClass.NO


@dataclass(frozen=True, eq=False)
class VerificationResult:
    spec: Spec
    p_min: np.ndarray
    p_max: np.ndarray
    classes: tuple[StateClass, ...]
    product: ProductIMC
    components: ComponentSets
    upper: ExtremalChain
    lower: ExtremalChain

    @property
    def n_states(self) -> int:
        return len(self.classes)

    @property
    def iterations(self) -> int:
        return max(self.upper.value.iterations, self.lower.value.iterations)

    def states_of(self, state_class: StateClass) -> np.ndarray:
        return np.array(
            [j for j, c in enumerate(self.classes) if c == state_class], dtype=np.int64
        )

    def counts(self) -> dict[str, int]:
        return {c.value: sum(1 for x in self.classes if x == c) for c in StateClass}

    @property
    def initial_states(self) -> np.ndarray:
        """Product index of ⟨Q_j, s0⟩ for every IMC state j."""
        return self.product.initial


def _clamp(name: str, values: np.ndarray) -> np.ndarray:
    excess = float(np.max(np.maximum(values - 1.0, -values), initial=0.0))
    if excess > CLAMP_WARN:
        logger.warning("%s left [0, 1] by %.3g before clamping", name, excess)
    return np.clip(values, 0.0, 1.0)


def analyse_product(
    product: ProductIMC,
) -> tuple[ProductIMC, ProductGraph, ComponentSets]:
    """Prune, tighten and run the component analysis on a raw product."""
    keep = product.reachable_from_initial()
    pruned = product.restrict(keep).tightened()
    logger.debug(
        "Product: %d states, %d reachable from initial states",
        product.n_states,
        pruned.n_states,
    )
    graph = ProductGraph(pruned)
    bsccs = find_bsccs(pruned, graph)
    return pruned, graph, find_components(pruned, bsccs, graph)


def verify(
    imc: IMC,
    dra: DRA,
    spec: Spec,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> VerificationResult:
    """
    Bound and classify every IMC state.

    p_max(Q_j) is the best-case probability of reaching the winning
    components from ⟨Q_j, s0⟩; p_min(Q_j) is one minus the best-case
    probability of reaching the losing components.
    """
    product, graph, components = analyse_product(build_product(imc, dra))
    upper, lower = extremal_product_mcs(product, components, tol, max_iters, graph)

    initial = product.initial
    p_max = _clamp("p_max", upper.value.values[initial])
    p_min = _clamp("p_min", 1.0 - lower.value.values[initial])
    crossed = p_min - p_max
    if crossed.size and crossed.max() > CLAMP_WARN:
        logger.warning("p_min exceeds p_max by %.3g; clamping", float(crossed.max()))
    p_min = np.minimum(p_min, p_max)

    classes = tuple(
        classify(lo, hi, spec) for lo, hi in zip(p_min.tolist(), p_max.tolist())
    )
    result = VerificationResult(
        spec=spec,
        p_min=p_min,
        p_max=p_max,
        classes=classes,
        product=product,
        components=components,
        upper=upper,
        lower=lower,
    )
    logger.info(
        "Verified %s on %d states: %s",
        spec,
        imc.n_states,
        ", ".join(f"{k}={v}" for k, v in result.counts().items()),
    )
    return result
