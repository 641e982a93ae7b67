"""
Specification-guided refinement of the partition.

Each round abstracts the current partition, verifies it, and, while the
undecided volume is above the target, scores cells by exploring the
best-case product chain from every undecided state and splits the
highest-scoring cells in half.
"""

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .abstraction import build_imc, update_imc
from .automata import DRA
from .chains import IMC, ZERO_TOL, ProductIMC, Spec
from .components import ComponentSets
from .exceptions import ConfigError, PartitionError
from .geometry import Partition, split_rect, uncertain_volume
from .models import RefinementStrategy, RunStatus, StateClass
from .reachability import DEFAULT_MAX_ITERS, DEFAULT_TOL, ExtremalChain
from .systems import SystemModel
from .verifier import VerificationResult, verify

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefinementConfig:
    v_stop: float = 0.1
    p_stop: float = 1e-4
    theta: float = 0.1
    max_rounds: int = 20
    max_cells: int = 5000
    strategy: RefinementStrategy = RefinementStrategy.SCORED
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    threads: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", RefinementStrategy(self.strategy))
        if not 0.0 <= self.v_stop <= 1.0:
            raise ConfigError(f"v_stop must lie in [0, 1], got {self.v_stop}")
        if not 0.0 < self.p_stop < 1.0:
            raise ConfigError(f"p_stop must lie in (0, 1), got {self.p_stop}")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError(f"theta must lie in (0, 1], got {self.theta}")
        if self.max_rounds < 0 or self.max_cells < 1:
            raise ConfigError("max_rounds must be ≥ 0 and max_cells ≥ 1")


# ── Scoring ─────────────────────────────────────────────────────────────────


def ambiguous_states(product: ProductIMC) -> np.ndarray:
    """States with an outgoing edge whose lower bound is 0 and upper bound positive."""
    counts = np.diff(product.upper.indptr)
    rows = np.repeat(np.arange(product.n_states), counts)
    flag = (product.lower.data <= ZERO_TOL) & (product.upper.data > ZERO_TOL)
    return np.bincount(rows[flag], minlength=product.n_states) > 0


def score_states(
    product: ProductIMC,
    upper: ExtremalChain,
    lower: ExtremalChain,
    components: ComponentSets,
    undecided_states,
    p_stop: float,
) -> np.ndarray:
    """
    Refinement score per IMC state.

    From ⟨Q_ℓ, s0⟩ of every undecided Q_ℓ, paths of the best-case chain are
    explored depth first (successors in ascending index, no state repeated
    on a path) until their probability falls below `p_stop`. A state in a
    potential component credits P(π)·(p_max − p_min) to every state of its
    owning potential BSCCs that has an ambiguous outgoing edge, and the path
    stops; a permanent-component state stops the path; any other state,
    including a potential one that no potential BSCC owns, credits its own
    cell and the path continues.
    """
    scores = np.zeros(product.n_cells)
    gap = np.clip(upper.value.values - (1.0 - lower.value.values), 0.0, None)
    potential = components.potential
    permanent = components.permanent
    ambiguous = ambiguous_states(product)
    cells = product.pairs[:, 0]
    owned = [
        states[ambiguous[states]] for states in components.potential_bsccs
    ]
    matrix = upper.mc.matrix
    succ_cache: dict[int, tuple[list[int], list[float]]] = {}

    def successors(q):
        if q not in succ_cache:
            start, end = matrix.indptr[q], matrix.indptr[q + 1]
            probs = matrix.data[start:end]
            keep = probs > 0
            succ_cache[q] = (
                matrix.indices[start:end][keep].tolist(),
                probs[keep].tolist(),
            )
        return succ_cache[q]

    def visit(q: int, prob: float) -> bool:
        """Credit `q`; True if the path continues past it."""
        if potential[q] and components.owners.get(q):
            credit = prob * gap[q]
            for b in components.owners.get(q, ()):
                np.add.at(scores, cells[owned[b]], credit)
            return False
        if permanent[q]:
            return False
        scores[cells[q]] += prob * gap[q]
        return True

    for j in sorted(int(j) for j in undecided_states):
        root = int(product.initial[j])
        if not visit(root, 1.0):
            continue
        on_path = {root}
        stack = [(root, 1.0, 0)]
        while stack:
            q, prob, k = stack[-1]
            targets, probs = successors(q)
            while k < len(targets):
                nxt, p = targets[k], probs[k]
                k += 1
                path_prob = prob * p
                if nxt in on_path or path_prob < p_stop:
                    continue
                if visit(nxt, path_prob):
                    stack[-1] = (q, prob, k)
                    stack.append((nxt, path_prob, 0))
                    on_path.add(nxt)
                    break
            else:
                stack.pop()
                on_path.discard(q)
    return scores


# ── Splitting ───────────────────────────────────────────────────────────────


class SplitResult(NamedTuple):
    partition: Partition
    changed: list[int]
    parents: np.ndarray


def select_and_split(
    partition: Partition, scores, theta: float, limit: int | None = None
) -> SplitResult:
    """
    Split every cell scoring at least θ·max(σ) (and above zero).

    At most `limit` cells are split, highest scores first and ties by index.
    The lower half keeps the parent's index, the upper half is appended.
    Cells too small to split are skipped with a warning. `parents` maps each
    new cell to the index of the cell it came from.
    """
    scores = np.asarray(scores, dtype=float)
    n = partition.n_cells
    parents = np.arange(n, dtype=np.int64)
    top = float(scores.max()) if scores.size else 0.0
    if top <= 0:
        return SplitResult(partition, [], parents)
    selected = np.flatnonzero((scores >= theta * top) & (scores > 0))
    if limit is not None and selected.size > limit:
        ranked = selected[np.argsort(-scores[selected], kind="stable")]
        selected = np.sort(ranked[: max(limit, 0)])

    cells = list(partition.cells)
    props = list(partition.cell_props)
    split, appended = [], []
    for j in selected.tolist():
        try:
            low, high = split_rect(cells[j])
        except PartitionError as exc:
            logger.warning("Skipping cell %d: %s", j, exc)
            continue
        cells[j] = low
        cells.append(high)
        props.append(props[j])
        split.append(j)
        appended.append(len(cells) - 1)
    parents = np.concatenate([parents, np.array(split, dtype=np.int64)])
    return SplitResult(partition.with_cells(cells, props), split + appended, parents)


# ── Loop ────────────────────────────────────────────────────────────────────


@dataclass(eq=False)
class RoundRecord:
    index: int
    partition: Partition
    imc: IMC
    result: VerificationResult
    uncertain_volume: float
    elapsed: float
    soundness_violations: int = 0

    @property
    def n_cells(self) -> int:
        return self.partition.n_cells

    @property
    def counts(self) -> dict[str, int]:
        return self.result.counts()

    def log_line(self) -> str:
        return (
            f"round={self.index} cells={self.n_cells} "
            f"uncertain_volume={self.uncertain_volume:.6f} elapsed={self.elapsed:.3f}"
        )


@dataclass(eq=False)
class RefinementOutcome:
    status: RunStatus
    history: list[RoundRecord] = field(default_factory=list)

    @property
    def final(self) -> RoundRecord:
        return self.history[-1]

    @property
    def partition(self) -> Partition:
        return self.final.partition

    @property
    def soundness_violations(self) -> int:
        return sum(r.soundness_violations for r in self.history)


def _flips(previous: tuple, current: tuple, parents: np.ndarray) -> int:
    decided = {StateClass.YES, StateClass.NO}
    flips = 0
    for i, cls in enumerate(current):
        before = previous[parents[i]]
        if cls in decided and before in decided and cls != before:
            flips += 1
    return flips


def refine_loop(
    model: SystemModel,
    partition: Partition,
    dra: DRA,
    spec: Spec,
    config: RefinementConfig,
    on_round: Callable[[RoundRecord], None] | None = None,
) -> RefinementOutcome:
    """
    Abstract, verify and refine until the undecided volume reaches v_stop.

    Ends with status converged, max_rounds, max_cells (checked before a
    split) or stalled (no cell could be split). A round never splits more
    cells than max_cells leaves room for.
    """
    outcome = RefinementOutcome(status=RunStatus.RUNNING)
    imc = None
    changed: list[int] = []
    parents = np.arange(partition.n_cells, dtype=np.int64)
    previous = None
    index = 0
    while True:
        started = time.perf_counter()
        if imc is None:
            imc = build_imc(model, partition, config.threads)
        else:
            imc = update_imc(imc, model, partition, changed, config.threads)
        result = verify(imc, dra, spec, config.tol, config.max_iters)
        volume = uncertain_volume(partition, result.classes)
        flips = _flips(previous, result.classes, parents) if previous is not None else 0
        if flips:
            logger.error("Round %d: %d cells flipped between yes and no", index, flips)

        status = None
        if volume <= config.v_stop:
            status = RunStatus.CONVERGED
        elif index >= config.max_rounds:
            status = RunStatus.MAX_ROUNDS
        elif partition.n_cells >= config.max_cells:
            status = RunStatus.MAX_CELLS
        else:
            undecided = result.states_of(StateClass.UNDECIDED)
            if config.strategy == RefinementStrategy.SCORED:
                scores = score_states(
                    result.product,
                    result.upper,
                    result.lower,
                    result.components,
                    undecided,
                    config.p_stop,
                )
            else:
                scores = np.zeros(partition.n_cells)
                scores[undecided] = 1.0
            split = select_and_split(
                partition,
                scores,
                config.theta,
                limit=config.max_cells - partition.n_cells,
            )
            if not split.changed:
                status = RunStatus.STALLED

        record = RoundRecord(
            index=index,
            partition=partition,
            imc=imc,
            result=result,
            uncertain_volume=volume,
            elapsed=time.perf_counter() - started,
            soundness_violations=flips,
        )
        outcome.history.append(record)
        logger.info(record.log_line())
        if on_round is not None:
            on_round(record)
        if status is not None:
            outcome.status = status
            logger.info(
                "Refinement finished after %d round(s): %s", index + 1, status.label
            )
            return outcome

        previous = result.classes
        partition, changed, parents = split
        index += 1
