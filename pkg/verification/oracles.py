"""
Independent ground truth for the engine: brute-force enumeration of vertex
induced chains, exact Markov chain solves, Monte Carlo simulation of the
continuous system and numerical quadrature of disturbance masses.

Everything here is brute force and only meant for small instances.
"""

import itertools
import logging
import math
import warnings
from collections.abc import Iterator

import numpy as np
from scipy import integrate, sparse

from .chains import ZERO_TOL, ProductIMC
from .components import tarjan_scc
from .disturbances import Disturbance, DisturbanceSpec
from .exceptions import OracleError
from .geometry import Partition
from .reachability import InducedMC
from .systems import SystemModel

logger = logging.getLogger(__name__)

MAX_STATES = 6
MAX_MCS = 200_000
LATTICE = 4
WINNING_TOL = 1e-9
VERTEX_TOL = 1e-12


# ── Vertex adversaries ──────────────────────────────────────────────────────


def vertex_rows(lower, upper) -> list[np.ndarray]:
    """
    Distinct extreme points of {p : lower ≤ p ≤ upper, Σp = 1}.

    Every vertex has all entries but one at a bound; each free entry and
    each lower/upper choice for the rest is tried, and the free entry takes
    the remaining mass when that fits its own bounds.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.size
    seen: dict[tuple, np.ndarray] = {}
    for free in range(n):
        others = [k for k in range(n) if k != free]
        for at_upper in itertools.product((False, True), repeat=n - 1):
            row = np.empty(n)
            row[others] = np.where(at_upper, upper[others], lower[others])
            rest = 1.0 - row[others].sum()
            if not lower[free] - VERTEX_TOL <= rest <= upper[free] + VERTEX_TOL:
                continue
            row[free] = min(max(rest, lower[free]), upper[free])
            seen.setdefault(tuple(np.round(row, 12)), row)
    return [seen[key] for key in sorted(seen)]


def _check_lattice(values: np.ndarray, lattice: int) -> None:
    scaled = values * lattice
    if np.any(np.abs(scaled - np.round(scaled)) > 1e-9):
        raise OracleError(f"bounds are not multiples of 1/{lattice}")


def enumerate_vertex_mcs(
    product: ProductIMC,
    max_states: int = MAX_STATES,
    max_mcs: int = MAX_MCS,
    lattice: int | None = LATTICE,
) -> Iterator[InducedMC]:
    """
    Every induced chain whose rows are vertices of their row polytopes.

    Raises OracleError when the product exceeds `max_states`, when its bounds
    are off the 1/`lattice` grid, or when more than `max_mcs` chains would be
    produced.
    """
    n = product.n_states
    if n > max_states:
        raise OracleError(f"{n} states exceed the enumeration limit of {max_states}")
    if lattice is not None:
        _check_lattice(product.lower.data, lattice)
        _check_lattice(product.upper.data, lattice)
    choices = []
    for q in range(n):
        _, lo, hi = product.row(q)
        choices.append(vertex_rows(lo, hi))
    total = math.prod(len(c) for c in choices)
    if total > max_mcs:
        raise OracleError(f"{total} vertex chains exceed the limit of {max_mcs}")
    indices = product.upper.indices.copy()
    indptr = product.upper.indptr.copy()
    for combo in itertools.product(*choices):
        data = np.concatenate(combo) if combo else np.zeros(0)
        yield InducedMC(sparse.csr_matrix((data, indices, indptr), shape=(n, n)))


# ── Exact chain analysis ────────────────────────────────────────────────────


def _support(mc: InducedMC) -> sparse.csr_matrix:
    matrix = mc.matrix.copy()
    matrix.data = np.where(matrix.data > ZERO_TOL, matrix.data, 0.0)
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix


def mc_bsccs(mc: InducedMC) -> list[np.ndarray]:
    """Bottom strongly connected components of the chain's positive support."""
    support = _support(mc)
    bottoms = []
    for component in tarjan_scc(support.indptr, support.indices):
        inside = np.zeros(mc.n_states, dtype=bool)
        inside[component] = True
        successors = support[component].indices
        if inside[successors].all():
            bottoms.append(component)
    return bottoms


def mc_exact_reach(mc: InducedMC, target) -> np.ndarray:
    """
    Probability of eventually reaching `target` from every state.

    Raises OracleError if the linear system is singular.
    """
    n = mc.n_states
    target_mask = np.zeros(n, dtype=bool)
    target_mask[np.fromiter(target, dtype=np.int64)] = True
    support = _support(mc)

    can_reach = target_mask.copy()
    reverse = support.T.tocsr()
    frontier = np.flatnonzero(target_mask)
    while frontier.size:
        preds = np.unique(np.concatenate([reverse[q].indices for q in frontier]))
        frontier = preds[~can_reach[preds]]
        can_reach[frontier] = True

    result = target_mask.astype(float)
    transient = np.flatnonzero(can_reach & ~target_mask)
    if transient.size == 0:
        return result
    dense = mc.matrix.toarray()
    system = np.eye(transient.size) - dense[np.ix_(transient, transient)]
    rhs = dense[np.ix_(transient, np.flatnonzero(target_mask))].sum(axis=1)
    try:
        result[transient] = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"singular reachability system: {exc}") from exc
    return np.clip(result, 0.0, 1.0)


def mc_acceptance(mc: InducedMC, product: ProductIMC) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities of reaching accepting and non-accepting BSCCs."""
    accepting, rejecting = [], []
    for bottom in mc_bsccs(mc):
        target = accepting if product.is_accepting(bottom) else rejecting
        target.extend(bottom.tolist())
    return mc_exact_reach(mc, accepting), mc_exact_reach(mc, rejecting)


def vertex_bounds(product: ProductIMC, **guards) -> tuple[np.ndarray, np.ndarray]:
    """Min and max acceptance probability over vertex chains, per initial state."""
    p_min = np.ones(product.initial.size)
    p_max = np.zeros(product.initial.size)
    for mc in enumerate_vertex_mcs(product, **guards):
        win, _ = mc_acceptance(mc, product)
        p_min = np.minimum(p_min, win[product.initial])
        p_max = np.maximum(p_max, win[product.initial])
    return p_min, p_max


def vertex_components(product: ProductIMC, **guards) -> dict[str, np.ndarray]:
    """
    Winning / losing states in some (largest) and every (permanent) vertex chain.

    A state wins in a chain when it reaches accepting BSCCs with probability 1.
    """
    n = product.n_states
    wc_some = np.zeros(n, dtype=bool)
    lc_some = np.zeros(n, dtype=bool)
    wc_all = np.ones(n, dtype=bool)
    lc_all = np.ones(n, dtype=bool)
    for mc in enumerate_vertex_mcs(product, **guards):
        win, lose = mc_acceptance(mc, product)
        wins = win >= 1.0 - WINNING_TOL
        loses = lose >= 1.0 - WINNING_TOL
        wc_some |= wins
        lc_some |= loses
        wc_all &= wins
        lc_all &= loses
    return {
        "wc_largest": wc_some,
        "wc_permanent": wc_all,
        "lc_largest": lc_some,
        "lc_permanent": lc_all,
    }


# ── Continuous system ───────────────────────────────────────────────────────


def simulate(
    model: SystemModel,
    x0,
    horizon: int,
    rng_seed: int = 0,
    n_traj: int = 1,
) -> np.ndarray:
    """
    Sample trajectories of x[k+1] = clamp(F(x[k]) + w[k], D).

    Returns an array of shape (n_traj, horizon + 1, n).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.dim,) or not model.domain.contains_point(x0):
        raise OracleError(
            f"initial state {x0.tolist()} is not a point of {model.domain}"
        )
    rng = np.random.default_rng(rng_seed)
    states = np.empty((n_traj, horizon + 1, model.dim))
    states[:, 0] = x0
    for k in range(horizon):
        w = model.disturbance.sample(rng, n_traj)
        states[:, k + 1] = model.step(states[:, k], w)
    return states


def locate(partition: Partition, points) -> np.ndarray:
    """
    Index of the cell containing each point (-1 outside the domain).

    Cells are half-open [lo, hi) except on the upper faces of the domain.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lowers, uppers = partition.lowers, partition.uppers
    top = uppers >= np.asarray(partition.domain.upper)
    pts = points[:, None, :]
    inside = (pts >= lowers) & ((pts < uppers) | (top & (pts <= uppers)))
    hit = inside.all(axis=2)
    return np.where(hit.any(axis=1), hit.argmax(axis=1), -1)


def empirical_transitions(
    model: SystemModel,
    partition: Partition,
    x,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Observed frequency of landing in each cell after one step from `x`."""
    x = np.asarray(x, dtype=float)
    w = model.disturbance.sample(rng, n_samples)
    landed = locate(partition, model.step(np.broadcast_to(x, w.shape), w))
    counts = np.bincount(landed[landed >= 0], minlength=partition.n_cells)
    return counts / n_samples


# ── Quadrature ──────────────────────────────────────────────────────────────


def quadrature_mass(dist, dim: int, a: float, b: float, s: float) -> float:
    """
    ∫_a^b f(x − s) dx by adaptive quadrature (absolute tolerance 1e-10).

    `dist` is a DisturbanceSpec (component `dim` is used) or a single
    component. Raises OracleError when the integrator reports trouble.
    """
    component: Disturbance = dist[dim] if isinstance(dist, DisturbanceSpec) else dist
    if component.is_degenerate:
        return 1.0 if a < component.mode + s <= b else 0.0
    lo = max(a, component.low + s)
    hi = min(b, component.high + s)
    if hi <= lo:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(
                lambda x: float(component.pdf(x - s)),
                lo,
                hi,
                points=[component.mode + s] if lo < component.mode + s < hi else None,
                epsabs=1e-10,
                epsrel=1e-10,
                limit=200,
            )
        except integrate.IntegrationWarning as exc:
            raise OracleError(f"quadrature did not converge: {exc}") from exc
    return float(value)
