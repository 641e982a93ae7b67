"""
IMC abstraction of a mixed-monotone stochastic system over a rectangular
partition.

For a source cell Q_j the reachable set of F is over-approximated by the box
R_j = [g(a_j, b_j), g(b_j, a_j)]. The probability of landing in a target cell
Q_ℓ is a product over dimensions of F_w(b − s) − F_w(a − s) for some shift
s ∈ R_j; the lower bound places s at the endpoint of R_j farthest from the
mass-maximising shift and the upper bound clamps that shift into R_j.

When boundary clipping is on, mass leaving the domain is clamped back onto
its faces, so target cells touching the boundary integrate to ±∞ on that
side.
"""

import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .chains import IMC, aligned_bounds
from .disturbances import Disturbance
from .exceptions import ModelError
from .geometry import Partition, Rect
from .systems import SystemModel

logger = logging.getLogger(__name__)

REACH_TOL = 1e-12
BLOCK_ROWS = 64


@dataclass(frozen=True)
class ShiftBounds:
    r_lo: np.ndarray
    r_hi: np.ndarray
    s_center: np.ndarray
    s_max_shift: np.ndarray
    s_min_shift: np.ndarray


def reach_overapprox(model: SystemModel, rect: Rect) -> Rect:
    """Box [g(a, b), g(b, a)] containing F(rect)."""
    lo, hi = _reach_arrays(
        model, np.array([rect.lower], dtype=float), np.array([rect.upper], dtype=float)
    )
    return Rect(tuple(lo[0]), tuple(hi[0]))


def _reach_arrays(
    model: SystemModel, lowers: np.ndarray, uppers: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    r_lo = np.asarray(model.decomposition(lowers, uppers), dtype=float)
    r_hi = np.asarray(model.decomposition(uppers, lowers), dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(r_lo), np.abs(r_hi)))
    bad = r_lo > r_hi + REACH_TOL * scale
    if bad.any():
        j, i = (int(v) for v in np.argwhere(bad)[0])
        raise ModelError(
            f"decomposition is inconsistent on cell {j}: "
            f"g(a, b)[{i}] = {r_lo[j, i]!r} > g(b, a)[{i}] = {r_hi[j, i]!r}"
        )
    return r_lo, np.maximum(r_lo, r_hi)


def optimal_shifts(s_center, r_lo, r_hi):
    """
    Mass-maximising and mass-minimising shifts within [r_lo, r_hi].

    The maximiser is `s_center` clamped into the range; the minimiser is the
    endpoint farthest from `s_center` (r_lo on ties).
    """
    s_center = np.asarray(s_center, dtype=float)
    r_lo = np.asarray(r_lo, dtype=float)
    r_hi = np.asarray(r_hi, dtype=float)
    s_max = np.clip(s_center, r_lo, r_hi)
    mid = r_lo + (r_hi - r_lo) / 2
    s_min = np.where(s_center < mid, r_hi, r_lo)
    if s_max.ndim == 0:
        return float(s_max), float(s_min)
    return s_max, s_min


def shifted_mass(
    dist: Disturbance, a, b, s, clip_lo=False, clip_hi=False
) -> np.ndarray:
    """
    F_w(b − s) − F_w(a − s) for one disturbance component.

    `clip_lo` drops the lower term (mass below a is clamped onto the cell);
    `clip_hi` replaces the upper term by 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = np.asarray(s, dtype=float)
    upper = np.where(clip_hi, 1.0, dist.cdf(b - s))
    lower = np.where(clip_lo, 0.0, dist.cdf(a - s))
    mass = np.clip(upper - lower, 0.0, 1.0)
    return float(mass) if mass.ndim == 0 else mass


def _clip_flags(model: SystemModel, lowers: np.ndarray, uppers: np.ndarray):
    if not model.boundary_clipping:
        no = np.zeros_like(lowers, dtype=bool)
        return no, no
    scale = np.asarray(model.domain.widths) * 1e-9
    clip_lo = lowers <= np.asarray(model.domain.lower) + scale
    clip_hi = uppers >= np.asarray(model.domain.upper) - scale
    return clip_lo, clip_hi


def _shift_centers(model: SystemModel, lowers, uppers, clip_lo, clip_hi) -> np.ndarray:
    centers = (lowers + uppers) / 2 - model.disturbance.modes
    centers = np.where(clip_lo & ~clip_hi, -np.inf, centers)
    return np.where(clip_hi & ~clip_lo, np.inf, centers)


def shift_bounds(model: SystemModel, source: Rect, target: Rect) -> ShiftBounds:
    lowers = np.array([target.lower], dtype=float)
    uppers = np.array([target.upper], dtype=float)
    reach = reach_overapprox(model, source)
    clip_lo, clip_hi = _clip_flags(model, lowers, uppers)
    s_center = _shift_centers(model, lowers, uppers, clip_lo, clip_hi)[0]
    s_max, s_min = optimal_shifts(s_center, reach.lower, reach.upper)
    return ShiftBounds(
        r_lo=np.asarray(reach.lower),
        r_hi=np.asarray(reach.upper),
        s_center=s_center,
        s_max_shift=s_max,
        s_min_shift=s_min,
    )


class _Geometry:
    """Per-partition arrays shared by every block evaluation."""

    def __init__(self, model: SystemModel, partition: Partition):
        if partition.dim != model.dim:
            raise ModelError(
                f"partition is {partition.dim}-dimensional, "
                f"model is {model.dim}-dimensional"
            )
        self.model = model
        self.lowers = partition.lowers
        self.uppers = partition.uppers
        self.r_lo, self.r_hi = _reach_arrays(model, self.lowers, self.uppers)
        self.clip_lo, self.clip_hi = _clip_flags(model, self.lowers, self.uppers)
        self.s_center = _shift_centers(
            model, self.lowers, self.uppers, self.clip_lo, self.clip_hi
        )

    def block(self, sources: np.ndarray, targets: np.ndarray):
        """Dense (len(sources), len(targets)) lower and upper bounds."""
        lower = np.ones((sources.size, targets.size))
        upper = np.ones((sources.size, targets.size))
        for i, dist in enumerate(self.model.disturbance.components):
            a = self.lowers[targets, i][None, :]
            b = self.uppers[targets, i][None, :]
            c_lo = self.clip_lo[targets, i][None, :]
            c_hi = self.clip_hi[targets, i][None, :]
            s_max, s_min = optimal_shifts(
                self.s_center[targets, i][None, :],
                self.r_lo[sources, i][:, None],
                self.r_hi[sources, i][:, None],
            )
            upper = upper * shifted_mass(dist, a, b, s_max, c_lo, c_hi)
            lower = lower * shifted_mass(dist, a, b, s_min, c_lo, c_hi)
        return np.minimum(lower, upper), upper


def transition_bounds(
    model: SystemModel, rect_j: Rect, rect_l: Rect
) -> tuple[float, float]:
    """Lower and upper probability of moving from `rect_j` into `rect_l` in one step."""
    bounds = shift_bounds(model, rect_j, rect_l)
    lowers = np.array([rect_l.lower], dtype=float)
    uppers = np.array([rect_l.upper], dtype=float)
    clip_lo, clip_hi = _clip_flags(model, lowers, uppers)
    lower = upper = 1.0
    for i, dist in enumerate(model.disturbance.components):
        args = (rect_l.lower[i], rect_l.upper[i])
        flags = (clip_lo[0, i], clip_hi[0, i])
        upper *= shifted_mass(dist, *args, bounds.s_max_shift[i], *flags)
        lower *= shifted_mass(dist, *args, bounds.s_min_shift[i], *flags)
    return min(lower, upper), upper


def _triplets(geometry: _Geometry, sources: np.ndarray, targets: np.ndarray):
    lower, upper = geometry.block(sources, targets)
    r, c = np.nonzero(upper > 0)
    return sources[r], targets[c], lower[r, c], upper[r, c]


def _evaluate(
    geometry: _Geometry, sources: np.ndarray, targets: np.ndarray, n_jobs: int
):
    chunks = [sources[k : k + BLOCK_ROWS] for k in range(0, sources.size, BLOCK_ROWS)]
    if not chunks or targets.size == 0:
        empty = np.zeros(0)
        return empty.astype(np.int64), empty.astype(np.int64), empty, empty
    if len(chunks) == 1 or n_jobs == 1:
        parts = [_triplets(geometry, chunk, targets) for chunk in chunks]
    else:
        parts = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_triplets)(geometry, chunk, targets) for chunk in chunks
        )
    return tuple(np.concatenate(column) for column in zip(*parts))


def _jobs(threads: int) -> int:
    return -1 if threads <= 0 else threads


def build_imc(model: SystemModel, partition: Partition, threads: int = 0) -> IMC:
    """
    Abstract `model` over every cell pair of `partition`.

    Raises ModelError if some row violates Σ Ť ≤ 1 ≤ Σ T̂.
    """
    geometry = _Geometry(model, partition)
    cells = np.arange(partition.n_cells)
    rows, cols, lo, hi = _evaluate(geometry, cells, cells, _jobs(threads))
    imc = IMC.from_triplets(
        partition.n_cells, rows, cols, lo, hi, partition.cell_props, partition.cells
    )
    logger.info(
        "Built IMC over %d cells with %d transitions", partition.n_cells, imc.upper.nnz
    )
    return imc


def update_imc(
    imc: IMC,
    model: SystemModel,
    partition: Partition,
    changed_cells,
    threads: int = 0,
) -> IMC:
    """
    Recompute the rows of changed cells and the columns into them.

    Cells of `partition` not listed in `changed_cells` must keep the index and
    geometry they had in `imc`; their mutual bounds are copied unchanged.
    """
    changed = np.unique(np.asarray(list(changed_cells), dtype=np.int64))
    if changed.size == 0 and partition.n_cells == imc.n_states:
        return imc
    n = partition.n_cells
    if changed.size and (changed.min() < 0 or changed.max() >= n):
        raise ModelError(f"changed cells out of range for {n} cells")
    is_changed = np.zeros(n, dtype=bool)
    is_changed[changed] = True
    is_changed[imc.n_states :] = True
    changed = np.flatnonzero(is_changed)
    unchanged = np.flatnonzero(~is_changed)

    rows, cols, lo, hi = imc.triplets()
    old_changed = np.zeros(imc.n_states, dtype=bool)
    old_changed[: min(n, imc.n_states)] = is_changed[: min(n, imc.n_states)]
    if imc.n_states > n:
        raise ModelError("a partition update cannot remove cells")
    keep = ~old_changed[rows] & ~old_changed[cols]

    geometry = _Geometry(model, partition)
    jobs = _jobs(threads)
    all_cells = np.arange(n)
    new_rows = _evaluate(geometry, changed, all_cells, jobs)
    new_cols = _evaluate(geometry, unchanged, changed, jobs)
    parts = [(rows[keep], cols[keep], lo[keep], hi[keep]), new_rows, new_cols]
    r, c, lower, upper = (np.concatenate(column) for column in zip(*parts))
    lower_m, upper_m = aligned_bounds(n, r, c, lower, upper)
    updated = IMC(lower_m, upper_m, partition.cell_props, partition.cells)
    logger.info(
        "Updated IMC: %d changed cells, %d total, %d transitions",
        changed.size,
        n,
        updated.upper.nnz,
    )
    return updated
