"""
Axis-aligned rectangles and rectangular partitions of the state-space domain.

A partition is an ordered list of cells covering the domain with pairwise
disjoint interiors; every cell carries the proposition set of the labeled
region it lies in.
"""

import itertools
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import PartitionError
from .models import StateClass

logger = logging.getLogger(__name__)

REL_TOL = 1e-9


@dataclass(frozen=True)
class Rect:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if not lower or len(lower) != len(upper):
            raise PartitionError(
                "rectangle bounds must be nonempty and of equal length: "
                f"{lower}, {upper}"
            )
        if any(lo > hi for lo, hi in zip(lower, upper)):
            raise PartitionError(
                f"rectangle lower bound exceeds upper: {lower}, {upper}"
            )
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __str__(self):
        return "×".join(f"[{lo:g}, {hi:g}]" for lo, hi in zip(self.lower, self.upper))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        return math.prod(self.widths)

    @property
    def center(self) -> tuple[float, ...]:
        return tuple((lo + hi) / 2 for lo, hi in zip(self.lower, self.upper))

    def contains_point(self, point: Sequence[float]) -> bool:
        return all(lo <= x <= hi for lo, x, hi in zip(self.lower, point, self.upper))

    def contains(self, other: "Rect", tol: float = 0.0) -> bool:
        return all(
            lo - tol <= olo and ohi <= hi + tol
            for lo, hi, olo, ohi in zip(
                self.lower, self.upper, other.lower, other.upper
            )
        )

    def overlap_volume(self, other: "Rect") -> float:
        volume = 1.0
        for lo, hi, olo, ohi in zip(self.lower, self.upper, other.lower, other.upper):
            side = min(hi, ohi) - max(lo, olo)
            if side <= 0:
                return 0.0
            volume *= side
        return volume


@dataclass(frozen=True)
class LabeledRegion:
    rect: Rect
    props: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.rect.volume <= 0:
            raise PartitionError(f"labeled region {self.rect} is empty")
        object.__setattr__(self, "props", frozenset(self.props))


@dataclass(frozen=True)
class Partition:
    domain: Rect
    cells: tuple[Rect, ...]
    cell_props: tuple[frozenset[str], ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        props = tuple(frozenset(p) for p in self.cell_props)
        object.__setattr__(self, "cell_props", props)
        if len(self.cells) != len(self.cell_props):
            raise PartitionError("every cell needs exactly one proposition set")
        if not self.cells:
            raise PartitionError("a partition needs at least one cell")
        if any(cell.dim != self.domain.dim for cell in self.cells):
            raise PartitionError("cell dimension differs from domain dimension")

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @cached_property
    def lowers(self) -> np.ndarray:
        return np.array([cell.lower for cell in self.cells], dtype=float)

    @cached_property
    def uppers(self) -> np.ndarray:
        return np.array([cell.upper for cell in self.cells], dtype=float)

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.prod(self.uppers - self.lowers, axis=1)

    def validate(self) -> None:
        """
        Check cover and disjointness.

        Raises PartitionError if cell volumes do not add up to the domain volume
        (relative tolerance 1e-9), if a cell leaves the domain, or if two cells
        overlap with positive volume.
        """
        domain_volume = self.domain.volume
        scale = max(self.domain.widths)
        for j, cell in enumerate(self.cells):
            if not self.domain.contains(cell, tol=REL_TOL * scale):
                raise PartitionError(f"cell {j} {cell} lies outside the domain")
        total = float(self.volumes.sum())
        if abs(total - domain_volume) > REL_TOL * domain_volume:
            raise PartitionError(
                f"cells cover volume {total!r}, domain volume is {domain_volume!r}"
            )
        lowers, uppers = self.lowers, self.uppers
        for j in range(self.n_cells - 1):
            sides = np.minimum(uppers[j], uppers[j + 1 :]) - np.maximum(
                lowers[j], lowers[j + 1 :]
            )
            overlap = np.prod(np.clip(sides, 0.0, None), axis=1)
            bad = np.flatnonzero(overlap > REL_TOL * domain_volume)
            if bad.size:
                raise PartitionError(f"cells {j} and {j + 1 + bad[0]} overlap")

    def with_cells(
        self, cells: Sequence[Rect], cell_props: Sequence[frozenset[str]]
    ) -> "Partition":
        return Partition(
            domain=self.domain, cells=tuple(cells), cell_props=tuple(cell_props)
        )


def split_rect(rect: Rect) -> tuple[Rect, Rect]:
    """Cut `rect` in half across its widest dimension (lowest index on ties)."""
    if rect.volume <= 0:
        raise PartitionError(f"cannot split degenerate rectangle {rect}")
    axis = int(np.argmax(rect.widths))
    lo, hi = rect.lower[axis], rect.upper[axis]
    mid = lo + (hi - lo) / 2
    if not lo < mid < hi:
        raise PartitionError(f"rectangle {rect} is too small to split")
    low_upper = list(rect.upper)
    low_upper[axis] = mid
    high_lower = list(rect.lower)
    high_lower[axis] = mid
    return Rect(rect.lower, tuple(low_upper)), Rect(tuple(high_lower), rect.upper)


def _check_regions(domain: Rect, regions: Sequence[LabeledRegion]) -> None:
    scale = max(domain.widths)
    for k, region in enumerate(regions):
        if region.rect.dim != domain.dim:
            raise PartitionError(f"region {k} has dimension {region.rect.dim}")
        if not domain.contains(region.rect, tol=REL_TOL * scale):
            raise PartitionError(f"region {k} {region.rect} extends outside the domain")
    for (k, first), (m, second) in itertools.combinations(enumerate(regions), 2):
        if first.rect.overlap_volume(second.rect) > REL_TOL * domain.volume:
            raise PartitionError(f"regions {k} and {m} overlap")


def _axis_breakpoints(
    lo: float, hi: float, count: int, boundaries: Iterable[float]
) -> list[float]:
    tol = REL_TOL * (hi - lo)
    points = sorted({lo, hi} | {min(max(b, lo), hi) for b in boundaries})
    exact = list(points)
    for x in np.linspace(lo, hi, count + 1)[1:-1]:
        if all(abs(x - p) > tol for p in exact):
            points.append(float(x))
    points.sort()
    merged = [points[0]]
    for x in points[1:]:
        if x - merged[-1] > tol:
            merged.append(x)
        elif x in exact:
            merged[-1] = x
    return merged


def align_partition_to_labels(
    domain: Rect, regions: Sequence[LabeledRegion], grid: Sequence[int]
) -> Partition:
    """
    Build a uniform grid over `domain` refined by every region boundary.

    Space outside all regions is labeled with the empty proposition set.
    Raises PartitionError for overlapping regions or regions leaving the domain.
    """
    if len(grid) != domain.dim or any(int(n) < 1 for n in grid):
        raise PartitionError(
            f"grid {list(grid)} does not match domain dimension {domain.dim}"
        )
    if domain.volume <= 0:
        raise PartitionError(f"domain {domain} has zero volume")
    _check_regions(domain, regions)

    axes = [
        _axis_breakpoints(
            domain.lower[i],
            domain.upper[i],
            int(grid[i]),
            [b for r in regions for b in (r.rect.lower[i], r.rect.upper[i])],
        )
        for i in range(domain.dim)
    ]

    cells = []
    props = []
    for index in itertools.product(*(range(len(axis) - 1) for axis in axes)):
        cell = Rect(
            tuple(axes[i][k] for i, k in enumerate(index)),
            tuple(axes[i][k + 1] for i, k in enumerate(index)),
        )
        center = cell.center
        label = next(
            (r.props for r in regions if r.rect.contains_point(center)), frozenset()
        )
        cells.append(cell)
        props.append(label)

    partition = Partition(domain=domain, cells=tuple(cells), cell_props=tuple(props))
    logger.debug("Aligned partition: %d cells over %s", partition.n_cells, domain)
    return partition


def uncertain_volume(partition: Partition, classes: Sequence[str]) -> float:
    """Fraction of the domain volume covered by undecided cells."""
    if len(classes) != partition.n_cells:
        raise PartitionError(
            f"got {len(classes)} classes for {partition.n_cells} cells"
        )
    undecided = np.array([c == StateClass.UNDECIDED for c in classes], dtype=bool)
    return float(partition.volumes[undecided].sum() / partition.domain.volume)
