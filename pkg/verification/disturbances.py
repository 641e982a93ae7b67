"""
Per-dimension additive disturbances.

Each component is a symmetric unimodal density on a bounded support with a
closed-form CDF. Both families accept numpy arrays (including ±inf) so the
abstraction can evaluate whole blocks of cell pairs at once.
"""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, ndtri

from .exceptions import ModelError

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12

_SQRT2 = math.sqrt(2.0)


def _phi(z):
    return 0.5 * (1.0 + erf(z / _SQRT2))


class Disturbance(ABC):
    kind: str

    @property
    @abstractmethod
    def mode(self) -> float: ...

    @property
    @abstractmethod
    def low(self) -> float: ...

    @property
    @abstractmethod
    def high(self) -> float: ...

    @abstractmethod
    def cdf(self, x): ...

    @abstractmethod
    def pdf(self, x): ...

    @abstractmethod
    def ppf(self, u): ...

    @property
    def is_degenerate(self) -> bool:
        return self.high <= self.low

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-CDF sampling."""
        if self.is_degenerate:
            return np.full(size if size is not None else (), self.mode, dtype=float)
        return self.ppf(rng.random(size))


@dataclass(frozen=True)
class TruncatedGaussian(Disturbance):
    """
    Normal N(mean, variance) conditioned on [low, high].

    The support must be centred on the mean so the density stays symmetric
    about its mode. `low == high` gives a point mass at the mean.
    """

    mean: float
    variance: float
    support_low: float
    support_high: float
    kind = "truncated_gaussian"

    def __post_init__(self):
        if self.support_low > self.support_high:
            raise ModelError(
                f"truncated gaussian support [{self.support_low}, {self.support_high}] "
                "is empty"
            )
        if self.variance <= 0 and not self.is_degenerate:
            raise ModelError(f"variance must be positive, got {self.variance}")
        centre_gap = abs(self.support_low + self.support_high - 2 * self.mean)
        if centre_gap > SYMMETRY_TOL * max(1.0, abs(self.mean)):
            raise ModelError(
                f"support [{self.support_low}, {self.support_high}] is not symmetric "
                f"about the mean {self.mean}"
            )

    @property
    def mode(self) -> float:
        return self.mean

    @property
    def low(self) -> float:
        return self.support_low

    @property
    def high(self) -> float:
        return self.support_high

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def _phi_low(self) -> float:
        return float(_phi((self.support_low - self.mean) / self.sigma))

    @property
    def _mass(self) -> float:
        return float(_phi((self.support_high - self.mean) / self.sigma)) - self._phi_low

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_degenerate:
            return np.where(x >= self.mean, 1.0, 0.0)
        inside = (_phi((x - self.mean) / self.sigma) - self._phi_low) / self._mass
        return np.where(
            x <= self.support_low,
            0.0,
            np.where(x >= self.support_high, 1.0, np.clip(inside, 0.0, 1.0)),
        )

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mean) / self.sigma
        scale = self.sigma * math.sqrt(2 * math.pi) * self._mass
        density = np.exp(-0.5 * z * z) / scale
        return np.where((x < self.support_low) | (x > self.support_high), 0.0, density)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        z = ndtri(self._phi_low + u * self._mass)
        return np.clip(self.mean + self.sigma * z, self.support_low, self.support_high)


@dataclass(frozen=True)
class Triangular(Disturbance):
    """Symmetric triangular density on [mode - half_width, mode + half_width]."""

    centre: float
    half_width: float
    kind = "triangular"

    def __post_init__(self):
        if self.half_width < 0:
            raise ModelError(f"half_width must be nonnegative, got {self.half_width}")

    @property
    def mode(self) -> float:
        return self.centre

    @property
    def low(self) -> float:
        return self.centre - self.half_width

    @property
    def high(self) -> float:
        return self.centre + self.half_width

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_degenerate:
            return np.where(x >= self.centre, 1.0, 0.0)
        h = self.half_width
        t = np.clip((x - self.centre) / h, -1.0, 1.0)
        left = 0.5 * (1.0 + t) ** 2
        right = 1.0 - 0.5 * (1.0 - t) ** 2
        return np.where(t < 0, left, right)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        h = self.half_width
        return np.clip(1.0 - np.abs(x - self.centre) / h, 0.0, None) / h

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        h = self.half_width
        left = self.centre + h * (np.sqrt(2.0 * u) - 1.0)
        right = self.centre + h * (1.0 - np.sqrt(2.0 * (1.0 - u)))
        return np.where(u < 0.5, left, right)


@dataclass(frozen=True)
class DisturbanceSpec:
    """Independent components, one per state dimension."""

    components: tuple[Disturbance, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ModelError("a disturbance needs at least one component")

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def modes(self) -> np.ndarray:
        return np.array([c.mode for c in self.components], dtype=float)

    def __getitem__(self, i: int) -> Disturbance:
        return self.components[i]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` disturbance vectors, shape (size, dim)."""
        return np.column_stack([c.sample(rng, size) for c in self.components])


def make_disturbance(block: dict) -> Disturbance:
    """Build one component from its run-config object."""
    kind = block.get("kind")
    try:
        if kind == TruncatedGaussian.kind:
            return TruncatedGaussian(
                mean=float(block["mean"]),
                variance=float(block["variance"]),
                support_low=float(block["low"]),
                support_high=float(block["high"]),
            )
        if kind == Triangular.kind:
            return Triangular(
                centre=float(block["mode"]), half_width=float(block["half_width"])
            )
    except KeyError as exc:
        raise ModelError(f"{kind} disturbance is missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ModelError(
            f"{kind} disturbance has a non-numeric parameter: {exc}"
        ) from exc
    raise ModelError(f"unknown disturbance kind {kind!r}")


def make_disturbance_spec(blocks: Sequence[dict]) -> DisturbanceSpec:
    return DisturbanceSpec(tuple(make_disturbance(b) for b in blocks))
