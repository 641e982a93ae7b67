"""
Discrete-time stochastic systems x⁺ = F(x) + w with a mixed-monotone
decomposition g(x, y): increasing in x, decreasing in y, g(x, x) = F(x).

Maps take arrays of shape (..., n) so whole batches of cell corners are
evaluated in one call.
"""

import logging
from collections.abc import Callable, Sequence

import numpy as np
from django.utils.module_loading import import_string

from .disturbances import DisturbanceSpec, make_disturbance_spec
from .exceptions import ConfigError, ModelError
from .geometry import Rect
from .models import ModelFamily

logger = logging.getLogger(__name__)


class SystemModel:
    """
    Base class for models with a decomposition function.

    Subclasses implement `nominal` (F) and `decomposition` (g). Custom models
    named in a run-config must subclass this and accept
    (domain, disturbance, boundary_clipping, **parameters).
    """

    family = ModelFamily.CUSTOM

    def __init__(
        self,
        domain: Rect,
        disturbance: DisturbanceSpec,
        boundary_clipping: bool = True,
    ):
        if disturbance.dim != domain.dim:
            raise ModelError(
                f"disturbance has {disturbance.dim} components for a "
                f"{domain.dim}-dimensional domain"
            )
        self.domain = domain
        self.disturbance = disturbance
        self.boundary_clipping = boundary_clipping

    @property
    def dim(self) -> int:
        return self.domain.dim

    def nominal(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decomposition(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def step(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """One stochastic step, clamped to the domain when clipping is on."""
        nxt = self.nominal(x) + w
        if self.boundary_clipping:
            nxt = np.clip(nxt, self.domain.lower, self.domain.upper)
        return nxt

    def __repr__(self):
        return f"{type(self).__name__}(domain={self.domain})"


class MonotoneModel(SystemModel):
    """Monotone F: g(x, y) = F(x)."""

    family = ModelFamily.MONOTONE

    def __init__(self, domain, disturbance, boundary_clipping=True, map=None):
        super().__init__(domain, disturbance, boundary_clipping)
        if map is not None and not callable(map):
            raise ModelError("monotone model needs a callable map")
        self._map = map

    def nominal(self, x):
        if self._map is None:
            raise NotImplementedError
        return np.asarray(self._map(np.asarray(x, dtype=float)), dtype=float)

    def decomposition(self, x, y):
        return self.nominal(x)


class BistableSwitch(MonotoneModel):
    """
    Two-gene bistable switch, Euler-discretised:

        x1⁺ = x1 + (-a·x1 + x2)·dt
        x2⁺ = x2 + (x1² / (x1² + 1) - b·x2)·dt

    Monotone on the nonnegative orthant whenever a·dt < 1 and b·dt < 1.
    """

    family = ModelFamily.BISTABLE_SWITCH

    def __init__(
        self, domain, disturbance, boundary_clipping=True, a=1.3, b=0.25, dt=0.05
    ):
        super().__init__(domain, disturbance, boundary_clipping)
        if domain.dim != 2:
            raise ModelError("the bistable switch is two-dimensional")
        if any(lo < 0 for lo in domain.lower):
            raise ModelError("the bistable switch is monotone only on x ≥ 0")
        if a * dt >= 1 or b * dt >= 1:
            raise ModelError(f"a·dt and b·dt must stay below 1 (a={a}, b={b}, dt={dt})")
        self.a, self.b, self.dt = float(a), float(b), float(dt)

    def nominal(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        sq = x1 * x1
        return np.stack(
            [
                x1 + (-self.a * x1 + x2) * self.dt,
                x2 + (sq / (sq + 1.0) - self.b * x2) * self.dt,
            ],
            axis=-1,
        )


class LinearModel(SystemModel):
    """x⁺ = A·x + offset + w, decomposed as g(x, y) = A⁺x − A⁻y + offset."""

    family = ModelFamily.LINEAR

    def __init__(
        self, domain, disturbance, boundary_clipping=True, A=None, offset=None
    ):
        super().__init__(domain, disturbance, boundary_clipping)
        matrix = np.asarray(A, dtype=float)
        if matrix.shape != (self.dim, self.dim):
            raise ModelError(
                f"A must be {self.dim}×{self.dim}, got shape {matrix.shape}"
            )
        self.A = matrix
        self.A_pos = np.clip(matrix, 0.0, None)
        self.A_neg = np.clip(-matrix, 0.0, None)
        self.offset = (
            np.zeros(self.dim) if offset is None else np.asarray(offset, dtype=float)
        )
        if self.offset.shape != (self.dim,):
            raise ModelError(f"offset must have length {self.dim}")

    @staticmethod
    def _apply(matrix: np.ndarray, x: np.ndarray) -> np.ndarray:
        # column-by-column so results do not depend on the batch size
        out = np.zeros(x.shape[:-1] + (matrix.shape[0],))
        for k in range(matrix.shape[1]):
            out = out + x[..., k : k + 1] * matrix[:, k]
        return out

    def nominal(self, x):
        x = np.asarray(x, dtype=float)
        return self._apply(self.A, x) + self.offset

    def decomposition(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self._apply(self.A_pos, x) - self._apply(self.A_neg, y) + self.offset


def _resolve(path: str, what: str):
    try:
        return import_string(path)
    except ImportError as exc:
        raise ConfigError(f"cannot import {what} {path!r}: {exc}") from exc


def make_model(
    family: str,
    parameters: dict,
    domain: Sequence[Sequence[float]],
    disturbance: Sequence[dict],
    boundary_clipping: bool = True,
) -> SystemModel:
    """
    Build a SystemModel from its run-config block.

    Raises ConfigError for unknown families or unresolvable import paths and
    ModelError for inconsistent parameters.
    """
    rect = Rect(tuple(lo for lo, _ in domain), tuple(hi for _, hi in domain))
    noise = make_disturbance_spec(disturbance)
    params = dict(parameters or {})
    try:
        if family == ModelFamily.BISTABLE_SWITCH:
            model = BistableSwitch(rect, noise, boundary_clipping, **params)
        elif family == ModelFamily.LINEAR:
            model = LinearModel(rect, noise, boundary_clipping, **params)
        elif family == ModelFamily.MONOTONE:
            if "map" not in params:
                raise ConfigError("monotone model needs parameters.map")
            fn: Callable = _resolve(params.pop("map"), "map")
            model = MonotoneModel(rect, noise, boundary_clipping, map=fn, **params)
        elif family == ModelFamily.CUSTOM:
            if "decomposition" not in params:
                raise ConfigError("custom model needs parameters.decomposition")
            cls = _resolve(params.pop("decomposition"), "model class")
            if not (isinstance(cls, type) and issubclass(cls, SystemModel)):
                raise ConfigError(f"{cls!r} is not a SystemModel subclass")
            model = cls(rect, noise, boundary_clipping, **params)
        else:
            raise ConfigError(f"unknown model family {family!r}")
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {family} model: {exc}") from exc
    logger.debug("Built %r with parameters %s", model, params)
    return model
