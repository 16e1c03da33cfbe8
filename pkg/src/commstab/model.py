"""Model constants, the torus content space and the interest/ability kernels.

Content topics live on ``[-L, L)`` with the wrap-around metric. Interest
decays linearly with distance and is clipped at zero; production ability is
a constant ``g0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidParamsError(ValueError):
    """Raised when model constants fall outside their admissible ranges."""


@dataclass(frozen=True)
class ModelParams:
    f0: float
    a: float
    g0: float
    c: float
    ep: float = 1.0
    eq: float = 1.0
    big_l: float = 2.0
    n_comm: int = 2

    def __post_init__(self):
        for name in ("f0", "a", "g0", "c", "ep", "eq", "big_l"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParamsError(f"{name} must be finite, got {value!r}")
        if not 0.0 < self.f0 <= 1.0:
            raise InvalidParamsError(f"f0 must lie in (0, 1], got {self.f0!r}")
        if not 0.0 < self.g0 <= 1.0:
            raise InvalidParamsError(f"g0 must lie in (0, 1], got {self.g0!r}")
        if not 0.0 < self.ep <= 1.0:
            raise InvalidParamsError(f"ep must lie in (0, 1], got {self.ep!r}")
        for name in ("a", "c", "eq", "big_l"):
            if getattr(self, name) <= 0.0:
                raise InvalidParamsError(f"{name} must be positive, got {getattr(self, name)!r}")
        if isinstance(self.n_comm, bool) or int(self.n_comm) != self.n_comm or self.n_comm < 2:
            raise InvalidParamsError(f"n_comm must be an integer >= 2, got {self.n_comm!r}")
        object.__setattr__(self, "n_comm", int(self.n_comm))
        if self.f0 * self.g0 <= self.c:
            raise InvalidParamsError(
                f"assumption violated: f0*g0 = {self.f0 * self.g0!r} must exceed c = {self.c!r}"
            )

    @property
    def l_star(self) -> float:
        """Demand half-width at which the border consumer is indifferent."""
        return self.f0 / self.a - self.c / (self.a * self.g0)

    @property
    def lc(self) -> float:
        """Supply half-width of an evenly spaced structure, ``L / N``."""
        return self.big_l / self.n_comm

    @property
    def reach(self) -> float:
        # distance beyond which interest is zero
        return self.f0 / self.a

    @property
    def epeq(self) -> float:
        return self.ep * self.eq


def wrap(x, big_l):
    """Canonical representative of ``x`` in ``[-L, L)``."""
    x = np.asarray(x, dtype=float)
    r = np.mod(x + big_l, 2.0 * big_l) - big_l
    # mod can round up to exactly +L for tiny negative offsets
    r = np.where(r >= big_l, r - 2.0 * big_l, r)
    # canonical inputs come back unchanged, without rounding
    r = np.where((x >= -big_l) & (x < big_l), x, r)
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class TorusPoint:
    x: float

    @classmethod
    def at(cls, x: float, big_l: float) -> "TorusPoint":
        return cls(wrap(x, big_l))

    def __float__(self):
        return float(self.x)


@dataclass(frozen=True)
class TorusInterval:
    """Half-open arc ``[lo, lo + length)``, stored by start and length."""

    lo: float
    length: float

    @classmethod
    def make(cls, lo: float, length: float, big_l: float) -> "TorusInterval":
        if not 0.0 <= length <= 2.0 * big_l:
            raise ValueError(f"interval length {length!r} outside [0, {2.0 * big_l!r}]")
        return cls(wrap(lo, big_l), float(length))

    def midpoint(self, big_l: float) -> float:
        return wrap(self.lo + 0.5 * self.length, big_l)

    def contains(self, x: float, big_l: float) -> bool:
        if self.length >= 2.0 * big_l:
            return True
        return float(np.mod(float(x) - self.lo, 2.0 * big_l)) < self.length


def torus_distance(x, y, big_l):
    """Shorter arc length between ``x`` and ``y``; accepts arrays."""
    d = np.mod(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)), 2.0 * big_l)
    d = np.minimum(d, 2.0 * big_l - d)
    return float(d) if d.ndim == 0 else d


def interest_prob(x, y, params: ModelParams):
    """``max(0, f0 - a * d(x, y))``."""
    p = np.maximum(0.0, params.f0 - params.a * np.asarray(torus_distance(x, y, params.big_l)))
    return float(p) if p.ndim == 0 else p


def production_ability(x, y, params: ModelParams):
    # constant under the linear-interest regime; shape follows the inputs
    shape = np.broadcast(np.asarray(x, dtype=float), np.asarray(y, dtype=float)).shape
    if shape == ():
        return float(params.g0)
    return np.full(shape, params.g0)
