"""Two adjacent perturbed communities and the utilities of their members.

Community 1 is centred at ``-L_C`` and community 2 at ``+L_C``::

    C1_d = [-L_C - l_d, -L_C + l_d + d_dl)     C1_s = [-2 L_C, d_sl)
    C2_d = [ L_C - l_d + d_dr, L_C + l_d)      C2_s = [d_sr, 2 L_C)

Every producer in a community produces at the midpoint of its demand
interval, so all utilities have closed forms built on
:func:`triangle_integral`. The ``*_oracle`` functions evaluate the same
integrals by brute force and exist for testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, TorusInterval, interest_prob, production_ability, wrap


class InvalidStateError(ValueError):
    """A community interval has collapsed to non-positive length."""


def _ramp_primitive(u, f0, a):
    # antiderivative of max(0, f0 - a|u|), odd in u
    v = min(abs(u), f0 / a)
    h = f0 * v - 0.5 * a * v * v
    return h if u >= 0.0 else -h


def _kernel_integral(center, lo, length, f0, a, big_l):
    two_l = 2.0 * big_l
    u1 = (lo - center + big_l) % two_l - big_l
    if u1 >= big_l:
        u1 -= two_l
    u2 = u1 + length
    if u2 <= big_l:
        return _ramp_primitive(u2, f0, a) - _ramp_primitive(u1, f0, a)
    # the arc crosses the antipode of the centre
    return (
        _ramp_primitive(big_l, f0, a)
        - _ramp_primitive(u1, f0, a)
        + _ramp_primitive(u2 - two_l, f0, a)
        - _ramp_primitive(-big_l, f0, a)
    )


def _ramp_primitive_many(u, f0, a):
    v = np.minimum(np.abs(u), f0 / a)
    return np.sign(u) * (f0 * v - 0.5 * a * v * v)


def triangle_integral_many(centers, lo, length, params: ModelParams):
    """Vectorised :func:`triangle_integral` over an array of kernel centres."""
    f0, a, big_l = params.f0, params.a, params.big_l
    two_l = 2.0 * big_l
    u1 = np.asarray(wrap(np.asarray(lo, dtype=float) - np.asarray(centers, dtype=float), big_l))
    u2 = u1 + length
    crosses = u2 > big_l
    inner = _ramp_primitive_many(np.where(crosses, big_l, u2), f0, a) - _ramp_primitive_many(u1, f0, a)
    spill = _ramp_primitive_many(np.where(crosses, u2 - two_l, -big_l), f0, a) - _ramp_primitive_many(
        -big_l, f0, a
    )
    return inner + np.where(crosses, spill, 0.0)


def triangle_integral(center, interval: TorusInterval, params: ModelParams) -> float:
    """Exact integral of ``max(0, f0 - a d(center, z))`` over ``z`` in the arc."""
    if interval.length > 2.0 * params.big_l:
        raise ValueError("interval longer than the torus")
    return _kernel_integral(float(center), interval.lo, interval.length, params.f0, params.a, params.big_l)


@dataclass(frozen=True)
class CommunityPairState:
    lc: float
    ld: float
    d_dl: float
    d_dr: float
    d_sl: float
    d_sr: float
    params: ModelParams

    def __post_init__(self):
        if self.lc <= 0.0:
            raise ValueError(f"lc must be positive, got {self.lc!r}")
        if not 0.0 < self.ld <= self.lc:
            raise ValueError(f"ld must lie in (0, lc], got {self.ld!r}")
        if 2.0 * self.lc > self.params.big_l * (1.0 + 1e-12):
            raise ValueError("two communities of half-width lc do not fit on the torus")
        problem = state_problem(self.lc, self.ld, self.d_dl, self.d_dr, self.d_sl, self.d_sr)
        if problem:
            raise InvalidStateError(problem)

    def demand_interval(self, which: int) -> TorusInterval:
        lo, length = _demand(which, self.lc, self.ld, self.d_dl, self.d_dr)
        return TorusInterval.make(lo, length, self.params.big_l)

    def supply_interval(self, which: int) -> TorusInterval:
        if which == 1:
            lo, length = -2.0 * self.lc, 2.0 * self.lc + self.d_sl
        else:
            lo, length = self.d_sr, 2.0 * self.lc - self.d_sr
        return TorusInterval.make(lo, length, self.params.big_l)

    def supply_width(self, which: int) -> float:
        return _supply_width(which, self.lc, self.d_sl, self.d_sr)


def state_problem(lc, ld, d_dl, d_dr, d_sl, d_sr):
    """Describe the first collapsed interval, or return ``None``."""
    values = (d_dl, d_dr, d_sl, d_sr)
    if not all(math.isfinite(v) for v in values):
        return f"non-finite perturbation {values!r}"
    if 2.0 * ld + d_dl <= 0.0:
        return f"demand interval of community 1 collapsed (2*ld + d_dl = {2.0 * ld + d_dl!r})"
    if 2.0 * ld - d_dr <= 0.0:
        return f"demand interval of community 2 collapsed (2*ld - d_dr = {2.0 * ld - d_dr!r})"
    if 2.0 * lc + d_sl <= 0.0:
        return f"supply interval of community 1 collapsed (2*lc + d_sl = {2.0 * lc + d_sl!r})"
    if 2.0 * lc - d_sr <= 0.0:
        return f"supply interval of community 2 collapsed (2*lc - d_sr = {2.0 * lc - d_sr!r})"
    return None


def _check_which(which):
    if which not in (1, 2):
        raise ValueError(f"community id must be 1 or 2, got {which!r}")


def _demand(which, lc, ld, d_dl, d_dr):
    if which == 1:
        return -lc - ld, 2.0 * ld + d_dl
    return lc - ld + d_dr, 2.0 * ld - d_dr


def _supply_width(which, lc, d_sl, d_sr):
    return 2.0 * lc + d_sl if which == 1 else 2.0 * lc - d_sr


def _optimal(which, lc, d_dl, d_dr):
    return -lc + 0.5 * d_dl if which == 1 else lc + 0.5 * d_dr


def _consumer(x_opt, width, y, p: ModelParams):
    two_l = 2.0 * p.big_l
    d = abs(x_opt - y) % two_l
    d = min(d, two_l - d)
    return p.epeq * width * (p.g0 * max(0.0, p.f0 - p.a * d) - p.c)


def _producer(x_opt, lo, length, p: ModelParams):
    mass = _kernel_integral(x_opt, lo, length, p.f0, p.a, p.big_l)
    return p.epeq * (p.g0 * mass - p.c * length)


def optimal_content(which: int, state: CommunityPairState) -> float:
    """Content every producer of community ``which`` chooses: the demand midpoint."""
    _check_which(which)
    return wrap(_optimal(which, state.lc, state.d_dl, state.d_dr), state.params.big_l)


def optimal_content_oracle(which: int, state: CommunityPairState, grid_step: float = 1e-3) -> float:
    """Grid search for the best content; the smallest coordinate wins ties."""
    _check_which(which)
    if grid_step <= 0.0:
        raise ValueError("grid_step must be positive")
    p = state.params
    n = int(math.ceil(2.0 * p.big_l / grid_step))
    xs = -p.big_l + grid_step * np.arange(n)
    xs = xs[xs < p.big_l]
    interval = state.demand_interval(which)
    score = production_ability(xs, xs, p) * triangle_integral_many(xs, interval.lo, interval.length, p)
    return float(xs[int(np.argmax(score))])


def consumer_utility(which: int, y, state: CommunityPairState) -> float:
    """Consumption utility of agent ``y`` if it joins community ``which``."""
    _check_which(which)
    x_opt = _optimal(which, state.lc, state.d_dl, state.d_dr)
    return _consumer(x_opt, state.supply_width(which), float(y), state.params)


def producer_utility(which: int, state: CommunityPairState) -> float:
    """Production utility in community ``which``; identical for every producer."""
    _check_which(which)
    lo, length = _demand(which, state.lc, state.ld, state.d_dl, state.d_dr)
    x_opt = _optimal(which, state.lc, state.d_dl, state.d_dr)
    return _producer(x_opt, lo, length, state.params)


def _midpoints(interval: TorusInterval, step: float):
    n = int(math.ceil(interval.length / step))
    h = interval.length / n
    return interval.lo + h * (np.arange(n) + 0.5), h


def consumer_utility_oracle(which: int, y, state: CommunityPairState, quad_step: float = 1e-4) -> float:
    """Midpoint-rule evaluation of the consumption utility integral over the supply arc."""
    _check_which(which)
    if quad_step <= 0.0:
        raise ValueError("quad_step must be positive")
    p = state.params
    interval = state.supply_interval(which)
    if interval.length == 0.0:
        return 0.0
    zs, h = _midpoints(interval, quad_step)
    x_opt = optimal_content(which, state)
    integrand = production_ability(x_opt, zs, p) * interest_prob(x_opt, float(y), p) - p.c
    return float(p.epeq * h * np.sum(integrand))


def producer_utility_oracle(which: int, state: CommunityPairState, quad_step: float = 1e-4) -> float:
    """Midpoint-rule evaluation of the production utility integral over the demand arc."""
    _check_which(which)
    if quad_step <= 0.0:
        raise ValueError("quad_step must be positive")
    p = state.params
    interval = state.demand_interval(which)
    if interval.length == 0.0:
        return 0.0
    zs, h = _midpoints(interval, quad_step)
    x_opt = optimal_content(which, state)
    integrand = production_ability(x_opt, x_opt, p) * interest_prob(x_opt, zs, p) - p.c
    return float(p.epeq * h * np.sum(integrand))
