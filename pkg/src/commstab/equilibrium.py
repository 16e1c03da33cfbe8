"""Nash-equilibrium conditions for evenly spaced community structures.

A structure has ``N`` communities centred at ``m_k = -L + L_C + 2 L_C (k-1)``
with supply arcs ``[m_k - L_C, m_k + L_C)`` and demand arcs
``[m_k - l_d, m_k + l_d)``. Consumers outside every demand arc join nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .community import CommunityPairState, triangle_integral_many
from .model import ModelParams, torus_distance, wrap

FULL = "full-coverage"
GAPPED = "gapped"

NE_TOL = 1e-12
AUDIT_TOL = 1e-9


class WrongKindError(ValueError):
    """Operation requested for the other kind of structure."""


@dataclass(frozen=True)
class EquilibriumSpec:
    lc: float
    ld: float
    params: ModelParams
    kind: str = field(init=False)

    def __post_init__(self):
        if self.lc != self.params.big_l / self.params.n_comm:
            raise ValueError(f"lc must equal big_l / n_comm = {self.params.lc!r}, got {self.lc!r}")
        if not 0.0 < self.ld <= self.lc:
            raise ValueError(f"ld must lie in (0, lc = {self.lc!r}], got {self.ld!r}")
        object.__setattr__(self, "kind", FULL if self.ld == self.lc else GAPPED)

    @classmethod
    def build(cls, params: ModelParams, ld: float | None = None) -> "EquilibriumSpec":
        """Structure with ``L_C = L / N``.

        Without ``ld`` the equilibrium half-width is used when it leaves a gap,
        otherwise the structure covers everything (``ld = L_C``).
        """
        lc = params.big_l / params.n_comm
        if ld is None:
            ld = params.l_star if params.l_star < lc else lc
        return cls(lc, float(ld), params)

    @property
    def centers(self) -> np.ndarray:
        k = np.arange(self.params.n_comm)
        return -self.params.big_l + self.lc + 2.0 * self.lc * k

    def pair_state(self, d_dl=0.0, d_dr=0.0, d_sl=0.0, d_sr=0.0) -> CommunityPairState:
        return CommunityPairState(self.lc, self.ld, d_dl, d_dr, d_sl, d_sr, self.params)


@dataclass
class AuditReport:
    is_ne: bool
    worst_violation: float
    witnesses: list = field(default_factory=list)
    n_consumers: int = 0
    n_producers: int = 0


def equilibrium_ld(params: ModelParams) -> float:
    return params.f0 / params.a - params.c / (params.a * params.g0)


def check_ne_full(spec: EquilibriumSpec) -> bool:
    if spec.kind != FULL:
        raise WrongKindError("check_ne_full needs a full-coverage structure")
    return spec.lc <= equilibrium_ld(spec.params) + NE_TOL


def check_ne_gap(spec: EquilibriumSpec) -> bool:
    if spec.kind != GAPPED:
        raise WrongKindError("check_ne_gap needs a gapped structure")
    return abs(spec.ld - equilibrium_ld(spec.params)) <= NE_TOL


def is_equilibrium(spec: EquilibriumSpec) -> bool:
    return check_ne_full(spec) if spec.kind == FULL else check_ne_gap(spec)


def _consumer_utilities(spec, ys):
    # rows: agents, columns: communities
    p = spec.params
    d = torus_distance(ys[:, None], spec.centers[None, :], p.big_l)
    return p.epeq * 2.0 * spec.lc * (p.g0 * np.maximum(0.0, p.f0 - p.a * d) - p.c)


def _membership(spec, ys, half_width):
    # index of the arc [m_k - w, m_k + w) holding each agent, -1 if none
    p = spec.params
    period = 2.0 * p.big_l
    offset = np.mod(ys[:, None] - (spec.centers[None, :] - half_width), period)
    offset = np.where(offset >= period, 0.0, offset)
    inside = offset < 2.0 * half_width
    return np.where(inside.any(axis=1), inside.argmax(axis=1), -1)


def best_response_audit(
    spec: EquilibriumSpec, n_samples: int = 2000, grid_step: float = 1e-3, max_witnesses: int = 10
) -> AuditReport:
    """Check sampled consumers and producers for profitable unilateral deviations.

    Consumers may join any community or abstain; their utility is linear in
    the consumption fraction, so the best response is all-or-nothing.
    Producers may move their content to any grid point or abstain.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if grid_step <= 0.0:
        raise ValueError("grid_step must be positive")
    p = spec.params
    centers = spec.centers
    gains = []

    # consumers: evenly spaced plus the demand borders
    ys = np.concatenate([np.linspace(-p.big_l, p.big_l, n_samples, endpoint=False),
                         wrap(centers - spec.ld, p.big_l), wrap(centers + spec.ld, p.big_l)])
    ys = np.unique(ys)
    util = _consumer_utilities(spec, ys)
    member = _membership(spec, ys, spec.ld)
    current = np.where(member >= 0, util[np.arange(len(ys)), np.maximum(member, 0)], 0.0)
    best_k = util.argmax(axis=1)
    best = util[np.arange(len(ys)), best_k]
    c_gain = np.maximum(best, 0.0) - current
    for i in np.flatnonzero(c_gain > AUDIT_TOL):
        if best[i] > 0.0:
            move = f"consumer joins community {int(best_k[i]) + 1} (utility {best[i]:.6g})"
        else:
            move = f"consumer abstains (utility {current[i]:.6g} when staying)"
        if member[i] < 0 and best[i] > 0.0:
            move = "marginalized " + move
        gains.append((float(ys[i]), move, float(c_gain[i])))

    # producers: the best content in each community against the demand midpoint
    n_grid = int(math.ceil(2.0 * p.big_l / grid_step))
    xs = -p.big_l + grid_step * np.arange(n_grid)
    best_prod = np.empty(len(centers))
    at_center = np.empty(len(centers))
    for k, m in enumerate(centers):
        lo, length = m - spec.ld, 2.0 * spec.ld
        grid = p.epeq * (p.g0 * triangle_integral_many(xs, lo, length, p) - p.c * length)
        at_center[k] = p.epeq * (p.g0 * triangle_integral_many(np.array([m]), lo, length, p)[0] - p.c * length)
        best_prod[k] = max(grid.max(), at_center[k])
    producers = np.unique(np.linspace(-p.big_l, p.big_l, n_samples, endpoint=False))
    owner = _membership(spec, producers, spec.lc)
    best_any = max(0.0, float(best_prod.max()))
    p_gain = best_any - np.where(owner >= 0, at_center[np.maximum(owner, 0)], 0.0)
    for i in np.flatnonzero(p_gain > AUDIT_TOL):
        gains.append((float(producers[i]), "producer changes content or community", float(p_gain[i])))

    worst = max(float(c_gain.max(initial=0.0)), float(p_gain.max(initial=0.0)), 0.0)
    gains.sort(key=lambda w: (-w[2], w[0]))
    return AuditReport(
        is_ne=worst <= AUDIT_TOL,
        worst_violation=worst,
        witnesses=gains[:max_witnesses],
        n_consumers=len(ys),
        n_producers=len(producers),
    )
