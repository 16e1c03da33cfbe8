"""Boundary-perturbation dynamics between two adjacent communities.

Each boundary moves at the rate given by the utility difference its border
agent sees between the two communities, where a community offering negative
utility is replaced by abstaining (utility 0).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .community import _consumer, _producer, state_problem
from .equilibrium import FULL, EquilibriumSpec, WrongKindError

REACHED_T_MAX = "reached_t_max"
STATE_INVALID = "state_invalid"
CONVERGED = "converged_below_epsilon"

CSV_HEADER = ("t", "delta_dl", "delta_dr", "delta_sl", "delta_sr",
              "u1d_left", "u2d_left", "u1d_right", "u2d_right")


class StateInvalidError(ValueError):
    """A community collapsed, so the right-hand side is undefined."""


class InitialConditionError(ValueError):
    """Initial perturbation breaks the constraints of the perturbation model."""


@dataclass(frozen=True)
class PerturbationState:
    t: float = 0.0
    d_dl: float = 0.0
    d_dr: float = 0.0
    d_sl: float = 0.0
    d_sr: float = 0.0

    @property
    def deltas(self):
        return (self.d_dl, self.d_dr, self.d_sl, self.d_sr)


@dataclass
class Trajectory:
    t: np.ndarray
    deltas: np.ndarray  # columns dl, dr, sl, sr
    border: np.ndarray  # columns u1d_left, u2d_left, u1d_right, u2d_right
    termination: str
    message: str = ""
    dt: float = 0.0

    def __len__(self):
        return len(self.t)

    @property
    def states(self):
        return [PerturbationState(float(t), *map(float, d)) for t, d in zip(self.t, self.deltas)]

    @property
    def final(self) -> PerturbationState:
        return PerturbationState(float(self.t[-1]), *map(float, self.deltas[-1]))

    def column(self, name: str) -> np.ndarray:
        i = CSV_HEADER.index(name)
        if i == 0:
            return self.t
        return self.deltas[:, i - 1] if i <= 4 else self.border[:, i - 5]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t, d, u in zip(self.t, self.deltas, self.border):
            writer.writerow([repr(float(v)) for v in (t, *d, *u)])
        return buf.getvalue()


@dataclass(frozen=True)
class LinearSystem:
    """``d' = K s - M d``, ``s' = K d`` for symmetric full-coverage perturbations."""

    k_const: float
    m_const: float
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.array([[-self.m_const, self.k_const], [self.k_const, 0.0]]))

    @property
    def eigenvalues(self):
        """``(lambda_plus, lambda_minus)`` from ``l^2 + M l - K^2 = 0``."""
        root = np.sqrt(self.m_const ** 2 + 4.0 * self.k_const ** 2)
        # the small root loses digits when K << M, use Vieta for it
        lam_minus = 0.5 * (-self.m_const - root)
        lam_plus = -self.k_const ** 2 / lam_minus if lam_minus != 0.0 else 0.0
        return float(lam_plus), float(lam_minus)


def make_derivatives(lc, ld, p):
    """Right-hand side specialised to one structure, inlined for the integrator.

    Mirrors :func:`commstab.community._consumer` and ``_producer``; the test
    suite checks the two paths against each other.
    """
    f0, a, g0, c, epeq = p.f0, p.a, p.g0, p.c, p.epeq
    big_l = p.big_l
    two_l = 2.0 * big_l
    r = f0 / a
    two_lc = 2.0 * lc

    def interest(x, y):
        d = abs(x - y) % two_l
        if two_l - d < d:
            d = two_l - d
        v = f0 - a * d
        return g0 * v - c if v > 0.0 else -c

    def prim(u):
        v = u if u >= 0.0 else -u
        if v > r:
            v = r
        h = f0 * v - 0.5 * a * v * v
        return h if u >= 0.0 else -h

    def mass(center, lo, length):
        u1 = (lo - center + big_l) % two_l - big_l
        if u1 >= big_l:
            u1 -= two_l
        u2 = u1 + length
        if u2 <= big_l:
            return prim(u2) - prim(u1)
        return prim(big_l) - prim(u1) + prim(u2 - two_l) - prim(-big_l)

    def derivatives(dl, dr, sl, sr):
        x1 = -lc + 0.5 * dl
        x2 = lc + 0.5 * dr
        w1 = epeq * (two_lc + sl)
        w2 = epeq * (two_lc - sr)
        bl = -lc + ld + dl
        br = lc - ld + dr
        u1l = w1 * interest(x1, bl)
        u2l = w2 * interest(x2, bl)
        u1r = w1 * interest(x1, br)
        u2r = w2 * interest(x2, br)
        # production utility does not depend on where the producer sits
        len1 = 2.0 * ld + dl
        len2 = 2.0 * ld - dr
        s1 = epeq * (g0 * mass(x1, -lc - ld, len1) - c * len1)
        s2 = epeq * (g0 * mass(x2, lc - ld + dr, len2) - c * len2)
        return (
            u1l - (u2l if u2l > 0.0 else 0.0),
            (u1r if u1r > 0.0 else 0.0) - u2r,
            s1 - (s2 if s2 > 0.0 else 0.0),
            (s1 if s1 > 0.0 else 0.0) - s2,
        )

    return derivatives


def border_utilities(state: PerturbationState, spec: EquilibriumSpec):
    """Consumer utilities ``(U1(b_l), U2(b_l), U1(b_r), U2(b_r))`` at both demand borders."""
    lc, ld, p = spec.lc, spec.ld, spec.params
    dl, dr, sl, sr = state.deltas
    x1, x2 = -lc + 0.5 * dl, lc + 0.5 * dr
    w1, w2 = 2.0 * lc + sl, 2.0 * lc - sr
    bl, br = -lc + ld + dl, lc - ld + dr
    return (_consumer(x1, w1, bl, p), _consumer(x2, w2, bl, p),
            _consumer(x1, w1, br, p), _consumer(x2, w2, br, p))


def producer_utilities(state: PerturbationState, spec: EquilibriumSpec):
    lc, ld, p = spec.lc, spec.ld, spec.params
    dl, dr = state.d_dl, state.d_dr
    return (_producer(-lc + 0.5 * dl, -lc - ld, 2.0 * ld + dl, p),
            _producer(lc + 0.5 * dr, lc - ld + dr, 2.0 * ld - dr, p))


def rhs(state: PerturbationState, spec: EquilibriumSpec):
    """Time derivatives ``(d_dl', d_dr', d_sl', d_sr')``."""
    problem = state_problem(spec.lc, spec.ld, *state.deltas)
    if problem:
        raise StateInvalidError(problem)
    return make_derivatives(spec.lc, spec.ld, spec.params)(*state.deltas)


def check_initial(initial: PerturbationState, spec: EquilibriumSpec):
    dl, dr, sl, sr = initial.deltas
    if sl != sr:
        raise InitialConditionError(f"supply perturbations must start equal, got {sl!r} and {sr!r}")
    if spec.kind == FULL and dl != dr:
        raise InitialConditionError(
            f"demand perturbations must start equal without a gap, got {dl!r} and {dr!r}")
    if spec.kind != FULL and not dl < 2.0 * spec.lc - 2.0 * spec.ld + dr:
        raise InitialConditionError("d_dl(0) must stay below 2*lc - 2*ld + d_dr(0)")


def integrate(
    initial: PerturbationState,
    spec: EquilibriumSpec,
    dt: float = 1e-3,
    t_max: float = 50.0,
    eps_converged: float = 1e-10,
    sample_stride: int = 10,
    converge_on: str = "all",
    enforce_initial: bool = True,
    monitor=None,
) -> Trajectory:
    """Classical fixed-step RK4.

    Stops early when the largest perturbation magnitude drops below
    ``eps_converged`` (all four, or only the demand pair when
    ``converge_on="demand"``) or when a community collapses. ``monitor``, if
    given, is called as ``monitor(t, deltas, derivatives)`` on every
    right-hand-side evaluation.
    """
    if dt <= 0.0 or t_max <= 0.0:
        raise ValueError("dt and t_max must be positive")
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    if converge_on not in ("all", "demand"):
        raise ValueError("converge_on must be 'all' or 'demand'")
    if enforce_initial:
        check_initial(initial, spec)

    lc, ld, p = spec.lc, spec.ld, spec.params
    n_conv = 4 if converge_on == "all" else 2
    t0 = initial.t
    n_steps = int(round(t_max / dt))

    derivatives = make_derivatives(lc, ld, p)
    two_lc, two_ld = 2.0 * lc, 2.0 * ld

    def f(t, y):
        dl, dr, sl, sr = y
        if not (two_ld + dl > 0.0 and two_ld - dr > 0.0 and two_lc + sl > 0.0 and two_lc - sr > 0.0):
            raise StateInvalidError(state_problem(lc, ld, *y) or "non-finite state")
        dy = derivatives(dl, dr, sl, sr)
        if monitor is not None:
            monitor(t, y, dy)
        return dy

    ts, ys = [], []

    def record(t, y):
        ts.append(t)
        ys.append(y)

    y = initial.deltas
    termination, message = REACHED_T_MAX, ""
    record(t0, y)
    if state_problem(lc, ld, *y):
        termination, message = STATE_INVALID, state_problem(lc, ld, *y)
    elif max(abs(v) for v in y[:n_conv]) < eps_converged:
        termination = CONVERGED
    else:
        h, h2, h6 = dt, 0.5 * dt, dt / 6.0
        for k in range(1, n_steps + 1):
            t = t0 + (k - 1) * dt
            try:
                k1 = f(t, y)
                k2 = f(t + h2, tuple(a + h2 * b for a, b in zip(y, k1)))
                k3 = f(t + h2, tuple(a + h2 * b for a, b in zip(y, k2)))
                k4 = f(t + h, tuple(a + h * b for a, b in zip(y, k3)))
            except StateInvalidError as exc:
                termination, message = STATE_INVALID, f"t={t!r}: {exc}"
                if ts[-1] != t:
                    record(t, y)
                break
            y = tuple(a + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                      for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
            t_new = t0 + k * dt
            if max(abs(v) for v in y[:n_conv]) < eps_converged:
                record(t_new, y)
                termination = CONVERGED
                break
            if k % sample_stride == 0 or k == n_steps:
                record(t_new, y)

    deltas = np.array(ys, dtype=float).reshape(-1, 4)
    border = np.array([border_utilities(PerturbationState(0.0, *d), spec) for d in ys]).reshape(-1, 4)
    return Trajectory(np.array(ts, dtype=float), deltas, border, termination, message, dt)


def linear_coefficients(spec: EquilibriumSpec) -> LinearSystem:
    if spec.kind != FULL:
        raise WrongKindError("the linear system only describes full-coverage structures")
    p = spec.params
    k = p.epeq * (-2.0 * p.c + 2.0 * p.f0 * p.g0 - 2.0 * spec.lc * p.a * p.g0)
    m = p.epeq * (2.0 * spec.lc * p.a * p.g0)
    return LinearSystem(k, m)


def linear_solution(system: LinearSystem, d0: float, s0: float, t):
    """Exact ``(delta_d(t), delta_s(t))`` by eigendecomposition; ``t`` may be an array."""
    lam, vecs = np.linalg.eigh(system.matrix)
    coeff = vecs.T @ np.array([d0, s0], dtype=float)
    t_arr = np.asarray(t, dtype=float)
    modes = coeff[:, None] * np.exp(np.outer(lam, t_arr.ravel()))
    out = vecs @ modes
    d, s = out[0].reshape(t_arr.shape), out[1].reshape(t_arr.shape)
    if t_arr.ndim == 0:
        return float(d), float(s)
    return d, s
