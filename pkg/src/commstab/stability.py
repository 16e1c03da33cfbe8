"""Stability classification of equilibrium structures.

Gapped equilibria are probed with small perturbations of every sign pattern:
the demand borders must return while producers end up indifferent between
the two communities. Full-coverage equilibria below the threshold get an
explicit perturbation that provably never decays.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    STATE_INVALID,
    PerturbationState,
    Trajectory,
    integrate,
    linear_coefficients,
    producer_utilities,
)
from .equilibrium import FULL, NE_TOL, EquilibriumSpec, WrongKindError, equilibrium_ld, is_equilibrium

STABLE = "stable"
NEUTRAL_STABLE = "neutral-stable"
UNSTABLE = "unstable"
INDETERMINATE = "indeterminate"

DEMAND_TOL = 1e-6
LIMIT_TOL = 1e-6
ENVELOPE_TOL = 1e-6


class NotEquilibriumError(ValueError):
    """Stability is only defined at a Nash equilibrium."""


class NonConvergenceError(ValueError):
    def __init__(self, message, final_deltas):
        super().__init__(message)
        self.final_deltas = final_deltas


class PreconditionError(ValueError):
    """The trajectory does not satisfy the hypotheses of the envelope bound."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_max: float = 50.0
    eps_converged: float = 1e-10
    sample_stride: int = 10


@dataclass
class StabilityVerdict:
    verdict: str
    kind: str
    lc: float
    ld: float
    probes: list = field(default_factory=list)
    envelope_residual: float | None = None
    envelope_residual_gap_scaled: float | None = None
    limit_utilities: tuple | None = None
    expected_limit_utility: float | None = None
    eigenvalues: tuple | None = None
    k_const: float | None = None
    m_const: float | None = None
    b0: float | None = None
    witness: PerturbationState | None = None
    epsilons: tuple | None = None
    runs: int = 0
    diagnostics: list = field(default_factory=list)

    def to_report(self) -> str:
        def fmt(v):
            if v is None:
                return "n/a"
            if isinstance(v, (tuple, list)):
                return ", ".join(fmt(x) for x in v) if v else "n/a"
            if isinstance(v, PerturbationState):
                return fmt(v.deltas)
            if isinstance(v, (float, np.floating)):
                return repr(float(v))
            return str(v)

        lines = [
            ("verdict", self.verdict),
            ("kind", self.kind),
            ("l_c", self.lc),
            ("l_d", self.ld),
            ("probes", self.probes),
            ("runs", self.runs),
            ("k", self.k_const),
            ("m", self.m_const),
            ("eigenvalues", self.eigenvalues),
            ("b0", self.b0),
            ("envelope_residual", self.envelope_residual),
            ("envelope_residual_gap_scaled", self.envelope_residual_gap_scaled),
            ("limit_utilities", self.limit_utilities),
            ("expected_limit_utility", self.expected_limit_utility),
            ("witness_epsilons", self.epsilons),
            ("witness_state", self.witness),
        ]
        out = [f"{key}: {fmt(value)}" for key, value in lines]
        out += [f"diagnostic: {d}" for d in self.diagnostics]
        return "\n".join(out) + "\n"


def _require_gapped(spec):
    if spec.kind == FULL:
        raise WrongKindError("needs a gapped structure")


def envelope_constant(spec: EquilibriumSpec) -> float:
    """Guaranteed exponential decay rate of the demand borders in a gap."""
    _require_gapped(spec)
    p = spec.params
    return p.epeq * spec.lc * p.a * p.g0 / 2.0


def admissible_delta(spec: EquilibriumSpec) -> float:
    """Largest perturbation size for which demand decay and supply confinement are guaranteed.

    The supply-drift condition ``delta^2 < L_C B0 / (ep eq a g0)`` reduces to
    ``delta < L_C / sqrt(2)``.
    """
    _require_gapped(spec)
    p = spec.params
    return min(1.0, (spec.lc - spec.ld) / 2.0, (p.reach - spec.ld) / 2.0, spec.lc / 4.0, spec.lc / math.sqrt(2.0))


def expected_limit_utility(spec: EquilibriumSpec) -> float:
    p = spec.params
    return p.epeq * spec.ld * (p.f0 * p.g0 - p.c)


_COMPONENT = {"dl": (0, 2), "dr": (1, 3)}


def envelope_check(traj: Trajectory, spec: EquilibriumSpec, delta0: float, component: str = "dl",
                   form: str = "initial") -> float:
    """Largest excess of ``|delta(t)|`` over the exponential envelope.

    ``form="initial"`` uses ``delta0 * exp(-B0 t)``; ``form="gap-scaled"`` uses
    ``(L_C - l_d) * B0 * exp(-B0 t)``. Passes when the result is at most 1e-6.
    """
    if component not in _COMPONENT:
        raise ValueError("component must be 'dl' or 'dr'")
    if form not in ("initial", "gap-scaled"):
        raise ValueError("form must be 'initial' or 'gap-scaled'")
    b0 = envelope_constant(spec)
    i_d, i_s = _COMPONENT[component]
    d = traj.deltas[:, i_d]
    limit = min(spec.lc - spec.ld, 2.0 * (spec.params.reach - spec.ld))
    if not abs(d[0]) < limit:
        raise PreconditionError(f"|delta_{component}(0)| = {abs(d[0])!r} not below {limit!r}")
    if abs(d[0]) > delta0:
        raise PreconditionError(f"delta0 = {delta0!r} smaller than |delta_{component}(0)| = {abs(d[0])!r}")
    s_max = float(np.max(np.abs(traj.deltas[:, i_s])))
    if not s_max < spec.lc / 2.0:
        raise PreconditionError(f"supply perturbation reached {s_max!r} >= L_C/2")
    scale = delta0 if form == "initial" else (spec.lc - spec.ld) * b0
    return float(np.max(np.abs(d) - scale * np.exp(-b0 * (traj.t - traj.t[0]))))


def neutral_limit_check(traj: Trajectory, spec: EquilibriumSpec):
    """Producer utilities of both communities at the final sample."""
    final = traj.final
    if not (abs(final.d_dl) < DEMAND_TOL and abs(final.d_dr) < DEMAND_TOL):
        raise NonConvergenceError(
            f"demand perturbations did not vanish: d_dl={final.d_dl!r}, d_dr={final.d_dr!r}", final.deltas)
    return producer_utilities(final, spec)


def witness_epsilons(k_const: float, m_const: float, probe_delta: float):
    """``(eps_d, eps_s)`` with ``K eps_s - M eps_d > 0``."""
    eps_s = probe_delta / 2.0
    eps_d = min(probe_delta / 2.0, k_const * probe_delta / (4.0 * m_const))
    return eps_d, eps_s


def instability_witness(spec: EquilibriumSpec, probe_delta: float) -> PerturbationState:
    """Symmetric initial perturbation of size below ``probe_delta`` that never decays."""
    if spec.kind != FULL:
        raise WrongKindError("the witness exists only for full-coverage structures")
    system = linear_coefficients(spec)
    if not system.k_const > 0.0 or abs(spec.lc - equilibrium_ld(spec.params)) <= NE_TOL:
        raise ValueError(f"no instability witness: K = {system.k_const!r} is not positive")
    if not 2.0 * spec.lc + probe_delta < 2.0 * equilibrium_ld(spec.params):
        raise ValueError("probe_delta too large: need 2*L_C + probe_delta < 2*l_star")
    eps_d, eps_s = witness_epsilons(system.k_const, system.m_const, probe_delta)
    d0 = 0.5 * (eps_d + probe_delta)
    s0 = 0.5 * (eps_s + probe_delta)
    return PerturbationState(0.0, d0, d0, s0, s0)


def _run(job):
    spec, initial, cfg, converge_on = job
    return integrate(initial, spec, dt=cfg.dt, t_max=cfg.t_max, eps_converged=cfg.eps_converged,
                     sample_stride=cfg.sample_stride, converge_on=converge_on)


def _run_all(jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run, jobs))
    return [_run(job) for job in jobs]


def sign_pattern_states(probe_delta: float):
    h = probe_delta / 2.0
    states = []
    for sdl in (h, -h):
        for sdr in (h, -h):
            for ss in (h, -h):
                states.append(PerturbationState(0.0, sdl, sdr, ss, ss))
    return states


def default_probe(spec: EquilibriumSpec) -> float:
    if spec.kind == FULL:
        # largest power of ten keeping 2 L_C + probe below 2 l_star
        room = 2.0 * (equilibrium_ld(spec.params) - spec.lc)
        if room <= 0.0:
            return 0.1
        probe = min(0.1, 10.0 ** math.floor(math.log10(room)))
        return probe if probe < room else probe / 10.0
    return admissible_delta(spec)


def classify(spec: EquilibriumSpec, probe_delta: float | None = None, config: IntegratorConfig | None = None,
             n_decades: int = 4, workers: int = 1) -> StabilityVerdict:
    """Classify an equilibrium as stable, neutral-stable, unstable or indeterminate.

    The probe size and the three decades below it are all tried.
    """
    if not is_equilibrium(spec):
        raise NotEquilibriumError(f"structure (L_C={spec.lc!r}, l_d={spec.ld!r}) is not a Nash equilibrium")
    cfg = config or IntegratorConfig()
    if probe_delta is None:
        probe_delta = default_probe(spec)
    if n_decades < 1:
        raise ValueError("n_decades must be >= 1")
    probes = [probe_delta / 10.0 ** k for k in range(n_decades)]
    if spec.kind == FULL:
        return _classify_full(spec, probes, cfg, workers)
    return _classify_gapped(spec, probes, cfg, workers)


def _classify_gapped(spec, probes, cfg, workers):
    adm = admissible_delta(spec)
    if not 0.0 < probes[0] <= adm:
        raise ValueError(f"probe_delta must lie in (0, {adm!r}] for this structure")
    b0 = envelope_constant(spec)
    expected = expected_limit_utility(spec)
    verdict = StabilityVerdict(NEUTRAL_STABLE, spec.kind, spec.lc, spec.ld, probes=probes, b0=b0,
                               expected_limit_utility=expected)
    jobs = [(spec, s, cfg, "demand") for probe in probes for s in sign_pattern_states(probe)]
    trajs = _run_all(jobs, workers)
    verdict.runs = len(trajs)

    ok = True
    supply_vanishes = True
    residuals, residuals_gap_scaled = [], []
    limits = []
    for (_, initial, _, _), traj in zip(jobs, trajs):
        tag = f"initial={initial.deltas!r}"
        if traj.termination == STATE_INVALID:
            ok = False
            verdict.diagnostics.append(f"{tag}: {traj.message}")
            continue
        s_max = float(np.max(np.abs(traj.deltas[:, 2:])))
        if not s_max < spec.lc / 2.0:
            ok = False
            verdict.diagnostics.append(f"{tag}: supply perturbation reached {s_max!r}")
        if float(np.max(np.abs(traj.deltas[-1, 2:]))) >= DEMAND_TOL:
            supply_vanishes = False
        try:
            u1, u2 = neutral_limit_check(traj, spec)
        except NonConvergenceError as exc:
            ok = False
            verdict.diagnostics.append(f"{tag}: {exc}")
            continue
        limits.append((u1, u2))
        if not (abs(u1 - u2) <= LIMIT_TOL and u1 > 0.0 and u2 > 0.0):
            ok = False
            verdict.diagnostics.append(f"{tag}: limit producer utilities {u1!r}, {u2!r} differ or vanish")
        for comp, col in (("dl", 0), ("dr", 1)):
            d0 = abs(initial.deltas[col])
            try:
                residuals.append(envelope_check(traj, spec, d0, comp))
                residuals_gap_scaled.append(envelope_check(traj, spec, d0, comp, form="gap-scaled"))
            except PreconditionError as exc:
                verdict.diagnostics.append(f"{tag}: envelope for {comp} skipped ({exc})")

    if residuals:
        verdict.envelope_residual = max(residuals)
        verdict.envelope_residual_gap_scaled = max(residuals_gap_scaled)
        if verdict.envelope_residual > ENVELOPE_TOL:
            verdict.diagnostics.append(f"envelope exceeded by {verdict.envelope_residual!r}")
    if limits:
        worst = max(limits, key=lambda u: abs(u[0] - expected) + abs(u[1] - expected))
        verdict.limit_utilities = (float(worst[0]), float(worst[1]))
    if not ok:
        verdict.verdict = INDETERMINATE
    elif supply_vanishes:
        verdict.verdict = STABLE
    return verdict


def _classify_full(spec, probes, cfg, workers):
    system = linear_coefficients(spec)
    verdict = StabilityVerdict(INDETERMINATE, spec.kind, spec.lc, spec.ld, probes=probes,
                               eigenvalues=system.eigenvalues, k_const=system.k_const, m_const=system.m_const)
    if abs(spec.lc - equilibrium_ld(spec.params)) <= NE_TOL or system.k_const <= 0.0:
        verdict.probes = []
        verdict.diagnostics.append("K = 0 at the threshold L_C = l_star; neither stability result applies")
        return verdict

    witnesses = [instability_witness(spec, probe) for probe in probes]
    trajs = _run_all([(spec, w, cfg, "all") for w in witnesses], workers)
    verdict.runs = len(trajs)
    verdict.witness = witnesses[0]
    verdict.epsilons = witness_epsilons(system.k_const, system.m_const, probes[0])

    diverged = True
    for probe, w, traj in zip(probes, witnesses, trajs):
        eps_d, _ = witness_epsilons(system.k_const, system.m_const, probe)
        d_min = float(np.min(traj.deltas[:, :2]))
        s_min = float(np.min(traj.deltas[:, 2:]))
        growth = float(np.max(traj.deltas[:, 2:])) / w.d_sl
        note = (f"probe={probe!r}: min delta_d={d_min!r} (eps_d={eps_d!r}), "
                f"min delta_s={s_min!r} (delta_s(0)={w.d_sl!r}), supply growth x{growth:.6g}, "
                f"ended {traj.termination} at t={float(traj.t[-1])!r}")
        verdict.diagnostics.append(note)
        if d_min < eps_d or s_min < w.d_sl or traj.termination not in ("reached_t_max", STATE_INVALID):
            diverged = False
    if diverged:
        verdict.verdict = UNSTABLE
    return verdict
