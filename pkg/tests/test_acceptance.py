"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL ...`` line (also when
pytest captures output) and then asserts. Run on its own with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np

from commstab.community import (
    CommunityPairState,
    consumer_utility,
    consumer_utility_oracle,
    optimal_content,
    optimal_content_oracle,
    producer_utility,
    producer_utility_oracle,
)
from commstab.dynamics import (
    REACHED_T_MAX,
    PerturbationState,
    border_utilities,
    integrate,
    linear_coefficients,
    linear_solution,
    producer_utilities,
)
from commstab.equilibrium import EquilibriumSpec, best_response_audit, equilibrium_ld
from commstab.model import ModelParams, torus_distance
from commstab.stability import (
    INDETERMINATE,
    NEUTRAL_STABLE,
    UNSTABLE,
    classify,
    instability_witness,
    neutral_limit_check,
    witness_epsilons,
)
from commstab.verify import FAIL, run_verification

# tolerances pinned from the acceptance criteria
AUDIT_TOL = 1e-9
ENVELOPE_TOL = 1e-6
DEMAND_TOL = 1e-6
LIMIT_TOL = 1e-6
EIGEN_TOL = 1e-9
ORACLE_REL_TOL = 1e-6
ARGMAX_TOL = 1e-3
LINEAR_TOL = 1e-6

PARAMS = dict(f0=1.0, a=1.0, g0=1.0, c=0.5, ep=1.0, eq=1.0)


def _params(big_l, n_comm=2):
    return ModelParams(big_l=big_l, n_comm=n_comm, **PARAMS)


def _report(n, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'} {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    assert ok, line


def _settle_time(t, values, tol):
    # first sample time from which |values| stays below tol
    above = np.flatnonzero(np.abs(values) >= tol)
    if not above.size:
        return float(t[0])
    return float(t[above[-1] + 1]) if above[-1] + 1 < len(t) else math.inf


def test_criterion_1_equilibrium_reproduction():
    p = _params(2.0)
    lstar = equilibrium_ld(p)
    spec = EquilibriumSpec.build(p, ld=lstar)
    audit = best_response_audit(spec)
    bad = best_response_audit(EquilibriumSpec.build(p, ld=0.4))
    ok = (lstar == 0.5 and spec.lc == 1.0 and audit.is_ne and audit.worst_violation <= AUDIT_TOL
          and not bad.is_ne and bad.witnesses and bad.witnesses[0][2] > 0.0)
    _report(1, ok, f"l*_d={lstar!r} worst_violation={audit.worst_violation:.3e} "
                   f"l_d=0.4 witness gain={bad.witnesses[0][2] if bad.witnesses else None!r}")


def test_criterion_2_gapped_neutral_stable():
    spec = EquilibriumSpec.build(_params(2.0))
    traj = integrate(PerturbationState(0.0, 0.05, 0.0, 0.0, 0.0), spec, t_max=50.0, converge_on="demand")
    t, dl = traj.t, traj.deltas[:, 0]
    envelope_excess = float(np.max(np.abs(dl) - 0.05 * np.exp(-0.5 * t)))
    reach = _settle_time(t, dl, DEMAND_TOL)
    supply_max = float(np.max(np.abs(traj.deltas[:, 2:])))
    u1, u2 = neutral_limit_check(traj, spec)
    verdict = classify(spec, 0.1)
    ok = (envelope_excess <= ENVELOPE_TOL and reach <= 40.0 and supply_max < 0.5
          and abs(u1 - 0.25) <= LIMIT_TOL and abs(u2 - 0.25) <= LIMIT_TOL
          and verdict.verdict == NEUTRAL_STABLE and verdict.probes == [1e-1, 1e-2, 1e-3, 1e-4])
    _report(2, ok, f"envelope excess={envelope_excess:.3e} |d_dl|<1e-6 from t={reach!r} max|d_s|={supply_max:.3e} "
                   f"limits=({u1!r}, {u2!r}) classify={verdict.verdict} probes={verdict.probes}")


def test_criterion_3_full_coverage_unstable():
    spec = EquilibriumSpec.build(_params(0.8))
    system = linear_coefficients(spec)
    lam_plus = system.eigenvalues[0]
    w = instability_witness(spec, 0.01)
    eps_d, _ = witness_epsilons(system.k_const, system.m_const, 0.01)
    traj = integrate(w, spec, t_max=50.0)
    d_min = float(np.min(traj.deltas[:, :2]))
    s_min = float(np.min(traj.deltas[:, 2:]))
    verdict = classify(spec, 0.1)
    ok = (abs(system.k_const - 0.2) <= 1e-12 and abs(system.m_const - 0.8) <= 1e-12
          and abs(lam_plus - 0.0472135955) <= EIGEN_TOL
          and abs(eps_d - 0.000625) <= 1e-15 and abs(w.d_sl - 0.0075) <= 1e-15
          and traj.termination == REACHED_T_MAX and d_min >= eps_d and s_min >= w.d_sl
          and verdict.verdict == UNSTABLE and min(verdict.probes) <= 1e-4)
    _report(3, ok, f"K={system.k_const!r} M={system.m_const!r} lambda+={lam_plus!r} min d_d={d_min:.6g} "
                   f"(eps_d={eps_d!r}) min d_s={s_min!r} classify={verdict.verdict} probes={verdict.probes}")


def test_criterion_4_oracle_equivalence():
    rng = np.random.default_rng(20241015)
    structures = [(_params(2.0), 1.0, 0.5), (_params(0.8), 0.4, 0.4),
                  (ModelParams(1.0, 2.0, 0.5, 0.25, 0.5, 2.0, 3.0, 3), 1.0, 0.25),
                  (ModelParams(0.9, 1.5, 0.8, 0.3, 0.8, 1.5, 0.75, 3), 0.25, 0.25)]
    worst_c = worst_p = worst_arg = 0.0
    for i in range(1000):
        p, lc, ld = structures[i % len(structures)]
        u = rng.uniform(-0.95, 0.95, size=4)
        st = CommunityPairState(lc, ld, 2 * ld * u[0], 2 * ld * u[1], 2 * lc * u[2], 2 * lc * u[3], p)
        which = 1 + i % 2
        y = rng.uniform(-p.big_l, p.big_l)
        v = consumer_utility(which, y, st)
        worst_c = max(worst_c, abs(v - consumer_utility_oracle(which, y, st, 1e-4)) / (1 + abs(v)))
        v = producer_utility(which, st)
        worst_p = max(worst_p, abs(v - producer_utility_oracle(which, st, 1e-4)) / (1 + abs(v)))
        if i < 200:
            gap = torus_distance(optimal_content(which, st), optimal_content_oracle(which, st, 1e-3), p.big_l)
            worst_arg = max(worst_arg, float(gap))
    ok = worst_c <= ORACLE_REL_TOL and worst_p <= ORACLE_REL_TOL and worst_arg <= ARGMAX_TOL
    _report(4, ok, f"consumer rel err={worst_c:.3e} producer rel err={worst_p:.3e} argmax gap={worst_arg:.3e}")


def test_criterion_5_linearization():
    spec = EquilibriumSpec.build(_params(0.8))
    system = linear_coefficients(spec)
    d0, s0 = 0.05, 0.025
    clipped = []

    def monitor(t, y, dy):
        st = PerturbationState(0.0, *y)
        if min(*border_utilities(st, spec), *producer_utilities(st, spec)) <= 0.0:
            clipped.append(t)

    traj = integrate(PerturbationState(0.0, d0, d0, s0, s0), spec, t_max=10.0, sample_stride=1,
                     eps_converged=0.0, monitor=monitor)
    d, s = linear_solution(system, d0, s0, traj.t)
    err = max(float(np.max(np.abs(traj.deltas[:, :2] - d[:, None]))),
              float(np.max(np.abs(traj.deltas[:, 2:] - s[:, None]))))
    ok = not clipped and math.isclose(traj.t[-1], 10.0) and err <= LINEAR_TOL
    _report(5, ok, f"max abs error={err:.3e} up to t={float(traj.t[-1])!r} clipping active={bool(clipped)}")


def test_criterion_6_invariant_suite():
    results = run_verification()
    wanted = ("trap", "bracketing", "border-nonnegativity", "symmetry", "supply-drift", "boundedness")
    failed = [f"{name}:{r.name}" for name, checks in results for r in checks if r.status == FAIL]
    passed = {r.name for _, checks in results for r in checks if r.status == "PASS"}
    missing = [w for w in wanted if w not in passed]
    ok = not failed and not missing
    _report(6, ok, f"{sum(len(c) for _, c in results)} checks, failed={failed} never-passed={missing}")


def test_criterion_7_threshold():
    spec = EquilibriumSpec.build(_params(1.0))
    system = linear_coefficients(spec)
    verdict = classify(spec)
    ok = spec.lc == 0.5 and system.k_const == 0.0 and verdict.verdict == INDETERMINATE
    _report(7, ok, f"L_C={spec.lc!r} K={system.k_const!r} verdict={verdict.verdict}")


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
