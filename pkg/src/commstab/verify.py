"""Self-check suite: closed forms against oracles and the trajectory invariants.

Each check returns a :class:`CheckResult`. Checks that do not apply to a
parameter set (wrong structure kind, threshold case) are reported as SKIP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .community import (
    CommunityPairState,
    consumer_utility,
    consumer_utility_oracle,
    optimal_content,
    optimal_content_oracle,
    producer_utility,
    producer_utility_oracle,
    state_problem,
)
from .dynamics import (
    REACHED_T_MAX,
    STATE_INVALID,
    PerturbationState,
    border_utilities,
    integrate,
    linear_coefficients,
    linear_solution,
    producer_utilities,
)
from .equilibrium import FULL, NE_TOL, EquilibriumSpec, equilibrium_ld
from .model import ModelParams, torus_distance
from .stability import (
    admissible_delta,
    envelope_check,
    envelope_constant,
    expected_limit_utility,
    instability_witness,
    neutral_limit_check,
    witness_epsilons,
)

PASS = "PASS"
FAIL = "FAIL"
SKIP = "SKIP"

ORACLE_TOL = 1e-6
ARGMAX_TOL = 1e-3
SIGN_TOL = 1e-10
TRAP_TOL = 1e-8
BRACKET_TOL = 1e-8
BORDER_TOL = 1e-8
DRIFT_TOL = 1e-10
ENVELOPE_TOL = 1e-6
LIMIT_TOL = 1e-6
MIRROR_TOL = 1e-9
LINEAR_TOL = 1e-6
SYMMETRY_TOL = 1e-9
HALVING_TOL = 1e-8

BUILTIN_SETS = {
    "gapped-a": ModelParams(1.0, 1.0, 1.0, 0.5, 1.0, 1.0, 2.0, 2),
    "gapped-b": ModelParams(1.0, 2.0, 0.5, 0.25, 0.5, 2.0, 3.0, 3),
    "full-a": ModelParams(1.0, 1.0, 1.0, 0.5, 1.0, 1.0, 0.8, 2),
    "full-b": ModelParams(0.9, 1.5, 0.8, 0.3, 0.8, 1.5, 0.75, 3),
}


@dataclass
class CheckResult:
    name: str
    status: str
    residual: float | None = None
    detail: str = ""
    tolerance: float | None = None

    def line(self) -> str:
        res = "" if self.residual is None else f" residual={self.residual:.3e}"
        if self.tolerance is not None:
            res += f" tol={self.tolerance:.0e}"
        detail = f" ({self.detail})" if self.detail else ""
        return f"{self.status} {self.name}{res}{detail}"


def _judge(name, residual, tol, detail=""):
    return CheckResult(name, PASS if residual <= tol else FAIL, residual, detail, tol)


def _skip(name, why="inapplicable"):
    return CheckResult(name, SKIP, None, f"skipped ({why})")


def random_states(spec: EquilibriumSpec, n: int, rng: np.random.Generator):
    """Valid perturbed pair states around ``spec`` with perturbations up to half the widths."""
    lc, ld = spec.lc, spec.ld
    states = []
    while len(states) < n:
        dl = rng.uniform(-ld, ld)
        dr = rng.uniform(-ld, ld)
        sl = rng.uniform(-lc, lc)
        sr = rng.uniform(-lc, lc)
        if state_problem(lc, ld, dl, dr, sl, sr) is None:
            states.append(CommunityPairState(lc, ld, dl, dr, sl, sr, spec.params))
    return states


def _ys(state, rng, k=3):
    big_l = state.params.big_l
    return rng.uniform(-big_l, big_l, size=k)


def check_oracles(spec, n_states=100, seed=0):
    rng = np.random.default_rng(seed)
    worst_c = worst_p = 0.0
    for st in random_states(spec, n_states, rng):
        for which in (1, 2):
            for y in _ys(st, rng):
                v = consumer_utility(which, y, st)
                worst_c = max(worst_c, abs(v - consumer_utility_oracle(which, y, st)) / (1.0 + abs(v)))
            v = producer_utility(which, st)
            worst_p = max(worst_p, abs(v - producer_utility_oracle(which, st)) / (1.0 + abs(v)))
    return [
        _judge("consumer-oracle", worst_c, ORACLE_TOL, f"max relative error {worst_c:.3e} over {n_states} states"),
        _judge("producer-oracle", worst_p, ORACLE_TOL, f"max relative error {worst_p:.3e} over {n_states} states"),
    ]


def check_argmax(spec, n_states=20, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for st in random_states(spec, n_states, rng):
        for which in (1, 2):
            gap = float(torus_distance(optimal_content(which, st), optimal_content_oracle(which, st),
                                       st.params.big_l))
            worst = max(worst, gap)
    return _judge("argmax", worst, ARGMAX_TOL, f"max distance to grid argmax {worst:.3e}")


def check_bounded_and_sign(spec, n_states=200, seed=2):
    rng = np.random.default_rng(seed)
    p = spec.params
    bound = p.epeq * 2.0 * p.big_l * max(p.c, p.g0 * p.f0)
    worst_bound = -math.inf
    sign_errors = 0
    two_lstar = 2.0 * equilibrium_ld(p)
    for st in random_states(spec, n_states, rng):
        for which in (1, 2):
            for y in _ys(st, rng):
                worst_bound = max(worst_bound, abs(consumer_utility(which, y, st)) - bound)
        u = consumer_utility(1, -st.lc + st.ld + st.d_dl, st)
        gap = 2.0 * st.ld + st.d_dl - two_lstar
        if gap < -SIGN_TOL and not u > 0.0 or gap > SIGN_TOL and not u < 0.0:
            sign_errors += 1
        if abs(gap) <= SIGN_TOL and abs(u) > 1e-8:
            sign_errors += 1
    # the equality case is exercised at the unperturbed structure
    if spec.kind != FULL:
        st = spec.pair_state()
        if abs(consumer_utility(1, -st.lc + st.ld, st)) > 1e-12:
            sign_errors += 1
    return [
        _judge("boundedness", worst_bound, 0.0, f"excess over bound {bound:.6g}"),
        CheckResult("sign-structure", PASS if sign_errors == 0 else FAIL, float(sign_errors),
                    f"{sign_errors} border utilities with the wrong sign"),
    ]


def _at_threshold(spec):
    return abs(spec.lc - equilibrium_ld(spec.params)) <= NE_TOL


def check_k_sign(spec):
    if spec.kind != FULL:
        return _skip("k-sign")
    system = linear_coefficients(spec)
    lstar = equilibrium_ld(spec.params)
    if abs(spec.lc - lstar) <= NE_TOL:
        return _skip("k-sign")
    lam_plus, lam_minus = system.eigenvalues
    ok = (system.k_const > 0.0) == (spec.lc < lstar) and system.m_const > 0.0
    ok = ok and (lam_plus > 0.0) == (system.k_const > 0.0) and lam_minus < 0.0
    return CheckResult("k-sign", PASS if ok else FAIL, None,
                       f"K={system.k_const:.6g} M={system.m_const:.6g} lambda+={lam_plus:.10g}")


class _Monitor:
    """Collects the worst value of ``fn(t, y, dy)`` over every right-hand-side evaluation."""

    def __init__(self, fn):
        self.fn = fn
        self.worst = -math.inf

    def __call__(self, t, y, dy):
        self.worst = max(self.worst, self.fn(t, y, dy))


def _gapped_size(spec):
    return min(0.05, admissible_delta(spec) / 2.0)


def check_trap(spec, dt):
    if spec.kind == FULL:
        return _skip("trap")
    two_lstar = 2.0 * equilibrium_ld(spec.params)
    ld = spec.ld
    h = _gapped_size(spec)
    mon = _Monitor(lambda t, y, dy: max(2.0 * ld + y[0] - two_lstar, 2.0 * ld - y[1] - two_lstar))
    traj = integrate(PerturbationState(0.0, -h, h, 0.0, 0.0), spec, dt=dt, t_max=20.0, monitor=mon)
    worst = mon.worst
    if traj.termination == STATE_INVALID:
        return CheckResult("trap", FAIL, worst, traj.message)
    return _judge("trap", worst, TRAP_TOL, "largest 2 l_d + delta - 2 l_star")


def check_bracketing(spec, dt):
    if spec.kind == FULL:
        return _skip("bracketing")
    h = _gapped_size(spec)
    traj = integrate(PerturbationState(0.0, h, -h, 0.0, 0.0), spec, dt=dt, t_max=20.0)
    dl, dr = traj.deltas[:, 0], traj.deltas[:, 1]
    worst = max(float(np.max(-dl)), float(np.max(dl - h)), float(np.max(dr)), float(np.max(-h - dr)))
    if traj.termination == STATE_INVALID:
        return CheckResult("bracketing", FAIL, worst, traj.message)
    return _judge("bracketing", worst, BRACKET_TOL, f"0 <= delta_dl <= {h!r}, -{h!r} <= delta_dr <= 0")


def _full_probe(spec):
    room = 2.0 * (equilibrium_ld(spec.params) - spec.lc)
    return min(0.01, room / 4.0)


def check_border_nonnegative(spec, dt):
    if spec.kind != FULL:
        return _skip("border-nonnegativity")
    if _at_threshold(spec):
        return _skip("border-nonnegativity")
    h = _full_probe(spec)

    def lowest(t, y, dy):
        st = PerturbationState(0.0, *y)
        u1l, _, _, u2r = border_utilities(st, spec)
        s1, s2 = producer_utilities(st, spec)
        return -min(u1l, u2r, s1, s2)

    mon = _Monitor(lowest)
    traj = integrate(PerturbationState(0.0, h, h, h, h), spec, dt=dt, t_max=10.0, monitor=mon)
    if traj.termination == STATE_INVALID:
        return CheckResult("border-nonnegativity", FAIL, mon.worst, traj.message)
    return _judge("border-nonnegativity", mon.worst, BORDER_TOL,
                  f"lowest own-community border utility {-mon.worst:.6g}")


def check_symmetry(spec, dt):
    if spec.kind != FULL:
        return _skip("symmetry")
    if _at_threshold(spec):
        return _skip("symmetry", "border utilities vanish at the threshold, no unclipped regime")
    h = _full_probe(spec)
    traj = integrate(PerturbationState(0.0, h, h, h, h), spec, dt=dt, t_max=10.0)
    d = traj.deltas
    worst = max(float(np.max(np.abs(d[:, 0] - d[:, 1]))), float(np.max(np.abs(d[:, 2] - d[:, 3]))))
    return _judge("symmetry", worst, SYMMETRY_TOL, f"max asymmetry {worst:.3e}")


def check_supply_drift(spec, dt):
    if spec.kind == FULL:
        return _skip("supply-drift")
    p = spec.params
    scale = p.epeq * p.a * p.g0 / 4.0
    h = _gapped_size(spec)

    def excess(t, y, dy):
        s1, s2 = producer_utilities(PerturbationState(0.0, *y), spec)
        if s1 <= 0.0 or s2 <= 0.0:
            return math.inf
        bound = scale * (y[0] ** 2 + y[1] ** 2)
        return max(abs(dy[2]), abs(dy[3])) - bound

    mon = _Monitor(excess)
    integrate(PerturbationState(0.0, h, -0.6 * h, 0.0, 0.0), spec, dt=dt, t_max=20.0, monitor=mon)
    return _judge("supply-drift", mon.worst, DRIFT_TOL, "|d delta_s/dt| against the quadratic bound")


def _gapped_run(spec, dt, initial, t_max=40.0):
    return integrate(initial, spec, dt=dt, t_max=t_max, converge_on="demand")


def check_envelopes(spec, dt):
    if spec.kind == FULL:
        return [_skip("envelope-upper"), _skip("envelope-lower")]
    h = _gapped_size(spec)
    b0 = envelope_constant(spec)
    upper = []
    for init, comp in ((PerturbationState(0.0, h, 0.0, 0.0, 0.0), "dl"),
                       (PerturbationState(0.0, 0.0, -h, 0.0, 0.0), "dr")):
        upper.append(envelope_check(_gapped_run(spec, dt, init), spec, h, comp))
    low_traj = _gapped_run(spec, dt, PerturbationState(0.0, -h, 0.0, 0.0, 0.0))
    low_res = envelope_check(low_traj, spec, h, "dl")
    d = low_traj.deltas[:, 0]
    env = h * np.exp(-b0 * low_traj.t)
    lower_ok = (np.all(d >= -env - ENVELOPE_TOL) and np.all(d <= BRACKET_TOL) and low_res <= ENVELOPE_TOL)
    return [
        _judge("envelope-upper", max(upper), ENVELOPE_TOL, f"B0={b0:.6g}, worst excess {max(upper):.3e}"),
        CheckResult("envelope-lower", PASS if lower_ok else FAIL, low_res,
                    f"negative start stays within -{h!r}*exp(-B0 t) and below 0", ENVELOPE_TOL),
    ]


def _mirror(state):
    return PerturbationState(state.t, -state.d_dr, -state.d_dl, -state.d_sr, -state.d_sl)


def check_neutral_and_mirror(spec, dt):
    if spec.kind == FULL:
        return [_skip("neutral-limit"), _skip("mirror")]
    h = _gapped_size(spec)
    init = PerturbationState(0.0, h, -0.5 * h, 0.5 * h, 0.5 * h)
    traj = _gapped_run(spec, dt, init)
    expected = expected_limit_utility(spec)
    try:
        u1, u2 = neutral_limit_check(traj, spec)
        err = max(abs(u1 - expected), abs(u2 - expected))
        neutral = _judge("neutral-limit", err, LIMIT_TOL, f"limits {u1:.12g}, {u2:.12g}; expected {expected:.12g}")
    except ValueError as exc:
        neutral = CheckResult("neutral-limit", FAIL, None, str(exc))
    mirrored = _gapped_run(spec, dt, _mirror(init))
    n = min(len(traj), len(mirrored))
    a = traj.deltas[:n]
    b = mirrored.deltas[:n][:, [1, 0, 3, 2]]
    worst = float(np.max(np.abs(a + b)))
    mirror = _judge("mirror", worst, MIRROR_TOL, f"max mismatch {worst:.3e}")
    return [neutral, mirror]


def check_linear(spec, dt):
    if spec.kind != FULL:
        return _skip("rk4-vs-linear")
    if _at_threshold(spec):
        return _skip("rk4-vs-linear", "border utilities vanish at the threshold, no unclipped regime")
    system = linear_coefficients(spec)
    lstar = equilibrium_ld(spec.params)
    # largest size that keeps every clipping branch inactive on both built-in sets
    size = min(0.05, (lstar - spec.lc) / 2.0)
    d0, s0 = size, 0.5 * size

    def clipped(t, y, dy):
        u = border_utilities(PerturbationState(0.0, *y), spec)
        s = producer_utilities(PerturbationState(0.0, *y), spec)
        return 1.0 if min(*u, *s) <= 0.0 else 0.0

    mon = _Monitor(clipped)
    traj = integrate(PerturbationState(0.0, d0, d0, s0, s0), spec, dt=dt, t_max=10.0, sample_stride=1,
                     eps_converged=0.0, monitor=mon)
    d_lin, s_lin = linear_solution(system, d0, s0, traj.t)
    err = max(float(np.max(np.abs(traj.deltas[:, 0] - d_lin))), float(np.max(np.abs(traj.deltas[:, 2] - s_lin))))
    if mon.worst > 0.0:
        return CheckResult("rk4-vs-linear", FAIL, err, "a clipping branch became active")
    if traj.termination != REACHED_T_MAX or traj.t[-1] < 10.0 - 1e-9:
        return CheckResult("rk4-vs-linear", FAIL, err, f"integration stopped early: {traj.termination}")
    return _judge("rk4-vs-linear", err, LINEAR_TOL, f"max abs error {err:.3e} up to t=10, dt={dt!r}")


def check_witness(spec, dt, probes=(1e-1, 1e-2, 1e-3, 1e-4)):
    if spec.kind != FULL or _at_threshold(spec):
        return _skip("witness-divergence")
    system = linear_coefficients(spec)
    lstar = equilibrium_ld(spec.params)
    worst = -math.inf
    used = []
    for probe in probes:
        if not 2.0 * spec.lc + probe < 2.0 * lstar:
            continue
        w = instability_witness(spec, probe)
        eps_d, _ = witness_epsilons(system.k_const, system.m_const, probe)
        traj = integrate(w, spec, dt=dt, t_max=50.0)
        if traj.termination not in (REACHED_T_MAX, STATE_INVALID):
            return CheckResult("witness-divergence", FAIL, None, f"probe {probe!r} ended {traj.termination}")
        worst = max(worst, eps_d - float(np.min(traj.deltas[:, :2])), w.d_sl - float(np.min(traj.deltas[:, 2:])))
        used.append(probe)
    if not used:
        return _skip("witness-divergence", "no probe meets the smallness condition")
    return _judge("witness-divergence", worst, 0.0, f"largest shortfall below the lower bounds, probes {used}")


def check_dt_halving(spec, dt):
    if spec.kind == FULL:
        if _at_threshold(spec):
            init = PerturbationState(0.0, 0.01, 0.01, 0.01, 0.01)
        else:
            init = instability_witness(spec, _full_probe(spec) * 2.0)
        kwargs = dict(t_max=50.0)
    else:
        init = PerturbationState(0.0, _gapped_size(spec), 0.0, 0.0, 0.0)
        kwargs = dict(t_max=40.0, converge_on="demand")
    coarse = integrate(init, spec, dt=dt, sample_stride=10, **kwargs)
    fine = integrate(init, spec, dt=dt / 2.0, sample_stride=20, **kwargs)
    # compare the samples both runs recorded at the same time
    idx = np.minimum(np.searchsorted(fine.t, coarse.t), len(fine.t) - 1)
    same = np.abs(fine.t[idx] - coarse.t) <= 1e-9
    if same.sum() < 2:
        return CheckResult("dt-halving", FAIL, None, "no common sample times")
    worst = float(np.max(np.abs(coarse.deltas[same] - fine.deltas[idx[same]])))
    return _judge("dt-halving", worst, HALVING_TOL, f"max change {worst:.3e} from dt={dt!r} to {dt / 2.0!r}")


def run_checks(spec: EquilibriumSpec, dt: float = 1e-3, n_oracle_states: int = 100):
    out = []
    out += check_oracles(spec, n_oracle_states)
    out.append(check_argmax(spec))
    out += check_bounded_and_sign(spec)
    out.append(check_k_sign(spec))
    out.append(check_trap(spec, dt))
    out.append(check_bracketing(spec, dt))
    out.append(check_border_nonnegative(spec, dt))
    out.append(check_supply_drift(spec, dt))
    out += check_envelopes(spec, dt)
    out += check_neutral_and_mirror(spec, dt)
    out.append(check_linear(spec, dt))
    out.append(check_symmetry(spec, dt))
    out.append(check_witness(spec, dt))
    out.append(check_dt_halving(spec, dt))
    return out


def run_verification(config=None, dt: float | None = None, n_oracle_states: int = 100):
    """Run every check on the built-in parameter sets, or on ``config`` alone.

    Returns ``[(set_name, [CheckResult, ...]), ...]``.
    """
    if config is not None:
        step = dt if dt is not None else config.dt
        return [("config", run_checks(config.spec(), step, n_oracle_states))]
    step = dt if dt is not None else 1e-3
    return [(name, run_checks(EquilibriumSpec.build(p), step, n_oracle_states)) for name, p in BUILTIN_SETS.items()]


def all_passed(results) -> bool:
    return all(r.status != FAIL for _, checks in results for r in checks)
