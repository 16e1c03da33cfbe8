import math

import numpy as np
import pytest

from commstab.dynamics import PerturbationState, integrate
from commstab.equilibrium import EquilibriumSpec, WrongKindError
from commstab.model import ModelParams
from commstab.stability import (
    INDETERMINATE,
    NEUTRAL_STABLE,
    UNSTABLE,
    IntegratorConfig,
    NonConvergenceError,
    NotEquilibriumError,
    PreconditionError,
    admissible_delta,
    classify,
    default_probe,
    envelope_check,
    envelope_constant,
    instability_witness,
    neutral_limit_check,
    sign_pattern_states,
    witness_epsilons,
)

from conftest import base_params


def test_envelope_constant_examples(gapped_spec):
    assert envelope_constant(gapped_spec) == 0.5
    assert envelope_constant(EquilibriumSpec.build(base_params(ep=0.5, eq=2.0))) == 0.5
    assert envelope_constant(EquilibriumSpec.build(base_params(big_l=4.0))) == 1.0


def test_envelope_constant_rejects_full(full_spec):
    with pytest.raises(WrongKindError):
        envelope_constant(full_spec)
    with pytest.raises(WrongKindError):
        admissible_delta(full_spec)


def test_admissible_delta_examples(gapped_spec):
    assert admissible_delta(gapped_spec) == 0.25
    assert admissible_delta(EquilibriumSpec.build(base_params(big_l=8.0))) == 0.25
    eps = 1e-3
    near = EquilibriumSpec.build(base_params(big_l=2 * (0.5 + eps)))
    assert admissible_delta(near) == pytest.approx(eps / 2, rel=1e-9)


def test_envelope_check(gapped_spec):
    up = integrate(PerturbationState(0.0, 0.05, 0.0, 0.0, 0.0), gapped_spec, t_max=40.0)
    assert envelope_check(up, gapped_spec, 0.05) <= 1e-6
    down = integrate(PerturbationState(0.0, -0.05, 0.0, 0.0, 0.0), gapped_spec, t_max=40.0)
    assert envelope_check(down, gapped_spec, 0.05) <= 1e-6
    zero = integrate(PerturbationState(0.0, 0.0, 0.01, 0.0, 0.0), gapped_spec, t_max=5.0)
    assert envelope_check(zero, gapped_spec, 0.0) == 0.0
    right = integrate(PerturbationState(0.0, 0.0, -0.05, 0.0, 0.0), gapped_spec, t_max=40.0)
    assert envelope_check(right, gapped_spec, 0.05, component="dr") <= 1e-6


def test_gap_scaled_envelope_is_looser(gapped_spec):
    traj = integrate(PerturbationState(0.0, 0.05, 0.0, 0.0, 0.0), gapped_spec, t_max=40.0)
    # (L_C - l_d) B0 = 0.25 is looser than delta0 = 0.05 here
    assert envelope_check(traj, gapped_spec, 0.05, form="gap-scaled") < 0.0


def test_envelope_preconditions(gapped_spec):
    traj = integrate(PerturbationState(0.0, 0.05, 0.0, 0.0, 0.0), gapped_spec, t_max=1.0)
    with pytest.raises(PreconditionError):
        envelope_check(traj, gapped_spec, 0.01)
    wide = integrate(PerturbationState(0.0, 0.6, 0.0, 0.0, 0.0), gapped_spec, t_max=1.0)
    with pytest.raises(PreconditionError):
        envelope_check(wide, gapped_spec, 0.6)
    drift = integrate(PerturbationState(0.0, 0.05, 0.0, 0.6, 0.6), gapped_spec, t_max=1.0)
    with pytest.raises(PreconditionError):
        envelope_check(drift, gapped_spec, 0.05)
    with pytest.raises(ValueError):
        envelope_check(traj, gapped_spec, 0.05, component="sl")


def test_neutral_limit(gapped_spec):
    traj = integrate(PerturbationState(0.0, 0.05, 0.0, 0.0, 0.0), gapped_spec, t_max=50.0, converge_on="demand")
    u1, u2 = neutral_limit_check(traj, gapped_spec)
    assert u1 == pytest.approx(0.25, abs=1e-6) and u2 == pytest.approx(0.25, abs=1e-6)
    zero = integrate(PerturbationState(), gapped_spec)
    assert neutral_limit_check(zero, gapped_spec) == (0.25, 0.25)
    half = EquilibriumSpec.build(base_params(ep=0.5))
    assert neutral_limit_check(integrate(PerturbationState(), half), half) == (0.125, 0.125)


def test_neutral_limit_needs_convergence(gapped_spec):
    traj = integrate(PerturbationState(0.0, 0.05, 0.0, 0.0, 0.0), gapped_spec, t_max=1.0)
    with pytest.raises(NonConvergenceError) as info:
        neutral_limit_check(traj, gapped_spec)
    assert info.value.final_deltas[0] > 1e-6


def test_witness_examples(full_spec):
    assert witness_epsilons(0.2, 0.8, 0.01) == pytest.approx((0.000625, 0.005))
    assert witness_epsilons(0.5, 0.5, 0.01) == pytest.approx((0.0025, 0.005))
    w = instability_witness(full_spec, 0.01)
    assert w.d_dl == w.d_dr == pytest.approx(0.0053125)
    assert w.d_sl == w.d_sr == pytest.approx(0.0075)
    eps_d, eps_s = witness_epsilons(0.2, 0.8, 0.01)
    assert 0.2 * eps_s - 0.8 * eps_d > 0.0


def test_witness_errors(threshold_spec, full_spec, gapped_spec):
    with pytest.raises(ValueError):
        instability_witness(threshold_spec, 0.01)
    with pytest.raises(ValueError):
        instability_witness(full_spec, 0.3)
    with pytest.raises(WrongKindError):
        instability_witness(gapped_spec, 0.01)


def test_sign_patterns():
    states = sign_pattern_states(0.1)
    assert len(states) == 8
    assert len({s.deltas for s in states}) == 8
    assert all(abs(v) == 0.05 for s in states for v in s.deltas)
    assert all(s.d_sl == s.d_sr for s in states)


def test_default_probe(gapped_spec, full_spec):
    assert default_probe(gapped_spec) == 0.25
    assert default_probe(full_spec) == 0.1
    assert default_probe(EquilibriumSpec.build(base_params(big_l=0.96))) == 0.01


def test_classify_gapped(gapped_spec):
    v = classify(gapped_spec, 0.1)
    assert v.verdict == NEUTRAL_STABLE
    assert v.probes == [0.1, 0.01, 0.001, 0.0001]
    assert v.runs == 32
    assert v.limit_utilities == pytest.approx((0.25, 0.25), abs=1e-6)
    assert v.envelope_residual <= 1e-6
    assert v.b0 == 0.5


def test_classify_full(full_spec):
    v = classify(full_spec)
    assert v.verdict == UNSTABLE
    assert v.eigenvalues == pytest.approx((0.0472135955, -0.8472135955), abs=1e-9)
    assert v.witness is not None


def test_classify_threshold(threshold_spec):
    v = classify(threshold_spec)
    assert v.verdict == INDETERMINATE
    assert v.k_const == 0.0


def test_classify_rejects_non_equilibrium():
    with pytest.raises(NotEquilibriumError):
        classify(EquilibriumSpec.build(base_params(), ld=0.4))


def test_classify_rejects_large_probe(gapped_spec):
    with pytest.raises(ValueError):
        classify(gapped_spec, 0.3)


def test_classify_reports_short_horizon_as_indeterminate(gapped_spec):
    v = classify(gapped_spec, 0.1, IntegratorConfig(t_max=2.0), n_decades=1)
    assert v.verdict == INDETERMINATE
    assert any("did not vanish" in d for d in v.diagnostics)


def test_classify_is_deterministic(full_spec):
    assert classify(full_spec).to_report() == classify(full_spec).to_report()


def test_report_format(threshold_spec):
    text = classify(threshold_spec).to_report()
    assert text.startswith("verdict: indeterminate\n")
    assert "eigenvalues: 0.0, -1.0" in text
    assert all(": " in line for line in text.splitlines())


def test_parallel_matches_serial(gapped_spec):
    cfg = IntegratorConfig(t_max=5.0)
    serial = classify(gapped_spec, 0.1, cfg, n_decades=1)
    parallel = classify(gapped_spec, 0.1, cfg, n_decades=1, workers=2)
    assert serial.to_report() == parallel.to_report()


def test_supply_confined_below_half_width():
    p = ModelParams(1.0, 2.0, 0.5, 0.25, 0.5, 2.0, 3.0, 3)
    spec = EquilibriumSpec.build(p)
    delta = admissible_delta(spec)
    for s in sign_pattern_states(delta * 0.999):
        traj = integrate(s, spec, t_max=50.0, converge_on="demand")
        assert np.max(np.abs(traj.deltas[:, 2:])) < spec.lc / 2
    assert math.isclose(delta, 0.125)
