import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commstab.community import consumer_utility
from commstab.equilibrium import (
    FULL,
    GAPPED,
    EquilibriumSpec,
    WrongKindError,
    best_response_audit,
    check_ne_full,
    check_ne_gap,
    equilibrium_ld,
    is_equilibrium,
)
from commstab.model import ModelParams

from conftest import base_params


def test_equilibrium_ld_examples():
    assert equilibrium_ld(base_params()) == 0.5
    assert equilibrium_ld(ModelParams(1.0, 2.0, 0.5, 0.25)) == 0.25
    assert 0.0 < equilibrium_ld(base_params(c=1.0 - 1e-9)) < 1e-8


def test_spec_kind_and_centers():
    spec = EquilibriumSpec.build(base_params())
    assert (spec.lc, spec.ld, spec.kind) == (1.0, 0.5, GAPPED)
    assert list(spec.centers) == [-1.0, 1.0]
    full = EquilibriumSpec.build(base_params(big_l=0.8))
    assert (full.lc, full.ld, full.kind) == (0.4, 0.4, FULL)
    three = EquilibriumSpec.build(base_params(big_l=3.0, n_comm=3))
    assert np.allclose(three.centers, [-2.0, 0.0, 2.0])


def test_spec_validation():
    p = base_params()
    with pytest.raises(ValueError):
        EquilibriumSpec(0.9, 0.5, p)
    with pytest.raises(ValueError):
        EquilibriumSpec(1.0, 1.2, p)
    with pytest.raises(ValueError):
        EquilibriumSpec(1.0, 0.0, p)


def test_check_ne_full_examples():
    assert check_ne_full(EquilibriumSpec.build(base_params(big_l=0.8)))
    assert check_ne_full(EquilibriumSpec.build(base_params(big_l=1.0)))
    assert not check_ne_full(EquilibriumSpec.build(base_params(big_l=1.2), ld=0.6))


def test_check_ne_gap_examples():
    assert check_ne_gap(EquilibriumSpec.build(base_params()))
    assert not check_ne_gap(EquilibriumSpec.build(base_params(), ld=0.4))
    assert check_ne_gap(EquilibriumSpec.build(ModelParams(1.0, 2.0, 0.5, 0.25, big_l=2.0), ld=0.25))


def test_wrong_kind_rejected(gapped_spec, full_spec):
    with pytest.raises(WrongKindError):
        check_ne_full(gapped_spec)
    with pytest.raises(WrongKindError):
        check_ne_gap(full_spec)


def test_audit_confirms_gapped_equilibrium(gapped_spec):
    report = best_response_audit(gapped_spec)
    assert report.is_ne
    assert report.worst_violation <= 1e-9
    assert report.witnesses == []


def test_audit_rejects_narrow_demand():
    spec = EquilibriumSpec.build(base_params(), ld=0.4)
    report = best_response_audit(spec)
    assert not report.is_ne
    coord, move, gain = report.witnesses[0]
    assert gain > 0.0
    assert "joins" in move
    # the profitable joiner sits in [m_k + 0.4, m_k + 0.5) or its mirror
    offset = min(abs(coord - m) for m in spec.centers)
    assert 0.4 - 1e-12 <= offset < 0.5


def test_audit_rejects_wide_full_coverage():
    spec = EquilibriumSpec.build(base_params(big_l=1.2), ld=0.6)
    report = best_response_audit(spec)
    assert not report.is_ne
    assert "abstains" in report.witnesses[0][1]


def test_audit_confirms_full_coverage(full_spec, threshold_spec):
    assert best_response_audit(full_spec).is_ne
    assert best_response_audit(threshold_spec).is_ne


def test_audit_witnesses_sorted_and_capped():
    report = best_response_audit(EquilibriumSpec.build(base_params(), ld=0.3), max_witnesses=5)
    gains = [w[2] for w in report.witnesses]
    assert len(gains) == 5
    assert gains == sorted(gains, reverse=True)


def test_audit_arguments(gapped_spec):
    with pytest.raises(ValueError):
        best_response_audit(gapped_spec, n_samples=0)
    with pytest.raises(ValueError):
        best_response_audit(gapped_spec, grid_step=0.0)


def test_border_consumer_indifferent(gapped_spec):
    st_ = gapped_spec.pair_state()
    assert abs(consumer_utility(1, -1.0 + 0.5, st_)) <= 1e-10
    assert abs(consumer_utility(2, 1.0 - 0.5, st_)) <= 1e-10


def test_gap_agents_are_marginalized(gapped_spec):
    st_ = gapped_spec.pair_state()
    for y in np.linspace(-0.49, 0.49, 25):
        assert consumer_utility(1, y, st_) < 0.0 and consumer_utility(2, y, st_) < 0.0


def test_no_gap_without_marginalized_agents(full_spec):
    st_ = full_spec.pair_state()
    for y in np.linspace(-0.8, 0.79, 40):
        assert max(consumer_utility(1, y, st_), consumer_utility(2, y, st_)) >= 0.0


@given(st.floats(0.1, 0.9), st.floats(0.01, 0.4))
def test_equilibrium_ld_monotone(c, dc):
    p1, p2 = base_params(c=c), base_params(c=min(c + dc, 0.99))
    if p2.c > p1.c:
        assert equilibrium_ld(p2) < equilibrium_ld(p1)
    f_lo, f_hi = base_params(f0=0.95, c=0.5), base_params(f0=1.0, c=0.5)
    assert equilibrium_ld(f_lo) < equilibrium_ld(f_hi)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 0.8), st.floats(1.2, 3.0), st.sampled_from([2, 3]))
def test_analytic_condition_implies_audit(c, big_l, n):
    p = base_params(c=c, big_l=big_l * n / 2.0, n_comm=n)
    spec = EquilibriumSpec.build(p)
    assert is_equilibrium(spec)
    assert best_response_audit(spec, n_samples=400, grid_step=2e-3).is_ne
