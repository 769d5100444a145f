import numpy as np
import pytest
from hypothesis import given, strategies as st

from xxcentral import (
    Classification,
    ParentState,
    assemble_coefficients,
    build_model,
    classify,
    ed_analysis,
    effective_field,
    make_distribution,
    observables_along,
    observables_at,
    purity_factor,
    track,
)
from xxcentral.errors import ExtrapolationUnstable
from xxcentral.observables import (
    bath_sz,
    clamp_to_spin_bound,
    extrapolate_bath_sz,
    field_derivative_rhs,
    regulated_solution,
    regulator_values,
    sensitivity,
)

from conftest import small_model


def nearest_ed(params, r):
    states = ed_analysis(params)
    return min(states, key=lambda s: np.max(np.abs(s.charge_tuple - r)))


@pytest.mark.parametrize("motif", ["--+", "-+", "+", "---++"])
def test_expectations_match_ed(tilted_model, motif):
    rec = observables_at(tilted_model, ParentState.from_motif(motif, 5), tilted_model.g)
    ref = nearest_ed(tilted_model, rec.solution.r)
    np.testing.assert_allclose(rec.expectations[:, :2], ref.expectations[:, :2], atol=1e-9)
    assert rec.expectations[0, 2] == pytest.approx(ref.expectations[0, 2], abs=1e-9)
    np.testing.assert_allclose(rec.expectations[1:, 2], ref.expectations[1:, 2], atol=1e-4)


def test_sensitivity_matches_finite_difference(tilted_model):
    parent = ParentState.from_motif("-+", 5)
    sol = track(tilted_model, parent, [tilted_model.g])[0]
    w = sensitivity(assemble_coefficients(tilted_model), sol, "Bx", tilted_model.field)
    h = 1e-6

    def solve_with(bx):
        f = np.array(tilted_model.field)
        f[0] = bx
        p = build_model_like(tilted_model, f)
        return track(p, parent, [p.g])[0].r

    fd = (solve_with(tilted_model.field[0] + h) - solve_with(tilted_model.field[0] - h)) / (2 * h)
    np.testing.assert_allclose(w, fd, atol=1e-6)


def build_model_like(params, field):
    from dataclasses import replace

    return replace(params, field=np.asarray(field))


def test_bz_rhs_at_zero_delta_only_touches_central(model5):
    v = field_derivative_rhs(assemble_coefficients(model5), "Bz0", model5.field)
    assert v[0] == pytest.approx(model5.field[2] / 2)
    np.testing.assert_array_equal(v[1:], 0.0)


def test_purity_and_effective_field():
    exps = np.array([[0.1, 0.2, -0.4], [0.05, 0.05, 0.1], [-0.1, 0.0, 0.3]])
    assert purity_factor(exps) == pytest.approx(0.21)
    p = build_model(make_distribution("sqrt_decreasing", 3, 1.0), 2.0, (0.3, 0.4, 0.5))
    b = effective_field(p, exps)
    gam = p.couplings
    assert b[0] == pytest.approx(0.3 + gam[0] * 0.05 - gam[1] * 0.1)
    assert b[1] == pytest.approx(0.4 + gam[0] * 0.05)
    assert b[2] == 0.5


def test_classify_examples():
    assert classify(0.25) is Classification.DARK
    assert classify(0.20) is Classification.BRIGHT
    assert classify(0.25 - 5e-7) is Classification.DARK
    assert classify(0.25 - 2e-6) is Classification.BRIGHT


def test_classify_accepts_records():
    p = small_model(6)
    rec = observables_at(p, ParentState.from_motif("--+", 6), 0.0, with_bath_sz=False)
    assert classify(rec, 1e-6, 1e-3) is Classification.DARK


def test_extrapolation_removes_polynomial_error():
    deltas = [1e-4, 2.5e-5, 6.25e-6]
    exact = np.array([0.1, -0.2])
    vals = [exact + 3.0 * np.sqrt(d) + 50.0 * d for d in deltas]
    np.testing.assert_allclose(extrapolate_bath_sz(vals, deltas), exact, atol=1e-12)
    two = extrapolate_bath_sz(vals[:2], deltas[:2])
    np.testing.assert_allclose(two, exact, atol=1e-2)
    with pytest.raises(ExtrapolationUnstable):
        extrapolate_bath_sz([np.array([0.4]), np.array([-0.4])], [1e-4, 2.5e-5])
    with pytest.raises(ValueError):
        extrapolate_bath_sz([np.array([0.1])], [1e-4])


def test_clamp_to_spin_bound():
    exps = np.array([[0.0, 0.0, 0.5], [0.3, 0.3, 0.26467]])
    out = clamp_to_spin_bound(exps)
    assert np.linalg.norm(out[1]) == pytest.approx(0.5)
    with pytest.raises(ExtrapolationUnstable):
        clamp_to_spin_bound(np.array([[0, 0, 0.5], [0.4, 0.4, 0.4]]))


def test_regulated_solution_is_continuous(model5):
    parent = ParentState.from_motif("--+", 5)
    sol = track(model5, parent, [model5.g])[0]
    d = regulator_values(model5)[0]
    reg = regulated_solution(model5, sol, d)
    assert reg.delta_value == d
    assert np.max(np.abs(reg.r - sol.r)) < 0.1
    with pytest.raises(ValueError):
        regulated_solution(model5, reg, d / 2)


def test_bath_sz_standalone_matches_tracker(model5):
    parent = ParentState.from_motif("-+", 5)
    rec = observables_at(model5, parent, 2 * model5.g)
    np.testing.assert_allclose(bath_sz(model5, parent, 2 * model5.g), rec.expectations[1:, 2], atol=1e-12)


@given(st.floats(0.05, 1.5), st.sampled_from(["--+", "-+", "+-", "+"]))
def test_invariants_hold(theta, motif):
    p = small_model(6, theta=theta)
    recs = observables_along(p, ParentState.from_motif(motif, 6), np.linspace(0, 6 * p.g, 5))
    for rec in recs:
        assert -1e-12 <= rec.gamma0 <= 0.25 + 1e-9
        assert np.all(np.linalg.norm(rec.expectations, axis=1) <= 0.5 + 1e-9)
        np.testing.assert_allclose(rec.expectations[:, 0], rec.expectations[:, 1], atol=1e-9)


def test_zero_coupling_is_product_state(model5):
    rec = observables_at(model5, ParentState.from_motif("-+", 5), 0.0)
    assert rec.gamma0 == pytest.approx(0.25, abs=1e-12)
    assert rec.g_tilde == 0.0
    np.testing.assert_allclose(np.linalg.norm(rec.expectations, axis=1), 0.5, atol=1e-4)
