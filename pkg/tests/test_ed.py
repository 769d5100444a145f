import numpy as np
import pytest

from xxcentral import (
    ParentState,
    assemble_coefficients,
    build_charge,
    build_hamiltonian,
    check_solution,
    ed_analysis,
    enumerate_all_states,
    match_solutions,
    spin_operator,
)
from xxcentral.ed import MatchReport, SpinBasis, ed_expectations_at, generic_rg_charges, xx_limit_charges
from xxcentral.errors import InvalidDelta, MatchFailure, TooLarge
from xxcentral.solver import ChargeSolution

from conftest import small_model


def comm(a, b):
    return a @ b - b @ a


def test_spin_algebra():
    sx, sy, sz = (spin_operator(3, 1, a).matrix for a in "xyz")
    np.testing.assert_allclose(comm(sx, sy), 1j * sz, atol=1e-15)
    np.testing.assert_allclose(sx @ sx + sy @ sy + sz @ sz, 0.75 * np.eye(8), atol=1e-15)
    other = spin_operator(3, 2, "x").matrix
    assert np.abs(comm(sx, other)).max() == 0
    with pytest.raises(IndexError):
        spin_operator(3, 3, "x")
    with pytest.raises(ValueError):
        spin_operator(3, 0, "w")


def test_size_guard():
    with pytest.raises(TooLarge):
        SpinBasis(15)


def test_hamiltonian_is_hermitian_and_traceless(tilted_model):
    h = build_hamiltonian(tilted_model)
    assert h.hermiticity_error() < 1e-15
    assert abs(np.trace(h.matrix)) < 1e-12


def test_generic_charges_commute_with_anisotropic_couplings():
    rng = np.random.default_rng(7)
    eps = np.array([0.2, 0.7, 1.3, 2.1])
    charges = generic_rg_charges(eps, (1.4, 0.9, 0.0), 0.8, rng.normal(size=3))
    for a in range(4):
        for b in range(a + 1, 4):
            scale = np.linalg.norm(charges[a]) * np.linalg.norm(charges[b])
            assert np.linalg.norm(comm(charges[a], charges[b])) <= 1e-12 * scale


def test_xx_limit_charges_commute_with_h(tilted_model):
    charges = xx_limit_charges(tilted_model)
    np.testing.assert_array_equal(charges[0], build_hamiltonian(tilted_model).matrix)
    for r in charges[1:]:
        assert np.linalg.norm(comm(charges[0], r)) <= 1e-12 * np.linalg.norm(charges[0]) * np.linalg.norm(r)


def test_charge_forms_require_matching_delta(tilted_model):
    with pytest.raises(InvalidDelta):
        build_charge(tilted_model, 0, "generic_rg")
    with pytest.raises(InvalidDelta):
        build_charge(tilted_model.with_delta(0.1), 0, "xx_limit")
    r = build_charge(tilted_model.with_delta(0.1), 2, "generic_rg")
    assert r.hermiticity_error() < 1e-14


def test_central_generic_charge_tends_to_h(tilted_model):
    h = build_hamiltonian(tilted_model)
    dists = [(build_charge(tilted_model.with_delta(d), 0, "generic_rg") - h).norm() for d in (1e-2, 1e-4, 1e-6)]
    assert dists[0] > dists[1] > dists[2]


def test_ed_tuples_satisfy_quadratic_system(tilted_model):
    c = assemble_coefficients(tilted_model)
    for state in ed_analysis(tilted_model):
        assert check_solution(c, state.charge_tuple) < 1e-10
        assert np.all(np.linalg.norm(state.expectations, axis=1) <= 0.5 + 1e-12)


def test_ed_analysis_resolves_degeneracies():
    # uniform-looking field along z with g = 0: heavily degenerate spectrum
    params = small_model(3).with_g(0.0)
    states = ed_analysis(params)
    tuples = np.array([s.charge_tuple for s in states])
    assert len({tuple(np.round(t, 9)) for t in tuples}) == 8


def test_match_solutions_and_failures():
    params = small_model(3)
    ed = ed_analysis(params)
    sols = enumerate_all_states(params, params.g).solutions
    report = match_solutions(ed, sols)
    assert isinstance(report, MatchReport) and report.ok
    assert report.max_distance < 1e-10
    bad = list(sols)
    bad[0] = ChargeSolution(bad[0].r + 0.5, bad[0].g_value, 0.0, bad[0].parent, 0.0)
    with pytest.raises(MatchFailure) as info:
        match_solutions(ed, bad)
    assert info.value.outliers
    with pytest.raises(ValueError):
        match_solutions(ed, sols[:-1])


def test_ed_expectations_lookup(model5):
    sols = enumerate_all_states(model5, model5.g).solutions
    exps = ed_expectations_at(model5, sols[3].r)
    assert exps.shape == (5, 3)


def test_parent_state_is_continuously_connected(model5):
    # at tiny g the ED tuple nearest to a solver branch has the parent's signs
    p = model5.with_g(1e-4)
    sols = enumerate_all_states(p, p.g).solutions
    ed = ed_analysis(p)
    report = match_solutions(ed, sols)
    for i, j, _ in report.pairs:
        assert np.all(np.sign(ed[i].charge_tuple) == np.array(ParentState(sols[j].parent.signs).signs))
