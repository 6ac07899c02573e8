import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frobsia.catalog import get_entry, sw_k_basis, sw_v_basis
from frobsia.exprfield import derivative_tensor, parse
from frobsia.prolongation import (ClosedFormKilling, ClosedFormPotential, IntegratedKilling,
                                  IntegratedPotential, KState, VState, bd_residual, geometry,
                                  integrate_basis, integrate_W, k_plugin_residual, k_rhs,
                                  k_seeds, killing_report, killing_symmetric_part,
                                  numerical_rank, v_hessian, v_plugin_residual, v_rhs, v_seeds)

GENERIC = np.array([[1.3, 2.1, 0.7], [3.2, 0.9, 1.8], [0.6, 1.1, 2.7], [2.2, 4.1, 1.4],
                    [1.7, 0.8, 3.3]])


@pytest.fixture(scope="module")
def v_basis3(sw3):
    return integrate_basis(sw3.abundant, np.ones(3), which="V")


@pytest.fixture(scope="module")
def k_basis3(sw3):
    return integrate_basis(sw3.abundant, np.ones(3), which="K")


def test_seeds():
    assert v_seeds(3).shape == (5, 5)
    K = k_seeds(4)
    assert K.shape == (10, 4, 4)
    assert np.all(K == np.swapaxes(K, 1, 2))


def test_flat_v_system_constant_coefficients(zero3):
    A = zero3.abundant
    geo = geometry(A, GENERIC[:1])
    # S = 0, t = 0: V_ij = (1/n) g_ij ΔV
    H = v_hessian(geo, np.zeros((1, 3, 1)), np.array([[6.0]]))
    np.testing.assert_allclose(H[0, :, :, 0], 2 * np.eye(3))


def test_trace_consistency(sw3, rng):
    geo = geometry(sw3.abundant, GENERIC)
    dV = rng.normal(size=(5, 3, 4))
    L = rng.normal(size=(5, 4))
    H = v_hessian(geo, dV, L)
    np.testing.assert_allclose(np.einsum("miis->ms", H), L, atol=1e-12)


def test_single_state_records(sw3):
    r = v_rhs(sw3.abundant, VState(np.ones(3), 1.0, np.zeros(3), 6.0))
    assert set(r) == {"dV", "hessV", "dlapV"}
    np.testing.assert_allclose(np.trace(r["hessV"]), 6.0)
    T = k_rhs(sw3.abundant, KState(np.ones(3), np.eye(3)))
    assert np.max(np.abs(T)) < 1e-14  # g is always Killing


@pytest.mark.parametrize("V", ["1", "x1^2 + x2^2 + x3^2", "1/x1^2", "1/x2^2", "1/x3^2"])
def test_sw_potentials_plug_in(sw3, V):
    rep = v_plugin_residual(sw3.abundant, parse(V, 3), GENERIC)
    assert rep.residual < 1e-10


@pytest.mark.parametrize("V", ["x1", "x1^2", "x1*x2"])
def test_non_potentials_fail(sw3, V):
    assert v_plugin_residual(sw3.abundant, parse(V, 3), GENERIC).residual > 1e-3


def test_zero_structure_potentials(zero3):
    for V in zero3.v_basis:
        assert v_plugin_residual(zero3.abundant, V, GENERIC).residual < 1e-12
    assert v_plugin_residual(zero3.abundant, parse("x1^2", 3), GENERIC).residual > 0.1


def test_sw_killing_plug_in(sw3):
    for K in sw_k_basis(3):
        assert k_plugin_residual(sw3.abundant, K, GENERIC).residual < 1e-9
    rep = killing_report(sw3.abundant, ClosedFormKilling(sw_k_basis(3)), GENERIC)
    assert rep.residual < 1e-13


def test_killing_derivative_matches_finite_differences(sw3):
    x = np.array([1.0, 2.0, 3.0])
    h = 1e-5
    geo_rhs = []
    for K in sw_k_basis(3):
        geo_rhs.append(k_rhs(sw3.abundant, KState(x, derivative_tensor(K, x[None], 0)[0][0])))
    for r, K in enumerate(sw_k_basis(3)):
        fd = np.zeros((3, 3, 3))
        for k in range(3):
            e = np.eye(3)[k] * h
            Kp = derivative_tensor(K, (x + e)[None], 0)[0][0]
            Km = derivative_tensor(K, (x - e)[None], 0)[0][0]
            fd[:, :, k] = (Kp - Km) / (2 * h)
        assert np.max(np.abs(geo_rhs[r] - fd)) < 1e-6


def test_v_basis_rank_and_span(sw3, v_basis3):
    assert v_basis3.rank == 5
    assert v_basis3.path_residual < 1e-8
    vals = v_basis3.states[:, 0, :]
    cf = np.stack([ClosedFormPotential(V).at(v_basis3.targets)["V"] for V in sw_v_basis(3)], 1)
    assert numerical_rank(np.hstack([vals, cf]))[0] == 5
    M = np.stack([ClosedFormPotential(V).at(GENERIC)["V"] for V in sw_v_basis(3)], 1)
    assert np.linalg.cond(M) < 1e6


def test_k_basis_rank_and_span(sw3, k_basis3):
    assert k_basis3.rank == 6
    assert k_basis3.path_residual < 1e-8
    m, d, s = k_basis3.states.shape
    vals = k_basis3.states.reshape(m * d, s)
    cf = ClosedFormKilling(sw_k_basis(3)).at(k_basis3.targets)["K"]  # (m, s, n, n)
    cf = np.moveaxis(cf, 1, -1).reshape(m * d, -1)
    assert numerical_rank(np.hstack([vals, cf]))[0] == 6


def test_integrated_killing_symmetric_part(sw3):
    fam = IntegratedKilling(sw3.abundant, np.ones(3), k_seeds(3))
    rep = killing_report(sw3.abundant, fam, GENERIC)
    assert rep.residual < 1e-12


def test_zero_structure_killing_constant(zero3):
    basis = integrate_basis(zero3.abundant, np.ones(3), which="K")
    assert basis.rank == 6
    np.testing.assert_allclose(basis.states, np.broadcast_to(basis.states[:1], basis.states.shape),
                               atol=1e-13)


def test_zero_structure_constant_seed(zero3):
    V = IntegratedPotential(zero3.abundant, np.ones(3), [1.0, 0, 0, 0, 0])
    vals = V.at(GENERIC)
    np.testing.assert_allclose(vals["V"], 1.0)
    assert not np.any(np.abs(vals["dV"]) > 1e-14)


def test_bertrand_darboux(sw3):
    A = sw3.abundant
    Vs = [IntegratedPotential(A, np.ones(3), y) for y in v_seeds(3)]
    fam = IntegratedKilling(A, np.ones(3), k_seeds(3))
    for V in Vs:
        assert bd_residual(A, V, fam, GENERIC[:3]).residual < 1e-8
    g = ClosedFormKilling(np.array([[parse("1" if i == j else "0", 3) for j in range(3)]
                                    for i in range(3)], dtype=object))
    assert bd_residual(A, ClosedFormPotential(parse("x1^3*x2 + x3", 3)), g, GENERIC).residual < 1e-13
    rot = ClosedFormKilling(sw_k_basis(3)[-1])  # (x2 dx3 - x3 dx2)^2
    assert bd_residual(A, ClosedFormPotential(parse("1/x1^2", 3)), rot, GENERIC).residual < 1e-13


def test_integrate_W_closed_form(sw3):
    A = sw3.abundant
    V = ClosedFormPotential(parse("2*(x1^2 + x2^2 + x3^2) + 3/x1^2", 3))
    K = ClosedFormKilling(sw_k_basis(3)[0])  # dx1 ⊗ dx1
    W, pres = integrate_W(A, V, K, np.ones(3), GENERIC)
    np.testing.assert_allclose(W[:, 0], 2 * GENERIC[:, 0] ** 2 + 3 / GENERIC[:, 0] ** 2 - 5,
                               atol=1e-9)
    assert pres < 1e-8


def test_integrate_W_identity_and_constant(zero3):
    A = zero3.abundant
    g = ClosedFormKilling(np.array([[parse("1" if i == j else "0", 3) for j in range(3)]
                                    for i in range(3)], dtype=object))
    V = ClosedFormPotential(parse("x1^2 + 2*x2", 3))
    W, _ = integrate_W(A, V, g, np.ones(3), GENERIC)
    np.testing.assert_allclose(W[:, 0], GENERIC[:, 0] ** 2 + 2 * GENERIC[:, 1] - 3, atol=1e-10)
    W0, _ = integrate_W(A, ClosedFormPotential(parse("4", 3)), g, np.ones(3), GENERIC)
    assert np.max(np.abs(W0)) == 0.0


def test_numerical_rank():
    assert numerical_rank(np.eye(3))[0] == 3
    assert numerical_rank(np.zeros((3, 3)))[0] == 0
    M = np.array([[1.0, 2.0], [2.0, 4.0 + 1e-12]])
    assert numerical_rank(M)[0] == 1


def test_bad_arguments(sw3):
    with pytest.raises(ValueError):
        integrate_basis(sw3.abundant, np.ones(3), which="X")
    with pytest.raises(ValueError):
        geometry(sw3.abundant, GENERIC, closure="other")
    with pytest.raises(ValueError):
        IntegratedPotential(sw3.abundant, np.ones(3), [1.0, 2.0])


def test_jets_closure_agrees(sw3):
    a = geometry(sw3.abundant, GENERIC, "axioms")
    j = geometry(sw3.abundant, GENERIC, "jets")
    for key in ("dS", "ddt"):
        np.testing.assert_allclose(a[key], j[key], atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=5, max_size=5))
def test_killing_symmetric_part_of_random_states(coeffs):
    from frobsia.catalog import get_entry as _get

    A = _get("sw3").abundant
    geo = geometry(A, GENERIC)
    K = np.einsum("s,sij->ij", np.resize(coeffs, 6), k_seeds(3))
    T = np.stack([k_rhs(A, KState(x, K)) for x in GENERIC])
    assert np.max(np.abs(killing_symmetric_part(T))) < 1e-12
    assert geo["S"].shape == (5, 3, 3, 3)


def test_v_and_k_ranks_n4():
    A = get_entry("sw4").abundant
    assert integrate_basis(A, np.ones(4), which="V").rank == 6
    assert integrate_basis(A, np.ones(4), which="K").rank == 10
