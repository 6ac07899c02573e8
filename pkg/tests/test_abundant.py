import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frobsia.abundant import (AbundantStructure, a1_rhs, a2_rhs, a2_rhs_closed_form, check_9B_identities,
                              check_A1, check_A2, check_A3, check_trace_free, digamma,
                              digamma_tensor, nine_b_residuals, perf_sq, ricci_closed_form,
                              verify_abundant)
from frobsia.exprfield import parse
from frobsia.tensorlab import (ricci_contraction, sym_project, trace_free_sym3)

BOX3 = [(0.05, 20.0)] * 3


def _digamma_loops(S, dt):
    """Termwise evaluation of digamma, one index tuple at a time."""
    n = len(dt)
    SS = np.array([[sum(S[y, a, b] * S[z, a, b] for a in range(n) for b in range(n))
                    for z in range(n)] for y in range(n)])
    F = np.zeros((n,) * 4)
    for x, y, z, w in itertools.product(range(n), repeat=4):
        v = sum(S[x, w, a] * S[y, z, a] for a in range(n))
        v += 3 * S[x, y, w] * dt[z] + S[x, y, z] * dt[w]
        if x == w:
            v += 4 / (n - 2) * SS[y, z] - 3 * sum(S[y, z, a] * dt[a] for a in range(n))
        F[x, y, z, w] = v
    return F


def _random_pair(rng, n):
    S = trace_free_sym3(sym_project(rng.normal(size=(n, n, n))))
    return S, rng.normal(size=n)


def test_digamma_two_routes(sw3):
    x = np.ones(3)
    F = digamma(sw3.abundant, x).data
    (S,) = sw3.abundant.S_tensor(x[None])
    (dt,) = sw3.abundant.t_derivatives(x[None], 1)
    np.testing.assert_allclose(F, _digamma_loops(S[0], dt[0]), atol=1e-14)
    # frozen spot values: S_111 = -6/5, S_112 = 3/5, dt = -3/5 (1,1,1)
    assert S[0, 0, 0, 0] == pytest.approx(-1.2)
    assert S[0, 0, 0, 1] == pytest.approx(0.6)
    np.testing.assert_allclose(dt[0], [-0.6] * 3)


def test_digamma_random_matches_loops(rng):
    for n in (3, 4, 5):
        S, dt = _random_pair(rng, n)
        np.testing.assert_allclose(digamma_tensor(S, dt), _digamma_loops(S, dt), atol=1e-12)


def test_digamma_zero_S(rng):
    assert not np.any(digamma_tensor(np.zeros((3, 3, 3)), rng.normal(size=3)))


def test_digamma_scaling(rng):
    S, dt = _random_pair(rng, 4)
    lin = digamma_tensor(S, dt) - digamma_tensor(S, np.zeros(4))
    quad = digamma_tensor(S, np.zeros(4))
    lam = 2.0
    np.testing.assert_allclose(digamma_tensor(lam * S, np.zeros(4)), lam ** 2 * quad, atol=1e-12)
    lin2 = digamma_tensor(lam * S, dt) - digamma_tensor(lam * S, np.zeros(4))
    np.testing.assert_allclose(lin2, lam * lin, atol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sw_axioms(n):
    from frobsia.catalog import get_entry

    A = get_entry(f"sw{n}").abundant
    X = A.sample()
    reps = verify_abundant(A, X)
    assert all(r.passed for r in reps), [(r.axiom, r.residual) for r in reps]
    a2 = reps[2]
    assert a2.details["forms_gap"] < 1e-10
    assert a2.details["perf_sq_residual"] < 1e-9
    a3 = reps[3]
    for key in ("weyl_residual", "ricci_residual", "reduced_residual"):
        assert a3.details[key] < 1e-9
    assert not a3.details["internal_error"]


def test_zero_structure_is_abundant():
    A = AbundantStructure(3, {}, parse("0", 3), BOX3)
    for r in verify_abundant(A, A.sample(10)):
        assert r.residual == 0.0


def test_constant_t_with_zero_S():
    A = AbundantStructure(3, {}, parse("2.5", 3), BOX3)
    X = A.sample(5)
    assert check_A2(A, X).residual == 0.0
    assert check_A1(A, X).residual == 0.0


def test_scaled_t_breaks_axioms(sw3):
    A = sw3.abundant
    bad = AbundantStructure(3, A.S_components, A.t * 2, A.domain)
    X = A.sample()
    assert check_A2(bad, X).residual > 1e-3
    assert check_A1(bad, X).residual > 1e-3
    assert not check_A3(bad, X).passed


def test_a2_hand_hessian(sw3):
    # t = -3/5 sum log x: d_ii t = 3 / (5 x_i^2)
    x = np.array([[1.0, 2.0, 3.0]])
    A = sw3.abundant
    dt, ddt = A.t_derivatives(x, 2)
    np.testing.assert_allclose(np.diag(ddt[0]), 3 / (5 * x[0] ** 2), rtol=1e-14)
    (S,) = A.S_tensor(x)
    np.testing.assert_allclose(a2_rhs(S, dt)[0], ddt[0], atol=1e-13)


def test_a1_rhs_is_trace_free(rng):
    S, dt = _random_pair(rng, 4)
    R = a1_rhs(S, dt)
    assert np.max(np.abs(np.einsum("aayw->yw", R))) < 1e-12
    np.testing.assert_allclose(R, np.transpose(R, (1, 0, 2, 3)), atol=1e-13)


def test_trace_free_check_flags_traceful_S():
    A = AbundantStructure(3, {(0, 0, 0): parse("1", 3)}, parse("0", 3), BOX3)
    assert not check_trace_free(A, A.sample(3)).passed


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2 ** 32 - 1))
def test_nine_b_identities_unconditional(n, seed):
    S, dt = _random_pair(np.random.default_rng(seed), n)
    r1, r2 = nine_b_residuals(S, dt)
    scale = 1 + np.sum(S * S) + dt @ dt
    assert np.max(np.abs(r1)) < 1e-11 * scale
    assert abs(r2) < 1e-11 * scale


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2 ** 32 - 1))
def test_ricci_closed_form_matches_contraction(n, seed):
    from frobsia.abundant import a3_tensor, b_tensor

    S, dt = _random_pair(np.random.default_rng(seed), n)
    ric = ricci_contraction(a3_tensor(b_tensor(S, dt)))
    np.testing.assert_allclose(9 * ric, ricci_closed_form(S, dt), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2 ** 32 - 1))
def test_a2_forms_agree_on_perf_sq_locus(n, seed):
    rng = np.random.default_rng(seed)
    S, dt = _random_pair(rng, n)
    # rescale dt so that |S|^2 = (n-1)(n+2)|dt|^2
    dt *= np.sqrt(np.sum(S * S) / ((n - 1) * (n + 2))) / np.linalg.norm(dt)
    assert abs(perf_sq(S, dt)) < 1e-10
    np.testing.assert_allclose(a2_rhs(S, dt), a2_rhs_closed_form(S, dt), atol=1e-10)


def test_9B_check_on_catalog(sw3):
    rep = check_9B_identities(sw3.abundant)
    assert rep.residual < 1e-11
