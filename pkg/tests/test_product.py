import itertools
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frobsia.catalog import get_entry
from frobsia.errors import IntegrabilityError
from frobsia.exprfield import parse
from frobsia.product import (ProductStructure, check_hessian_flatness, check_hessian_potential,
                             check_nabla_compat, check_trace_closed, check_wdvv, format_key,
                             normalize_components, parse_key, recover_potential, verify_product)

BOX3 = [(0.05, 20.0)] * 3


def _const_product(components, n=3):
    return ProductStructure(n, {k: parse(str(v), n) for k, v in components.items()},
                            [(-1.0, 1.0)] * n)


def _wdvv_brute(T):
    n = T.shape[0]
    worst = 0.0
    for i, j, k, l in itertools.product(range(n), repeat=4):
        lhs = sum(T[i, j, a] * T[a, k, l] for a in range(n))
        rhs = sum(T[j, k, a] * T[a, i, l] for a in range(n))
        worst = max(worst, abs(lhs - rhs))
    return worst


def test_keys():
    assert parse_key("112", 3) == (0, 0, 1)
    assert parse_key("1,10,10", 10) == (0, 9, 9)
    assert format_key((0, 9, 9), 10) == "1,10,10"
    assert format_key((0, 1, 2), 3) == "123"
    with pytest.raises(ValueError):
        parse_key("114", 3)


def test_normalize_components_rules():
    comps = normalize_components({"112": "x1", "111": "0"}, 3)
    assert list(comps) == [(0, 0, 1)]
    with pytest.raises(ValueError):
        normalize_components({"121": "1"}, 3, require_sorted=True)
    with pytest.raises(ValueError):
        normalize_components({"112": "1", "121": "2"}, 3)


def test_dimension_must_be_at_least_three():
    with pytest.raises(ValueError):
        ProductStructure(2, {}, [(0, 1)] * 2)


def test_symmetric_tensor_assembly():
    P = _const_product({"112": 1.0})
    (T,) = P.tensor(np.zeros((1, 3)))
    for idx in set(itertools.permutations((0, 0, 1))):
        assert T[(0,) + idx] == 1.0
    assert np.sum(T != 0) == 3


def test_wdvv_sw_brute_force(sw3):
    x = np.array([[1.0, 2.0, 3.0]])
    assert check_wdvv(sw3.product, x).residual == 0.0
    assert _wdvv_brute(sw3.product.tensor(x)[0][0]) == 0.0
    plus = get_entry("sw3-paper-sign").product
    assert check_wdvv(plus, x).residual == 0.0


def test_wdvv_zero_and_single_component():
    assert check_wdvv(_const_product({}), np.zeros((1, 3))).residual == 0.0
    P = _const_product({"112": 1.0})
    x = np.array([[0.3, -0.2, 0.5]])
    rep = check_wdvv(P, x)
    assert rep.residual == pytest.approx(_wdvv_brute(P.tensor(x)[0][0]))
    assert rep.residual == pytest.approx(1.0)
    assert not rep.passed


def test_nabla_compat_sign():
    ones = np.ones((1, 3))
    assert check_nabla_compat(get_entry("sw3").product, ones).residual < 1e-15
    rep = check_nabla_compat(get_entry("sw3-paper-sign").product, ones)
    # d_x (1/x) - (1/x)^2 = -2 at x = 1
    assert rep.residual == pytest.approx(2.0)
    assert rep.worst[0][1] in {(i, i, i, i) for i in range(3)}
    assert check_nabla_compat(_const_product({}), np.zeros((1, 3))).residual == 0.0


def test_trace_closed(sw3):
    X = np.array([[1.0, 2.0, 3.0], [0.5, 4.0, 1.5]])
    rep = check_trace_closed(sw3.product, X)
    assert rep.residual == 0.0
    assert rep.details["symmetric_residual"] < 1e-14
    assert check_trace_closed(_const_product({"112": 1.0, "333": -2.0}), X / 10).residual == 0.0


def test_trace_closed_reports_symmetric_part_for_non_p2():
    P = ProductStructure(3, {(0, 0, 1): parse("x1*x2", 3), (2, 2, 2): parse("x3^2", 3)}, BOX3)
    rep = check_trace_closed(P, np.array([[1.0, 2.0, 3.0]]))
    assert rep.details["symmetric_residual"] > 1.0


@pytest.mark.parametrize("sign", [1, -1])
def test_flatness(sign, sw3):
    X = sw3.product.sample(20)
    assert check_hessian_flatness(sw3.product, X, sign=sign).residual < 1e-12
    assert check_hessian_flatness(_const_product({}), np.zeros((1, 3)), sign=sign).residual == 0.0
    rep = check_hessian_flatness(_const_product({"112": 1.0}), np.zeros((1, 3)), sign=sign)
    assert rep.residual == pytest.approx(1.0)


def test_flatness_sign_validation(sw3):
    with pytest.raises(ValueError):
        check_hessian_flatness(sw3.product, sign=0)


def _phi_sw(x):
    return -np.sum(x ** 2 * np.log(x)) / 2


def test_recovered_potential_matches_closed_form(sw3):
    b = np.ones(3)
    end = np.array([2.0, 3.0, 2.0])
    rec = recover_potential(sw3.product, b, endpoints=end[None])
    # closed form minus its second-order Taylor polynomial at b
    g = -(b * np.log(b) + b / 2)
    H = -(np.log(b) + 1.5)
    d = end - b
    want = _phi_sw(end) - _phi_sw(b) - g @ d - 0.5 * np.sum(H * d * d)
    assert rec.phi[0] == pytest.approx(want, abs=1e-11)
    np.testing.assert_allclose(np.diag(rec.hess[0]), -np.log(end), atol=1e-11)
    assert rec.path_residual < 1e-8


def test_potential_of_zero_product_is_zero():
    P = ProductStructure(3, {}, BOX3)
    rec = recover_potential(P, np.ones(3), endpoints=np.array([[2.0, 3.0, 2.0]]))
    assert rec.phi[0] == 0.0 and not np.any(rec.hess)


def test_path_dependence_detected():
    P = ProductStructure(3, {(0, 0, 1): parse("x1*x3", 3)}, BOX3)
    with pytest.raises(IntegrabilityError) as err:
        recover_potential(P, np.ones(3), endpoints=np.array([[2.0, 3.0, 2.0]]))
    assert err.value.residual > 1e-8


def test_hessian_potential(sw3):
    X = np.array([[1.0, 1.0, 1.0], [2.0, 3.0, 2.0], [0.4, 7.0, 11.0]])
    assert check_hessian_potential(sw3.product, np.ones(3), X).residual < 1e-8
    phi = parse("-(x1^2*log(x1) + x2^2*log(x2) + x3^2*log(x3))/2", 3)
    assert check_hessian_potential(sw3.product, np.ones(3), X, phi=phi).residual < 1e-12
    bad = check_hessian_potential(sw3.product, np.ones(3), X, phi=phi + parse("x1^3/6", 3))
    assert bad.residual == pytest.approx(1.0)
    assert all(c == (0, 0, 0) for _, c in bad.worst)
    zero = ProductStructure(3, {}, BOX3)
    assert check_hessian_potential(zero, np.ones(3), X, phi=parse("x1^2 + 3*x2*x3", 3)).residual == 0.0


def test_verify_product_suite(sw3):
    reps = verify_product(sw3.product, sw3.product.sample(), basepoint=np.ones(3))
    assert [r.axiom for r in reps] == ["wdvv", "P2", "trace_closed", "flatness+", "flatness-",
                                       "hessian_potential"]
    assert all(r.passed for r in reps)


def test_report_shape(sw3):
    X = sw3.product.sample(7)
    rep = check_nabla_compat(sw3.product, X)
    d = rep.to_dict()
    assert len(d["per_point"]) == 7 and len(d["points"]) == 7
    assert set(d) >= {"axiom", "tol", "residual", "pass"}


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.sampled_from([3, 4]))
def test_diagonal_products_are_associative(coeffs, n):
    # P_iii = c_i / x_i: diagonal algebras are always associative
    comps = {(i, i, i): parse(f"{coeffs[i % 3]!r}/x{i + 1}", n) for i in range(n)}
    P = ProductStructure(n, comps, [(0.05, 20.0)] * n)
    assert check_wdvv(P, P.sample(5)).residual == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2).filter(lambda c: abs(c) > 1e-3), st.floats(0.2, 5))
def test_p2_forces_c_minus_one(c, x):
    P = ProductStructure(3, {(i, i, i): parse(f"{c!r}/x{i + 1}", 3) for i in range(3)}, BOX3)
    res = check_nabla_compat(P, np.full((1, 3), x)).residual
    # d(c/x) - (c/x)^2 = -(c + c^2)/x^2
    assert res == pytest.approx(abs(c + c * c) / x ** 2, rel=1e-12, abs=1e-15)


def test_symbolic_component_access(sw3):
    comp = sw3.product.component(0, 0, 0)
    assert str(comp.diff(0)) != ""
    assert sw3.product.component(1, 0, 0) is sw3.product.component(0, 0, 1)
