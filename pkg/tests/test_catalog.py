import math

import numpy as np
import pytest

from frobsia.abundant import verify_abundant
from frobsia.catalog import (check_euler_unit, get_entry, list_entries, smorodinski_winternitz,
                             trivial_entries)
from frobsia.exprfield import eval_jet
from frobsia.product import check_nabla_compat, check_wdvv, verify_product


def test_sw_component_value():
    P = get_entry("sw3").product
    assert eval_jet(P.component(0, 0, 0), np.array([2.0, 1.0, 1.0]), 0).value == -0.5
    assert P.component(0, 0, 1).is_zero


def test_plus_sign_variant_flagged_and_failing():
    e = get_entry("sw3-paper-sign")
    assert e.flags["convention"] == "paper-example-box" and e.abundant is None
    assert check_nabla_compat(e.product, np.ones((1, 3))).residual == pytest.approx(2.0)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_t_at_e(n):
    t = get_entry(f"sw{n}").abundant.t
    x = np.ones(n)
    x[0] = math.e
    assert eval_jet(t, x, 0).value == pytest.approx(-3 / (n + 2), rel=1e-14)


@pytest.mark.parametrize("n", [3, 4])
def test_stored_pair_matches_correspondence(n):
    from frobsia.correspondence import product_to_abundant

    e = get_entry(f"sw{n}")
    A = product_to_abundant(e.product, np.ones(n)).structure
    X = e.product.sample(20)
    np.testing.assert_allclose(A.S_tensor(X)[0], e.abundant.S_tensor(X)[0], atol=1e-13)
    np.testing.assert_allclose(A.t_derivatives(X, 1)[0], e.abundant.t_derivatives(X, 1)[0],
                               atol=1e-13)


def test_euler_checks():
    e = get_entry("sw3")
    rep = check_euler_unit(e, np.array([[1.0, 2.0, 3.0], [2.0, 2.0, 2.0]]))
    assert rep.details["lie_g_minus_2g"] == 0.0
    assert rep.details["lie_P"] < 1e-12
    assert rep.details["unit_residual"] < 1e-12
    assert rep.details["unit_residual_opposite_sign"] == pytest.approx(2.0)
    plus = check_euler_unit(get_entry("sw3-paper-sign"), np.ones((1, 3)))
    assert plus.details["unit_residual"] < 1e-12  # +E is the unit there
    with pytest.raises(ValueError):
        check_euler_unit(get_entry("zero3"))


def test_zero_entry():
    e = get_entry("zero3")
    X = e.product.sample(10)
    for r in verify_product(e.product, X, basepoint=np.ones(3)) + verify_abundant(e.abundant, X):
        assert r.residual == 0.0
    assert len(e.v_basis) == 5 and len(e.k_basis) == 6


def test_pure_trace_entry_is_not_abundant():
    e = get_entry("puretrace3")
    assert e.flags["abundant"] is False
    X = e.product.sample(20)
    assert check_wdvv(e.product, X).residual == pytest.approx(5 / 9)
    assert not all(r.passed for r in verify_abundant(e.abundant, X))


def test_lookup():
    assert "sw4-paper-sign" in list_entries()
    assert [x.name for x in trivial_entries(4)] == ["zero4", "puretrace4"]
    with pytest.raises(KeyError):
        get_entry("nope")
    with pytest.raises(ValueError):
        smorodinski_winternitz(2)
