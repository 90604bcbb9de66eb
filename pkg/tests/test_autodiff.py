from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffchem import autodiff as ad
from diffchem.errors import DomainError, InputError, NonFiniteError, UnsupportedPrimitiveError

finite = st.floats(min_value=0.2, max_value=3.0, allow_nan=False)


def central(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_product_rule_matches_closed_form():
    x = ad.Dual(2.0, np.array([1.0]))
    y = x * x * 3.0 + 1.0 / x
    assert ad.primal(y) == pytest.approx(12.5)
    assert y.tangents[0] == pytest.approx(12.0 - 0.25)


@settings(max_examples=40, deadline=None)
@given(finite)
def test_elementary_derivatives_match_finite_differences(x):
    funcs = [
        lambda v: ad.exp(v) if ad.is_dual(v) else math.exp(v),
        lambda v: ad.log(v) if ad.is_dual(v) else math.log(v),
        lambda v: ad.sqrt(v) if ad.is_dual(v) else math.sqrt(v),
        lambda v: ad.erf(v) if ad.is_dual(v) else math.erf(v),
        lambda v: v ** 2.5,
        lambda v: 2.0 ** v,
        lambda v: v ** v,
        lambda v: abs(5.0 - v) / (v + 1.0),
    ]
    for f in funcs:
        d = f(ad.Dual(x, np.array([1.0])))
        assert d.tangents[0] == pytest.approx(central(f, x), rel=1e-6, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3))
def test_gradient_and_hessian_of_composite(xs):
    def f(v):
        a, b, c = v
        return ad.exp(a * b) / (1.0 + c * c) + ad.sqrt(a + b + c) * ad.log(b)

    def fp(v):
        a, b, c = v
        return math.exp(a * b) / (1.0 + c * c) + math.sqrt(a + b + c) * math.log(b)

    x0 = np.array(xs)
    g = ad.grad(f, x0)
    h = 1e-6
    fd = np.array([(fp(x0 + h * e) - fp(x0 - h * e)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-6)

    H = ad.hessian(f, x0, symmetrize=False)
    assert np.max(np.abs(H - H.T)) < 1e-10
    hh = 1e-4
    fdh = np.array([[(fp(x0 + hh * ei + hh * ej) - fp(x0 + hh * ei - hh * ej) - fp(x0 - hh * ei + hh * ej)
                      + fp(x0 - hh * ei - hh * ej)) / (4 * hh * hh) for ej in np.eye(3)] for ei in np.eye(3)])
    assert np.allclose(H, fdh, rtol=1e-4, atol=1e-4 * max(1.0, np.abs(fdh).max()))


def test_jacobian_rows_per_output():
    J = ad.jacobian(lambda v: [v[0] * v[1], v[0] + 2.0 * v[1], 3.0], [2.0, 5.0])
    assert np.allclose(J, [[5.0, 2.0], [1.0, 2.0], [0.0, 0.0]])


def test_dual_with_numpy_arrays():
    x = ad.Dual(1.5, np.array([1.0, 0.0]))
    a = np.array([1.0, 2.0]) * x
    assert all(ad.is_dual(v) for v in a)
    assert ad.primal(np.dot(np.array([1.0, 1.0]), a)) == pytest.approx(4.5)


def test_branching_uses_primal_only():
    x = ad.Dual(0.3, np.array([1.0]))
    assert x < 0.5 and x > 0.2 and not x == 0.4


def test_float_conversion_is_refused():
    with pytest.raises(UnsupportedPrimitiveError):
        float(ad.Dual(1.0, np.array([1.0])))


def test_domain_errors_and_nonfinite():
    with pytest.raises(DomainError):
        ad.grad(lambda v: ad.log(v[0] - v[0]), [1.0])
    with pytest.raises(NonFiniteError), np.errstate(over="ignore"):
        ad.grad(lambda v: v[0] * 1e308 * 10.0, [1.0])
    with pytest.raises(InputError):
        ad.DiffConfig(0)
    with pytest.raises(InputError):
        ad.DiffConfig(2, "sideways")


def test_magnitude_sees_nested_tangents():
    inner = ad.Dual(1.0, np.array([2.0]))
    outer_t = np.empty(1, dtype=object)
    outer_t[0] = ad.Dual(0.0, np.array([-7.0]))
    assert ad.magnitude(ad.Dual(inner, outer_t)) == 7.0
