import numpy as np
import pytest
import sympy as sp

from rwglobal.errors import ConfigurationError, NotInvertibleError, TruncationError
from rwglobal.series import (FLOAT, RATIONAL, DerivationForm, GradedSeries, d_M, d_x, d_xbar,
                             derivation_commutator, jet_algebra, matmul,
                             matrix_series_invert, series_derive)
from rwglobal.utils import Nterms, itermonomials, permutation_parity

alg = jet_algebra(2)


def gen(name, ring=FLOAT, c=1):
    return GradedSeries.generator(alg, name, ring=ring, coefficient=c)


def one(order=None, ring=FLOAT):
    return GradedSeries.constant(alg, 1, order=order, ring=ring)


def test_algebra_layout():
    assert alg.names == ['x0', 'x1', 'xb0', 'xb1', 'y0', 'y1', 'dx0', 'dx1', 'dxb0', 'dxb1']
    assert jet_algebra(2) is alg
    assert alg.locate("dx1") == (True, 1)
    with pytest.raises(ConfigurationError):
        alg.locate("z0")


def test_itermonomials_count():
    for nvars in range(1, 4):
        for order in range(4):
            assert len(itermonomials(nvars, order)) == Nterms(nvars, order)
    assert itermonomials(2, 1) == ((0, 0), (1, 0), (0, 1))


def test_permutation_parity():
    assert permutation_parity((0, 1, 2)) == 1
    assert permutation_parity((1, 0, 2)) == -1
    assert permutation_parity((1, 2, 0)) == 1


def test_odd_generators_anticommute():
    a, b = gen("dx0"), gen("dx1")
    assert (a * b + b * a).is_zero()
    assert (a * a).is_zero()
    assert (gen("x0") * a - a * gen("x0")).is_zero()


def test_koszul_sign_in_constructor():
    exps = (0,) * 6
    s = GradedSeries(alg, {(exps, (1, 0)): 1})
    assert s.equals(-(gen("dx0") * gen("dx1")))


def test_truncated_power():
    f = one(order=2, ring=RATIONAL) + gen("x0", RATIONAL)
    cube = f ** 3
    assert cube.order == 2
    assert cube.coefficient(((2, 0, 0, 0, 0, 0), ())) == 3
    assert cube.coefficient(((3, 0, 0, 0, 0, 0), ())) == 0
    assert len(cube) == 3


def test_left_and_right_derivatives():
    s = gen("dx0") * gen("dx1")
    assert s.derive("dx1").equals(-gen("dx0"))
    assert s.right_derive("dx1").equals(gen("dx0"))
    assert s.derive("dx0").equals(gen("dx1"))
    assert s.right_derive("dx0").equals(-gen("dx1"))


def test_odd_derivative_is_graded_leibniz():
    f = gen("dx0") * gen("y0") + gen("dxb1") * gen("x1", c=2)
    g = gen("dx1") * gen("y1") * gen("y0") + gen("dx0", c=3)
    lhs = (f * g).derive("dx0")
    rhs = f.derive("dx0") * g - f * g.derive("dx0")
    assert lhs.equals(rhs, tol=1e-12)


def test_exterior_derivatives():
    f = gen("x0") * gen("xb0") * gen("y1")
    expected = gen("dx0") * gen("xb0") * gen("y1") + gen("dxb0") * gen("x0") * gen("y1")
    assert d_M(f).equals(expected, tol=1e-12)
    h = gen("x0") ** 2 * gen("x1") * gen("xb1") + gen("x1") * gen("dxb0")
    assert d_x(d_x(h)).is_zero()
    assert d_xbar(d_xbar(h)).is_zero()
    assert (d_x(d_xbar(h)) + d_xbar(d_x(h))).is_zero()


def test_substitute():
    f = gen("x0") ** 2
    g = f.substitute({"x0": gen("x0") + gen("y0")})
    expected = gen("x0") ** 2 + gen("x0") * gen("y0") * 2 + gen("y0") ** 2
    assert g.equals(expected, tol=1e-12)
    with pytest.raises(ConfigurationError):
        f.substitute({"dx0": gen("x0")})


def test_rational_ring_is_exact():
    third = GradedSeries.constant(alg, sp.Rational(1, 3), ring=RATIONAL)
    total = third + third + third
    assert total.evaluate_at_origin() == 1
    assert RATIONAL.convert(0.5) == sp.Rational(1, 2)


def test_matrix_inversion():
    x0 = gen("x0", RATIONAL)
    y0 = gen("y0", RATIONAL)
    zero = GradedSeries.zero(alg, order=3, ring=RATIONAL)
    M = [[one(3, RATIONAL) + x0, zero + y0], [zero, one(3, RATIONAL)]]
    Minv = matrix_series_invert(M)
    product = matmul(M, Minv)
    for i in range(2):
        for j in range(2):
            target = one(ring=RATIONAL) if i == j else GradedSeries.zero(alg, ring=RATIONAL)
            assert product[i][j].truncate(3).equals(target)
    # 1 / (1 + x0) = 1 - x0 + x0^2 - x0^3
    assert Minv[0][0].coefficient(((3, 0, 0, 0, 0, 0), ())) == -1


def test_singular_matrix_raises():
    M = [[GradedSeries.zero(alg, order=2) + gen("x0")]]
    with pytest.raises(NotInvertibleError):
        matrix_series_invert(M)


def test_mismatched_algebras():
    other = GradedSeries.generator(jet_algebra(4), "x0")
    with pytest.raises(ConfigurationError):
        gen("x0") + other
    with pytest.raises(ConfigurationError):
        gen("x0") + gen("x0", RATIONAL)


def test_json_round_trip():
    s = (gen("x0") * gen("dxb1") * 0.5 + gen("y1") ** 2 * 2j).truncate(4)
    back = GradedSeries.from_json(s.to_json())
    assert back.order == 4
    assert back.equals(s, tol=1e-15)


def test_form_and_parity_degrees():
    s = gen("dx0") * gen("dxb1") * gen("y0")
    assert s.form_degree() == 2
    assert s.parity() == 0
    assert np.isclose(s.max_abs(), 1.0)
    with pytest.raises(ConfigurationError):
        (s + gen("dx0")).parity()


def test_derivation_commutator():
    r = lambda name: gen(name, RATIONAL)
    translation = DerivationForm([-r("dx0"), -r("dx1")])
    assert all(c.is_zero() for c in derivation_commutator(translation, translation).components)
    A = DerivationForm([r("y0") * r("dx0") + r("x1") * r("y1") * r("dxb1"), r("y1") ** 2 * r("dx1")])
    B = DerivationForm([r("y0") * r("dxb0"), r("y0") * r("y1") * r("dx0") - r("dx1")])
    AB = derivation_commutator(A, B)
    BA = derivation_commutator(B, A)
    assert AB.degree == 2
    # |A| |B| = 1: [A, B] = [B, A]
    for ab, ba in zip(AB.components, BA.components):
        assert (ab - ba).is_zero()
    assert not all(c.is_zero() for c in AB.components)


def test_series_derive_dispatch():
    f = gen("x0") * gen("y1") + gen("xb1") * gen("dx0")
    assert series_derive(f, "d_x").equals(d_x(f))
    assert series_derive(f, "d_M").equals(d_M(f))
    assert series_derive(f, "y1").equals(gen("x0"))


def test_resolved_orders():
    s = (one() + gen("x0") + gen("y0") * gen("y1")).truncate(2)
    assert s.resolved(1).equals(one() + gen("x0"))
    assert len(s.resolved(2)) == 3
    with pytest.raises(TruncationError):
        s.resolved(3)
