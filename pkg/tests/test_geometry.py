import itertools

import numpy as np
import pytest
import sympy as sp

from rwglobal.errors import ConfigurationError
from rwglobal.geometry import (GeometryJet, connection_table, exp_cubic_reference,
                               flat_geometry, flatness_residual, geodesic_exp,
                               grothendieck, make_geometry, reference_table,
                               rtilde, taylor_tensor)
from rwglobal.opts import ConventionFlags
from rwglobal.series import RATIONAL, fiber_name

tol = 1e-10
seeds = [0, 1, 2]


def test_compatible_and_generic_modes():
    geo = make_geometry(1, 2, seed=3)
    assert geo.compatibility_defect() < 1e-12
    generic = make_geometry(1, 2, seed=3, compatible=False)
    assert generic.mode == "generic"
    assert generic.compatibility_defect() > 1e-3


def test_hyperkahler_mode():
    geo = make_geometry(1, 2, seed=5, mode="hyperkahler")
    assert geo.curvature_20_norm() < 1e-12
    assert np.abs(geo.vertex_tensor).max() > 1e-3
    assert geo.compatibility_defect() < 1e-12


def test_bad_parameters():
    with pytest.raises(ConfigurationError):
        make_geometry(0, 2)
    with pytest.raises(ConfigurationError):
        make_geometry(1, 2, mode="kahler")
    with pytest.raises(ConfigurationError):
        geodesic_exp(make_geometry(1, 1), 4)


def test_exponential_map_coefficients():
    for seed in range(20):
        geo = make_geometry(1, 3, seed=seed)
        phi = geodesic_exp(geo, 3)
        assert phi.check_invariants(tol)
        names = geo.fiber_names
        quadratic = np.array([taylor_tensor(p, names, 2) for p in phi.phi])
        assert np.abs(quadratic + 0.5 * geo.gamma_at_origin).max() < tol
        cubic = np.array([taylor_tensor(p, names, 3) for p in phi.phi])
        assert np.abs(cubic - exp_cubic_reference(geo)).max() < tol


def test_exponential_map_rational():
    geo = make_geometry(1, 2, seed=4, ring=RATIONAL)
    phi = geodesic_exp(geo, 3)
    assert phi.check_invariants(0.0)
    cubic = np.array([taylor_tensor(p, geo.fiber_names, 3) for p in phi.phi])
    assert np.abs(cubic - exp_cubic_reference(geo)).max() < 1e-12


def origin_coefficients(s, names):
    """Nonzero coefficients of the x = xb = 0 part of s, keyed by fiber exponents."""
    positions = [s.algebra.locate(nm)[1] for nm in names]
    out = {}
    for (exps, odds), c in s.items():
        if odds or any(e for p, e in enumerate(exps) if p not in positions):
            continue
        if c != 0:
            out[tuple(exps[p] for p in positions)] = c
    return out


def summed_coefficients(raw, dim, k):
    """Coefficients of sum_{s1..sk} raw(s1..sk) y^s1..y^sk."""
    out = {}
    for idx in itertools.product(range(dim), repeat=k):
        key = tuple(idx.count(s) for s in range(dim))
        out[key] = out.get(key, 0) + raw(*idx)
    return {key: c for key, c in out.items() if c != 0}


def test_exponential_map_exact():
    geo = make_geometry(1, 3, seed=4, ring=RATIONAL)
    dim, names = geo.dim, geo.fiber_names
    G = lambda i, j, k: geo.Gamma(i, j, k).evaluate_at_origin()
    dG = lambda i, j, k, c: geo.Gamma(i, j, k).derive(f"x{c}").evaluate_at_origin()
    phi = geodesic_exp(geo, 3)
    for i, p in enumerate(phi.phi):
        quadratic = summed_coefficients(lambda j, k: -sp.Rational(1, 2) * G(i, j, k), dim, 2)
        assert origin_coefficients(p.homogeneous_part(names, 2), names) == quadratic

        def cubic(c, j, k):
            return (-sp.Rational(1, 6) * dG(i, j, k, c)
                    + sp.Rational(1, 3) * sum(G(i, m, c) * G(m, j, k) for m in range(dim))
                    - sp.Rational(1, 24) * rtilde(geo, i, c, j, k).evaluate_at_origin())
        expected = summed_coefficients(cubic, dim, 3)
        assert expected
        assert origin_coefficients(p.homogeneous_part(names, 3), names) == expected


def test_grothendieck_exact_low_orders():
    geo = make_geometry(1, 3, seed=8, ring=RATIONAL)
    dim, names = geo.dim, geo.fiber_names
    R = grothendieck(geodesic_exp(geo, 3))
    G = lambda i, j, k: geo.Gamma(i, j, k).evaluate_at_origin()
    Rm = lambda a, k, b, c: geo.curvature_20[(a, k, b, c)].evaluate_at_origin()
    half, quarter, eighth = sp.Rational(1, 2), sp.Rational(1, 4), sp.Rational(1, 8)
    for a, i in itertools.product(range(dim), repeat=2):
        hol = R.component(a, i)
        antihol = R.component(dim + a, i)
        assert origin_coefficients(hol.homogeneous_part(names, 0), names) == \
            ({(0,) * dim: -1} if a == i else {})
        assert origin_coefficients(antihol.homogeneous_part(names, 0), names) == {}
        assert origin_coefficients(hol.homogeneous_part(names, 1), names) == \
            summed_coefficients(lambda s: -G(i, s, a), dim, 1)
        assert origin_coefficients(antihol.homogeneous_part(names, 1), names) == {}

        def hol2(s, t):
            total = quarter * Rm(i, s, a, t)
            for b, c in itertools.product(range(dim), repeat=2):
                total += eighth * geo.omega_inv[i][b] * geo.omega[s][c] * Rm(c, t, a, b)
            return total
        assert origin_coefficients(hol.homogeneous_part(names, 2), names) == \
            summed_coefficients(hol2, dim, 2)
        atiyah = lambda s, t: half * geo.atiyah(i, s, t, a).evaluate_at_origin()
        assert origin_coefficients(antihol.homogeneous_part(names, 2), names) == \
            summed_coefficients(atiyah, dim, 2)


def linear_key(s, name):
    exps = [0] * len(s.algebra.even)
    exps[s.algebra.locate(name)[1]] = 1
    return (tuple(exps), ())


def test_flat_exponential_map_is_linear():
    geo = flat_geometry(1, 3)
    phi = geodesic_exp(geo, 4)
    for i, p in enumerate(phi.phi):
        assert len(p) == 2
        assert p.coefficient(linear_key(p, f"x{i}")) == 1
        assert p.coefficient(linear_key(p, fiber_name(i))) == 1


def test_grothendieck_matches_reference():
    for symplectic in (True, False):
        geo = make_geometry(1, 3, seed=11)
        R = grothendieck(geodesic_exp(geo, 3, symplectic=symplectic))
        table = connection_table(R, max_k=2)
        reference = reference_table(geo, symplectic=symplectic)
        for key, arr in table.items():
            assert np.abs(arr - reference[key]).max() < tol, key


def test_atiyah_flag_and_redefinition():
    geo = make_geometry(1, 3, seed=12)
    R = grothendieck(geodesic_exp(geo, 3))
    full = ConventionFlags(atiyah_half=False)
    table = connection_table(R, full, max_k=2)
    reference = reference_table(geo, full)
    assert np.abs(2 * table[("antihol", 2)] - reference[("antihol", 2)]).max() < tol

    redef = ConventionFlags(redef_R=True)
    scaled = connection_table(R, redef, max_k=2)
    plain = connection_table(R, max_k=2)
    assert np.allclose(scaled[("hol", 2)], 6 * plain[("hol", 2)])
    assert np.abs(scaled[("hol", 2)] - reference_table(geo, redef)[("hol", 2)]).max() < 1e-9


def test_grothendieck_flatness():
    for seed in seeds:
        for compatible in (True, False):
            geo = make_geometry(1, 3, seed=seed, compatible=compatible)
            report = flatness_residual(grothendieck(geodesic_exp(geo, 3)))
            assert report.residual < 1e-9
            assert set(report.dcme) == {"dcme_1", "dcme_mixed", "dcme_4"}


def test_flat_geometry_flatness_is_exact():
    geo = flat_geometry(2, 2)
    report = flatness_residual(grothendieck(geodesic_exp(geo, 3)))
    assert report.residual == 0.0


def test_geometry_json_round_trip():
    geo = make_geometry(1, 2, seed=9, ring=RATIONAL)
    back = GeometryJet.from_json(geo.to_json())
    assert back.ring is RATIONAL
    assert back.mode == geo.mode
    for key, s in geo.gamma.items():
        assert back.Gamma(*key).equals(s)
