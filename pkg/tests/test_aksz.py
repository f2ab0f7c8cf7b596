import pytest

from rwglobal.aksz import (MODELS, FiniteDgModel, FiniteModelField, action_degree_table,
                           boundary_model, bv_bracket, bv_laplacian, cohomology_model,
                           dcme_residuals, default_model, get_model, kinetic_action,
                           mdcme_boundary_term, nilpotency_suite, omega0_apply,
                           qgbfv_operator, split_action_eval, surface_model, term_degrees)
from rwglobal.errors import ConfigurationError, TruncationError
from rwglobal.geometry import flat_geometry, make_geometry
from rwglobal.graphs import enumerate_bfv
from rwglobal.series import RATIONAL, GradedSeries

tol = 1e-9


def test_models_are_consistent():
    for name in MODELS:
        model = get_model(name)
        defects = model.check()
        assert all(v == 0 for v in defects.values()), (name, defects)
        model.validate()
    assert boundary_model().has_boundary
    assert not default_model().has_boundary
    with pytest.raises(ConfigurationError):
        get_model("torus")


def test_model_build_errors():
    basis = [("1", 0), ("a", 1), ("b", 2), ("v", 3)]
    with pytest.raises(ConfigurationError, match="both orders"):
        FiniteDgModel.build("twice", basis, [("a", "b", "v", 1), ("b", "a", "v", 1)], [], {"v": 1})
    with pytest.raises(ConfigurationError, match="unknown basis element"):
        FiniteDgModel.build("typo", basis, [("a", "c", "v", 1)], [], {"v": 1})
    with pytest.raises(ConfigurationError, match="implicit"):
        FiniteDgModel.build("unit", basis, [("1", "a", "a", 1)], [], {"v": 1})


def test_graded_commutativity_completion():
    model = default_model()
    a, b, v = model.index("a"), model.index("b"), model.index("v")
    assert model.multiply(a, b) == {v: 1}
    assert model.multiply(b, a) == {v: 1}
    ea = model.index("ea")
    assert model.multiply(ea, a) == {}


def test_model_json_round_trip():
    model = default_model()
    back = FiniteDgModel.from_json(model.to_json())
    assert back.basis == model.basis
    assert back.product == model.product
    assert back.differential == model.differential
    assert back.trace == model.trace


def test_degree_table():
    field = FiniteModelField(default_model(), 1)
    rows = {r["coordinate"]: r for r in field.degree_table()}
    assert rows["A0_a"]["ghost_degree"] == -1
    assert rows["B0_b"]["form_degree"] == 1
    assert rows["B0_b"]["total_degree"] == 2
    boundary = FiniteModelField(boundary_model(), 1, boundary=True)
    assert {r["total_degree"] for r in boundary.degree_table() if r["field"] == "B"} == {1}


def test_kinetic_action():
    field = FiniteModelField(default_model(), 1)
    g = field.generator
    expected = g("B0_b") * g("A0_a") + g("B0_eb") * g("A0_ea")
    assert kinetic_action(field).equals(expected, tol=1e-12)


def test_flat_split_action():
    model = default_model()
    geo = flat_geometry(1, 3)
    field = FiniteModelField(model, 1)
    g = field.generator
    S = split_action_eval(model, geo, field)
    expected = kinetic_action(field) - g("dx0") * g("B0_1") + g("dx1") * g("A0_ev")
    assert S.equals(expected, tol=1e-12)


def test_bracket_of_kinetic_action_vanishes():
    field = FiniteModelField(default_model(), 1)
    S = kinetic_action(field)
    assert bv_bracket(S, S, field).is_zero()
    g = field.generator
    F = g("A0_1") * g("A0_a") + g("A0_e") ** 2
    G = g("A0_b") * g("A0_ea")
    assert bv_bracket(F, G, field).is_zero()


def cohomology_functionals():
    field = FiniteModelField(cohomology_model(), 1, ring=RATIONAL)
    g = field.generator
    # F and H even, G odd
    F = g("A0_1") ** 2 * g("B0_alpha") + g("A0_alpha") * g("B0_1") + g("A0_beta") * g("B0_omega")
    G = g("A0_alpha") * g("A0_beta") + g("B0_beta") * g("A0_1") + g("B0_1")
    H = g("A0_1") * g("B0_omega") + g("A0_omega") * g("B0_beta") * g("B0_alpha")
    return field, F, G, H


def test_bracket_graded_antisymmetry():
    field, F, G, H = cohomology_functionals()
    assert (bv_bracket(F, G, field) + bv_bracket(G, F, field)).is_zero()
    assert (bv_bracket(F, H, field) - bv_bracket(H, F, field)).is_zero()
    assert bv_bracket(G, G, field).is_zero()


def test_bracket_jacobi():
    field, F, G, H = cohomology_functionals()
    b = lambda x, y: bv_bracket(x, y, field)
    assert (b(F, b(G, H)) - b(b(F, G), H) - b(G, b(F, H))).is_zero()


def test_laplacian_on_pairs():
    field = FiniteModelField(cohomology_model(), 1, ring=RATIONAL)
    g = field.generator
    even = bv_laplacian(g("A0_1") * g("B0_1"), field.pairs)
    odd = bv_laplacian(g("A0_alpha") * g("B0_alpha"), field.pairs)
    assert even.evaluate_at_origin() == 1
    assert odd.evaluate_at_origin() == -1
    assert field.residual_pairs() == field.pairs


def test_omega0_on_surface():
    field = FiniteModelField(surface_model(), 1, boundary=True)
    out = omega0_apply(field.generator("AA0_e"), field)
    assert out.equals(field.generator("AA0_c", coefficient=-1j), tol=1e-15)
    with pytest.raises(ConfigurationError):
        omega0_apply(field.generator("AA0_e"), FiniteModelField(surface_model(), 1))


def test_nilpotency_suite():
    report = nilpotency_suite(seed=3)
    assert set(report) == {"laplacian", "omega0", "d_x", "d_xbar", "delta", "delta_inv", "homotopy"}
    assert all(v == 0 for v in report.values()), report


def test_dcme_flat_and_compatible():
    flat = dcme_residuals(default_model(), flat_geometry(1, 3))
    assert flat.residual < tol
    for seed in (0, 1):
        report = dcme_residuals(default_model(), make_geometry(1, 3, seed=seed))
        assert report.residual < tol
        assert max(report.target.values()) < tol


def test_dcme_perturbation_breaks_flatness():
    report = dcme_residuals(default_model(), make_geometry(1, 3, seed=2), perturbation=0.1)
    assert report.residual > 1e-3
    assert report.to_dict()["perturbation"] == 0.1


def test_dcme_errors():
    geo = make_geometry(1, 2, seed=0)
    with pytest.raises(ConfigurationError):
        dcme_residuals(boundary_model(), geo)
    with pytest.raises(TruncationError):
        dcme_residuals(default_model(), geo, weight_max=5)
    with pytest.raises(ConfigurationError):
        split_action_eval(default_model(), geo, weight_max=2)


def test_dcme_mixed_halves():
    geo = make_geometry(1, 3, seed=2)
    base = dcme_residuals(default_model(), geo)
    assert set(base.pieces) == {"cme", "one_form", "dcme_1", "dcme_mixed", "dcme_4"}
    assert set(base.halves) == {"dcme_2", "dcme_3"}
    # an x-linear antiholomorphic term only enters d_x S_Rbar
    shift = GradedSeries.monomial(geo.algebra, {"x0": 1, "y0": 1, "y1": 1}, ["dxb0"],
                                  coefficient=100.0, ring=geo.ring)
    shifted = dcme_residuals(default_model(), geo, shift=shift)
    assert shifted.halves["dcme_2"] > 50
    assert abs(shifted.halves["dcme_3"] - base.halves["dcme_3"]) < 1e-12
    assert shifted.pieces["dcme_mixed"] > 50
    assert abs(shifted.pieces["dcme_1"] - base.pieces["dcme_1"]) < 1e-12


def test_mdcme():
    geo = make_geometry(1, 3, seed=1)
    report = mdcme_boundary_term(boundary_model(), geo, seed=1)
    assert report.defect < 1e-9
    assert report.interaction.max_abs() > 0.1
    assert not report.boundary_term.is_zero()
    closed = mdcme_boundary_term(default_model(), geo, seed=1)
    assert closed.discrepancy.max_abs() < 1e-9
    assert closed.boundary_term.is_zero()
    assert closed.interaction.max_abs() > 0.1


def test_mdcme_detects_boundary():
    model = boundary_model()
    geo = make_geometry(1, 2, seed=0)
    field = FiniteModelField(model, 1, ring=geo.ring)
    g = field.generator
    report = mdcme_boundary_term(model, geo, field, variation={"A0_s": g("A0_s")})
    assert report.boundary_term.equals(g("B0_t") * g("A0_s"), tol=1e-12)
    assert report.defect < 1e-9
    with pytest.raises(ConfigurationError):
        mdcme_boundary_term(model, geo, field, variation={"A0_s": g("A0_tau")})


def test_term_degrees():
    model = default_model()
    geo = make_geometry(1, 3, seed=1)
    field = FiniteModelField(model, 1)
    S = split_action_eval(model, geo, field)
    assert set(term_degrees(S, field)) == {0}


def test_action_degree_table():
    rows = action_degree_table(max_k=2)
    assert len(rows) == 13
    table = {(r["k"], r["form"], r["n_B"]): r for r in rows}
    assert table[(0, "hol", 0)]["prefactor"] == "1"
    assert table[(2, "antihol", 1)]["prefactor"] == "1/2"
    assert table[(2, "hol", 3)]["coefficient_degree"] == -4
    assert (1, "antihol", 0) not in table


def test_qgbfv_operator():
    free = qgbfv_operator()
    assert [t["operator"] for t in free] == ["d_M", "Delta", "Omega_0^A", "Omega_0^B"]
    assert free[2]["prefactor"] == "1"
    entries = enumerate_bfv(1, max_valence=4, rep="B_rep")
    terms = qgbfv_operator(entries)[4:]
    assert len(terms) == sum(e.verdict.keep for e in entries)
    first = entries[0]
    assert terms[0]["graph"] == first.canonical
    assert terms[0]["prefactor"] == f"sigma_{first.canonical}"
