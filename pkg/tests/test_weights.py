import numpy as np
import pytest

from rwglobal.errors import GraphError
from rwglobal.geometry import flat_geometry, make_geometry
from rwglobal.graphs import FeynmanGraph
from rwglobal.weights import as_symmetry_check, contract_graph, ihx_residual


def theta_graph(order=("u", "v"), reverse=False):
    edge = ("v", "u") if reverse else ("u", "v")
    return FeynmanGraph([(vid, "bulk_black") for vid in order], [edge] * 3)


dumbbell = FeynmanGraph([("u", "bulk_black"), ("v", "bulk_black")],
                        [("u", "u"), ("u", "v"), ("v", "v")])

k4 = FeynmanGraph([(vid, "bulk_black") for vid in "abcd"],
                  [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")])

geo = make_geometry(2, 2, seed=4)


def test_contraction_methods_agree():
    W1 = contract_graph(theta_graph(), geo, method="einsum")
    W2 = contract_graph(theta_graph(), geo, method="tensordot")
    assert W1.rank == 2
    assert W1.max_abs() > 1e-6
    assert np.abs(W1.components - W2.components).max() < 1e-12
    assert W1.is_antisymmetric()
    W3 = contract_graph(dumbbell, geo, method="tensordot")
    assert np.abs(W3.components - contract_graph(dumbbell, geo).components).max() < 1e-12


def test_tadpole_vanishes():
    assert contract_graph(dumbbell, geo).max_abs() < 1e-12


def test_relabelling_signs():
    W = contract_graph(theta_graph(), geo).components
    swapped = contract_graph(theta_graph(order=("v", "u")), geo).components
    assert np.abs(swapped + W).max() < 1e-12
    # three reversed edges, each flipping the inverse form
    reversed_ = contract_graph(theta_graph(reverse=True), geo).components
    assert np.abs(reversed_ + W).max() < 1e-12


def test_homogeneity():
    W = contract_graph(theta_graph(), geo).components
    W2 = contract_graph(theta_graph(), geo, normalization=2.0).components
    assert np.allclose(W2, 4 * W)


def test_saturation():
    W = contract_graph(k4, make_geometry(1, 2, seed=1))
    assert W.note == "saturation"
    assert W.max_abs() == 0.0
    assert W.to_json()["note"] == "saturation"


def test_rejects_non_trivalent_graphs():
    chain = FeynmanGraph([("u", "bulk_black"), ("v", "bulk_black")], [("u", "v")] * 2)
    with pytest.raises(GraphError, match="not a weight-system graph"):
        contract_graph(chain, geo)
    with pytest.raises(ValueError):
        contract_graph(theta_graph(), geo, method="loops")


def test_ihx():
    for n in (2, 3):
        for seed in range(20):
            other = make_geometry(n, 3, seed=seed)
            assert ihx_residual(other) < 1e-9, (n, seed)
            assert ihx_residual(other, perturbation=0.1, seed=seed) > 1e-3, (n, seed)


def test_symmetry_check():
    assert as_symmetry_check(geo).passed
    generic = as_symmetry_check(make_geometry(2, 2, seed=4, compatible=False))
    assert not generic.symmetric
    flat = as_symmetry_check(flat_geometry(2, 2))
    assert flat.symmetry_defect == 0.0
    assert flat.passed
