import itertools
import json
import math
import os
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from rwglobal.errors import ConfigurationError, GraphError, ParseError, UnknownSignatureError
from rwglobal.graphs import (FeynmanGraph, VertexDegreeTable, automorphism_count,
                             bfv_term_report, canonical_form, catalog_entry,
                             degree_balance, enumerate_bfv, is_isomorphic, loops_count,
                             networkx_automorphism_count, vanishing_filter)

DATA = os.path.join(os.path.dirname(__file__), "data", "appendix_graphs.json")

theta = FeynmanGraph([("u", "bulk_black"), ("v", "bulk_black")], [("u", "v")] * 3)


def brute_force_automorphisms(g):
    ids = g.ids
    edges = Counter(g.edges)
    count = 0
    for perm in itertools.permutations(ids):
        m = dict(zip(ids, perm))
        if any(g.kind(v) != g.kind(m[v]) for v in ids):
            continue
        if Counter((m[t], m[h]) for t, h in g.edges) == edges:
            count += 1
    return count * math.prod(math.factorial(k) for k in edges.values())


def random_graph(rng):
    n = int(rng.integers(1, 6))
    vertices = [(f"v{i}", ("bulk_black", "bulk_red")[int(rng.integers(0, 2))]) for i in range(n)]
    edges = [(f"v{int(rng.integers(0, n))}", f"v{int(rng.integers(0, n))}")
             for _ in range(int(rng.integers(0, 7)))]
    return FeynmanGraph(vertices, edges)


def shuffled(g, rng):
    perm = rng.permutation(len(g))
    h = g.relabel({v: f"w{perm[i]}" for i, v in enumerate(g.ids)})
    edges = [h.edges[i] for i in rng.permutation(len(h.edges))]
    return FeynmanGraph(sorted(h.vertices), edges)


def appendix_graphs():
    with open(DATA) as f:
        data = json.load(f)
    for fig, spec in data["figures"].items():
        for label in spec["shapes"]:
            entry = data["shapes"][label]
            g = FeynmanGraph.from_json(entry["graph"])
            red = set(spec["red"]) & set(g.bulk())
            g = FeynmanGraph([(v, "bulk_red" if v in red else k) for v, k in g.vertices], g.edges)
            yield f"{fig}/{label}", g, entry["verdict"]


def test_theta_graph():
    assert automorphism_count(theta) == 6
    assert networkx_automorphism_count(theta) == 6
    assert loops_count(theta) == 2
    assert str(vanishing_filter(theta)) == "drop(double_edge)"


def multigraph_classes(n, black, max_edges):
    """
    One representative per isomorphism class of directed multigraphs on n
    vertices, the first `black` of them bulk_black and the rest bulk_red,
    grouped by edge count. Level e + 1 is every level e class with one
    more edge, deduplicated by canonical form.
    """
    vertices = [(f"v{i}", "bulk_black" if i < black else "bulk_red") for i in range(n)]
    empty = FeynmanGraph(vertices, [], validate=False)
    level = {canonical_form(empty): empty}
    yield 0, list(level.values())
    for e in range(1, max_edges + 1):
        grown = {}
        for g in level.values():
            for edge in itertools.product(g.ids, repeat=2):
                child = FeynmanGraph(vertices, g.edges + (edge,), validate=False)
                grown.setdefault(canonical_form(child), child)
        level = grown
        yield e, list(level.values())


def sweep(max_vertices, max_edges, coloured):
    rng = np.random.default_rng(2)
    for n in range(1, max_vertices + 1):
        for black in (range(n + 1) if coloured else (n,)):
            for e, reps in multigraph_classes(n, black, max_edges):
                labelled = Fraction(0)
                for g in reps:
                    auts = brute_force_automorphisms(g)
                    assert automorphism_count(g) == auts, g
                    assert canonical_form(shuffled(g, rng)) == canonical_form(g), g
                    parallel = math.prod(math.factorial(k) for k in Counter(g.edges).values())
                    labelled += Fraction(math.factorial(n) * parallel, auts)
                # orbit-stabilizer: the classes cover every labelled graph exactly once
                assert labelled == math.comb(n, black) * math.comb(n * n + e - 1, e), (n, black, e)


def test_automorphisms_exhaustive_sweep():
    sweep(5, 6, coloured=False)


def test_automorphisms_coloured_sweep():
    sweep(4, 4, coloured=True)


def test_canonical_form_is_a_complete_invariant():
    rng = np.random.default_rng(1)
    graphs = [random_graph(rng) for _ in range(80)]
    for g in graphs:
        assert canonical_form(shuffled(g, rng)) == canonical_form(g)
    for g1, g2 in itertools.combinations(graphs, 2):
        if len(g1) != len(g2) or len(g1.edges) != len(g2.edges):
            continue
        assert (canonical_form(g1) == canonical_form(g2)) == is_isomorphic(g1, g2)


def test_graph_validation():
    with pytest.raises(GraphError):
        FeynmanGraph([("a", "boundary_A"), ("v", "bulk_black")], [("a", "v")])
    with pytest.raises(GraphError):
        FeynmanGraph([("v", "bulk_black")], [("v", "w")])
    with pytest.raises(GraphError):
        FeynmanGraph([("v", "bulk_green")], [])
    with pytest.raises(ParseError):
        FeynmanGraph.from_json({"vertices": [{"id": "v"}], "edges": []})


def test_vanishing_filter():
    tadpole = FeynmanGraph([("v", "bulk_black"), ("f", "leaf_a")], [("v", "v"), ("v", "f")])
    assert str(vanishing_filter(tadpole)) == "drop(tadpole)"
    chain = FeynmanGraph([("s", "boundary_B"), ("v", "bulk_black"), ("w", "bulk_black"),
                          ("f", "leaf_a")], [("s", "v"), ("v", "w"), ("w", "f")])
    verdict = vanishing_filter(chain)
    assert not verdict.keep
    assert verdict.reason == "bivalent_1in1out"
    assert vanishing_filter(chain, bivalent=False).keep


def test_degree_table():
    table = VertexDegreeTable()
    assert table.degree(("black", 1, 2)) == 2
    assert table.name(("red", 0, 3)) == "X"
    assert table.degree(("black", 3, 3)) == 6
    assert table.is_in_linear()
    with pytest.raises(UnknownSignatureError):
        VertexDegreeTable(max_legs=3).degree(("black", 4, 0))


def test_single_vertex_families():
    entries = enumerate_bfv(1, max_valence=6, rep="B_rep")
    found = Counter()
    for e in entries:
        g = e.graph
        v, = g.bulk()
        color, n_in, n_out = g.signature(v)
        assert n_in == n_out
        assert len(g.of_kind("boundary_B")) == n_in
        assert e.balance.balanced
        found[color] += 1
    # k = 1..3 in black, k = 2..3 in red
    assert found == {"black": 3, "red": 2}


def test_two_bulk_vertices_are_empty():
    assert enumerate_bfv(2, max_valence=6, rep="B_rep") == []


def test_a_representation():
    entries = enumerate_bfv(1, max_valence=4, rep="A_rep")
    assert entries
    for e in entries:
        g = e.graph
        v, = g.bulk()
        color, n_in, n_out = g.signature(v)
        assert n_in >= 1 and n_out >= 1
        if color == "red":
            assert n_in + n_out >= 4
        assert degree_balance(g, rep="A_rep").balanced
    assert enumerate_bfv(2, rep="A_rep") == []


def test_enumeration_bounds():
    with pytest.raises(ConfigurationError):
        enumerate_bfv(4)
    with pytest.raises(ConfigurationError):
        enumerate_bfv(1, max_valence=9)
    with pytest.raises(ConfigurationError):
        enumerate_bfv(1, rep="C_rep")


def test_appendix_graphs_are_candidates():
    entries = enumerate_bfv(3, max_valence=3, rep="B_rep")
    canonical = {e.canonical for e in entries}
    count = 0
    for label, g, verdict in appendix_graphs():
        assert canonical_form(g) in canonical, label
        assert str(vanishing_filter(g)) == verdict, label
        count += 1
    assert count == 48


def test_catalog_automorphisms_match_networkx():
    for e in enumerate_bfv(3, max_valence=3, rep="B_rep")[:40]:
        assert e.aut == networkx_automorphism_count(e.graph)


def test_term_report():
    entries = enumerate_bfv(1, max_valence=4, rep="B_rep")
    report = bfv_term_report(entries)
    assert len(report["omega0"]) == 2
    assert len(report["terms"]) == sum(e.verdict.keep for e in entries)
    skeleton = catalog_entry(entries[0].graph).skeleton()
    assert skeleton["hbar_power"] == 0
    assert skeleton["derivative_hbar"] == 1
    assert skeleton["vertices"][0]["form"] == "dx"
