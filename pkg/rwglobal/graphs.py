"""
Feynman graphs of the globalized split model: storage, canonical forms,
automorphism and loop counting, vanishing filters, degree counting and
enumeration of boundary-operator candidates.

Orientation: an edge (tail, head) points from tail to head. Boundary-B
vertices only emit edges, boundary-A vertices only receive them, a leaf_a
receives one edge from a bulk vertex (a functional derivative leaf in the
B-representation) and a leaf_b emits one edge into a bulk vertex.
"""
import dataclasses
import itertools
import logging
import math
from collections import Counter

import networkx as nx
import sympy as sp
from networkx.algorithms import isomorphism

from .errors import (ConfigurationError, GraphError, ParseError,
                     UnknownSignatureError)

logger = logging.getLogger(name="rwglobal")

KINDS = ("bulk_black", "bulk_red", "boundary_A", "boundary_B", "leaf_a", "leaf_b")
BULK_KINDS = ("bulk_black", "bulk_red")
COLORS = {"bulk_black": "black", "bulk_red": "red"}
REPS = ("A_rep", "B_rep")
FILTERS = ("tadpole", "double_edge", "bivalent_1in1out")

MAX_BULK = 3
MAX_VALENCE = 8


class FeynmanGraph:
    """
    Oriented multigraph with typed vertices.

    vertices: iterable of (id, kind)
    edges: iterable of (tail id, head id); repeated pairs are parallel edges
    """
    def __init__(self, vertices, edges, labels=None, validate=True):
        self.vertices = tuple((vid, kind) for vid, kind in vertices)
        self.edges = tuple((t, h) for t, h in edges)
        self.labels = dict(labels) if labels else {}
        self._kind = dict(self.vertices)
        self._index = {vid: i for i, (vid, _) in enumerate(self.vertices)}
        if validate:
            self.validate()

    def __repr__(self):
        return f"FeynmanGraph(vertices={list(self.vertices)}, edges={list(self.edges)})"

    def __len__(self):
        return len(self.vertices)

    @property
    def ids(self):
        return [vid for vid, _ in self.vertices]

    def kind(self, vid):
        try:
            return self._kind[vid]
        except KeyError:
            raise GraphError(f"unknown vertex {vid!r}")

    def index(self, vid):
        return self._index[vid]

    def of_kind(self, *kinds):
        return [vid for vid, kind in self.vertices if kind in kinds]

    def bulk(self):
        return self.of_kind(*BULK_KINDS)

    def in_degree(self, vid):
        return sum(1 for _, h in self.edges if h == vid)

    def out_degree(self, vid):
        return sum(1 for t, _ in self.edges if t == vid)

    def neighbours(self, vid):
        out = [h for t, h in self.edges if t == vid]
        inc = [t for t, h in self.edges if h == vid]
        return out, inc

    def signature(self, vid):
        """(color, #in, #out) of a bulk vertex."""
        kind = self.kind(vid)
        if kind not in BULK_KINDS:
            raise GraphError(f"vertex {vid!r} of kind {kind} has no signature")
        return COLORS[kind], self.in_degree(vid), self.out_degree(vid)

    def validate(self):
        if len(self._kind) != len(self.vertices):
            raise GraphError("duplicate vertex ids")
        for vid, kind in self.vertices:
            if kind not in KINDS:
                raise GraphError(f"vertex {vid!r}: unknown kind {kind!r}")
        for t, h in self.edges:
            for v in (t, h):
                if v not in self._kind:
                    raise GraphError(f"edge ({t!r}, {h!r}) references missing vertex {v!r}")
        for vid, kind in self.vertices:
            out, inc = self.neighbours(vid)
            if kind == "boundary_A" and out:
                raise GraphError(f"boundary_A vertex {vid!r} has outgoing edges")
            if kind == "boundary_B" and inc:
                raise GraphError(f"boundary_B vertex {vid!r} has incoming edges")
            if kind == "leaf_a":
                if out or len(inc) != 1 or self._kind[inc[0]] not in BULK_KINDS:
                    raise GraphError(f"leaf_a {vid!r} needs exactly one edge from a bulk vertex")
            if kind == "leaf_b":
                if inc or len(out) != 1 or self._kind[out[0]] not in BULK_KINDS:
                    raise GraphError(f"leaf_b {vid!r} needs exactly one edge into a bulk vertex")
        return self

    def relabel(self, mapping):
        """Copy with vertex ids renamed through mapping (missing ids kept)."""
        m = lambda v: mapping.get(v, v)
        return FeynmanGraph([(m(v), k) for v, k in self.vertices],
                            [(m(t), m(h)) for t, h in self.edges],
                            {m(v): l for v, l in self.labels.items()})

    def to_networkx(self):
        G = nx.MultiDiGraph()
        for vid, kind in self.vertices:
            G.add_node(vid, kind=kind)
        G.add_edges_from(self.edges)
        return G

    def is_connected(self):
        if not self.vertices:
            return True
        return nx.is_weakly_connected(self.to_networkx())

    def to_json(self):
        data = {"vertices": [{"id": vid, "kind": kind} for vid, kind in self.vertices],
                "edges": [[t, h] for t, h in self.edges]}
        if self.labels:
            data["labels"] = [[vid, l] for vid, l in self.labels.items()]
        return data

    @classmethod
    def from_json(cls, data, location="graph"):
        try:
            vertices = [(v["id"], v["kind"]) for v in data["vertices"]]
            edges = [(e[0], e[1]) for e in data["edges"]]
            labels = {vid: l for vid, l in data.get("labels", [])}
        except (KeyError, TypeError, IndexError) as err:
            raise ParseError(f"malformed graph entry ({err})", location)
        try:
            return cls(vertices, edges, labels)
        except GraphError as err:
            raise ParseError(str(err), location)


###########################################
#
# Vertex catalog and degree counting
#
###########################################

# (color, #in, #out) -> (rule name, total degree of the coefficient)
CATALOG = {
    ("black", 0, 1): ("I", 0),
    ("black", 1, 0): ("II", 2),
    ("black", 0, 2): ("III", 0),
    ("black", 1, 1): ("IV", 2),
    ("black", 2, 0): ("V", 4),
    ("black", 0, 3): ("VI", 0),
    ("black", 1, 2): ("VII", 2),
    ("black", 2, 1): ("VIII", 4),
    ("black", 3, 0): ("IX", 6),
    ("red", 0, 3): ("X", 0),
    ("red", 1, 2): ("XI", 2),
    ("red", 2, 1): ("XII", 4),
    ("red", 3, 0): ("XIII", 6),
}

MIN_LEGS = {"black": 1, "red": 3}


class VertexDegreeTable:
    """
    Total degrees of the vertex coefficients, keyed by (color, #in, #out).

    Each incoming arrow carries a field of degree 2 into the coefficient,
    outgoing ones are of degree 0. Signatures past the catalogued rules are
    generated from that pattern up to max_legs legs.
    """
    def __init__(self, max_legs=6, extrapolate=True):
        self.max_legs = max_legs
        self.entries = dict(CATALOG)
        if extrapolate:
            for color, minimum in MIN_LEGS.items():
                for legs in range(minimum, max_legs + 1):
                    for n_in in range(legs + 1):
                        sig = (color, n_in, legs - n_in)
                        if sig not in self.entries:
                            self.entries[sig] = (f"{color}[{n_in},{legs - n_in}]", 2 * n_in)

    def __contains__(self, signature):
        return tuple(signature) in self.entries

    def degree(self, signature):
        try:
            return self.entries[tuple(signature)][1]
        except KeyError:
            raise UnknownSignatureError(
                f"vertex signature {tuple(signature)} is not tabulated: extend VertexDegreeTable")

    def name(self, signature):
        try:
            return self.entries[tuple(signature)][0]
        except KeyError:
            raise UnknownSignatureError(
                f"vertex signature {tuple(signature)} is not tabulated: extend VertexDegreeTable")

    def is_in_linear(self):
        return all(deg == 2 * sig[1] for sig, (_, deg) in self.entries.items())

    def to_dict(self):
        return [{"color": c, "in": i, "out": o, "name": name, "degree": deg}
                for (c, i, o), (name, deg) in sorted(self.entries.items())]


@dataclasses.dataclass(frozen=True)
class BalanceResult:
    status: str
    deficit: object = None
    operator_degree: object = None
    reason: str = ""

    @property
    def balanced(self):
        return self.status == "balanced"

    def to_dict(self):
        return dataclasses.asdict(self)

    def __str__(self):
        if self.status == "unbalanced":
            return f"unbalanced({self.deficit})"
        return self.status


def degree_balance(g, table=None, rep="B_rep"):
    """
    B_rep: the form degree sum_v deg(v) of a graph with n bulk and m
    boundary vertices has to equal 3n + 2m - 3, and the resulting boundary
    operator has degree n + 2(#edges out of boundary_B - #leaf_a) = 1. All
    arrows stay inside the collapsing subgraph, so boundary_A vertices and
    leaf_b inputs are excluded.

    A_rep: at most one bulk vertex, with at least one boundary_A field and
    one derivative input.
    """
    table = table or VertexDegreeTable()
    if rep not in REPS:
        raise ConfigurationError(f"rep must be one of {REPS}, got {rep!r}")
    bulk = g.bulk()
    # unknown signatures raise before any other verdict
    degrees = {v: table.degree(g.signature(v)) for v in bulk}
    n = len(bulk)

    if rep == "B_rep":
        if g.of_kind("boundary_A", "leaf_b"):
            return BalanceResult("unbalanced", reason="arrows leave the collapsing subgraph")
        if n == 0:
            return BalanceResult("free", reason="no bulk vertices")
        boundary = g.of_kind("boundary_B")
        m = len(boundary)
        deficit = sum(3 - d for d in degrees.values()) + 2 * m - 3
        e_b = sum(g.out_degree(s) for s in boundary)
        op_degree = n + 2 * (e_b - len(g.of_kind("leaf_a")))
        if deficit == 0 and op_degree == 1:
            return BalanceResult("balanced", 0, op_degree)
        reason = "form degree" if deficit else "operator degree"
        return BalanceResult("unbalanced", deficit, op_degree, reason)

    if g.of_kind("boundary_B", "leaf_a"):
        return BalanceResult("unbalanced", reason="B-type vertices in the A-representation")
    if n == 0:
        return BalanceResult("free", reason="no bulk vertices")
    if n > 1:
        return BalanceResult("unbalanced", n - 1, reason="at most one bulk vertex")
    v = bulk[0]
    color, n_in, n_out = g.signature(v)
    fields = sum(1 for t, h in g.edges if t == v and g.kind(h) == "boundary_A")
    inputs = len(g.of_kind("leaf_b"))
    legs = n_in + n_out
    if fields < 1 or inputs < 1 or n_out != fields or n_in != inputs:
        return BalanceResult("unbalanced", reason="needs boundary fields and derivative inputs")
    if color == "red" and legs < 4:
        return BalanceResult("unbalanced", 4 - legs, reason="red vertex below four legs")
    return BalanceResult("balanced", 0, 1)


###########################################
#
# Canonical labelling
#
###########################################

def _adjacency(g):
    n = len(g.vertices)
    out_adj = [Counter() for _ in range(n)]
    in_adj = [Counter() for _ in range(n)]
    for t, h in g.edges:
        out_adj[g.index(t)][g.index(h)] += 1
        in_adj[g.index(h)][g.index(t)] += 1
    return out_adj, in_adj


def _refine(colors, out_adj, in_adj):
    while True:
        sigs = []
        for v, c in enumerate(colors):
            out_sig = tuple(sorted((colors[u], k) for u, k in out_adj[v].items() if u != v))
            in_sig = tuple(sorted((colors[u], k) for u, k in in_adj[v].items() if u != v))
            sigs.append((c, out_sig, in_sig, out_adj[v][v]))
        rank = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [rank[s] for s in sigs]
        if len(rank) == len(set(colors)):
            return new
        colors = new


def _leaves(colors, out_adj, in_adj):
    colors = _refine(colors, out_adj, in_adj)
    n = len(colors)
    if len(set(colors)) == n:
        yield colors
        return
    sizes = Counter(colors)
    target = min(c for c, k in sizes.items() if k > 1)
    for v in range(n):
        if colors[v] != target:
            continue
        branch = [2 * c + (1 if (c == target and u != v) else 0) for u, c in enumerate(colors)]
        yield from _leaves(branch, out_adj, in_adj)


def _encode(g, labelling):
    n = len(labelling)
    kinds = [None] * n
    for v, pos in enumerate(labelling):
        kinds[pos] = g.vertices[v][1]
    edges = sorted((labelling[g.index(t)], labelling[g.index(h)]) for t, h in g.edges)
    return tuple(kinds), tuple(edges)


def _search(g):
    out_adj, in_adj = _adjacency(g)
    start = [KINDS.index(kind) for _, kind in g.vertices]
    best, hits = None, 0
    for leaf in _leaves(start, out_adj, in_adj):
        code = _encode(g, leaf)
        if best is None or code < best:
            best, hits = code, 1
        elif code == best:
            hits += 1
    return best, hits


def _edge_permutations(g):
    count = 1
    for mult in Counter(g.edges).values():
        count *= math.factorial(mult)
    return count


def canonical_form(g):
    """
    Canonical string of g under kind- and orientation-preserving
    relabelling: vertex kinds in canonical order followed by the sorted
    edge list.
    """
    if not g.vertices:
        return "|"
    (kinds, edges), _ = _search(g)
    kinds = ",".join(kinds)
    edges = ",".join(f"{t}>{h}" for t, h in edges)
    return f"{kinds}|{edges}"


def automorphism_count(g):
    """
    Order of the automorphism group, parallel edges permuted independently.
    """
    if not g.vertices:
        return 1
    _, vertex_auts = _search(g)
    return vertex_auts * _edge_permutations(g)


def networkx_automorphism_count(g):
    G = g.to_networkx()
    matcher = isomorphism.MultiDiGraphMatcher(
        G, G, node_match=isomorphism.categorical_node_match("kind", None))
    return sum(1 for _ in matcher.isomorphisms_iter()) * _edge_permutations(g)


def is_isomorphic(g1, g2):
    return nx.is_isomorphic(g1.to_networkx(), g2.to_networkx(),
                            node_match=isomorphism.categorical_node_match("kind", None))


def loops_count(g):
    """First Betti number |E| - |V| + #components."""
    G = nx.MultiGraph()
    G.add_nodes_from(g.ids)
    G.add_edges_from(g.edges)
    return G.number_of_edges() - G.number_of_nodes() + nx.number_connected_components(G)


###########################################
#
# Vanishing filters
#
###########################################

@dataclasses.dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    reason: str = None
    reasons: tuple = ()

    def to_dict(self):
        return {"keep": self.keep, "reason": self.reason, "reasons": list(self.reasons)}

    def __str__(self):
        return "keep" if self.keep else f"drop({self.reason})"


def vanishing_filter(g, tadpole=True, double_edge=True, bivalent=True):
    """
    Vanishing criteria for configuration-space weights, checked in the
    order tadpole, double_edge, bivalent_1in1out. The verdict carries the
    first failing criterion and the list of all of them.
    """
    bulk = set(g.bulk())
    leaves = set(g.of_kind("leaf_a", "leaf_b"))
    reasons = []
    if tadpole and any(t == h and t in bulk for t, h in g.edges):
        reasons.append("tadpole")
    if double_edge:
        pairs = Counter(frozenset((t, h)) for t, h in g.edges if t != h)
        if any(k > 1 for k in pairs.values()):
            reasons.append("double_edge")
    if bivalent:
        for v in bulk:
            out, inc = g.neighbours(v)
            if len(out) == 1 and len(inc) == 1 and out[0] not in leaves and inc[0] not in leaves:
                reasons.append("bivalent_1in1out")
                break
    if reasons:
        return FilterVerdict(False, reasons[0], tuple(reasons))
    return FilterVerdict(True)


###########################################
#
# Enumeration
#
###########################################

@dataclasses.dataclass
class CatalogEntry:
    graph: FeynmanGraph
    canonical: str
    aut: int
    loops: int
    balance: BalanceResult
    verdict: FilterVerdict
    table: VertexDegreeTable = dataclasses.field(default=None, repr=False)

    def skeleton(self):
        return term_skeleton(self.graph, self.table, self.aut, self.loops)

    def to_dict(self):
        return {"canonical": self.canonical,
                "aut": self.aut,
                "loops": self.loops,
                "balance": str(self.balance),
                "filter_verdict": str(self.verdict),
                "filter_reasons": list(self.verdict.reasons),
                "term_skeleton": self.skeleton(),
                "graph": self.graph.to_json()}


def catalog_entry(g, table=None, rep="B_rep"):
    table = table or VertexDegreeTable()
    return CatalogEntry(g, canonical_form(g), automorphism_count(g), loops_count(g),
                        degree_balance(g, table, rep), vanishing_filter(g), table)


def _compositions(total, caps):
    """Tuples x with 0 <= x_i <= caps[i] and sum(x) == total."""
    if not caps:
        if total == 0:
            yield ()
        return
    for x in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - x, caps[1:]):
            yield (x,) + rest


def _set_partitions(items, m):
    if m == 0:
        if not items:
            yield []
        return
    if not items:
        return
    first, rest = items[0], items[1:]
    for p in _set_partitions(rest, m - 1):
        yield [(first,)] + p
    for p in _set_partitions(rest, m):
        for i in range(len(p)):
            yield p[:i] + [(first,) + p[i]] + p[i + 1:]


def _groupings(targets, m):
    """Distinct ways to split a multiset of targets into m nonempty blocks."""
    seen = set()
    for p in _set_partitions(list(targets), m):
        key = tuple(sorted(tuple(sorted(block)) for block in p))
        if key not in seen:
            seen.add(key)
            yield key


def _integer_partitions(r, largest=None):
    largest = r if largest is None else largest
    if r == 0:
        yield ()
        return
    for k in range(min(r, largest), 0, -1):
        for rest in _integer_partitions(r - k, k):
            yield (k,) + rest


def _check_bounds(n_bulk, max_valence, rep):
    if rep not in REPS:
        raise ConfigurationError(f"rep must be one of {REPS}, got {rep!r}")
    if not 0 <= n_bulk <= MAX_BULK:
        raise ConfigurationError(f"n_bulk must lie in [0, {MAX_BULK}], got {n_bulk}")
    if not 1 <= max_valence <= MAX_VALENCE:
        raise ConfigurationError(f"max_valence must lie in [1, {MAX_VALENCE}], got {max_valence}")


def _boundary_count(degrees, e_b):
    """Number m of boundary_B vertices solving the form-degree equation, or None."""
    spent = sum(3 - d for d in degrees)
    if (3 - spent) % 2:
        return None
    m = (3 - spent) // 2
    if not (min(1, e_b) <= m <= e_b):
        return None
    return m


def _b_rep_candidates(colors, max_valence, table):
    n = len(colors)
    pairs = list(itertools.product(range(n), repeat=2))
    max_internal = (n * max_valence) // 2
    linear = table.is_in_linear()
    if linear:
        # with degree 2*#in the two balance equations give
        # #internal edges = (3n-3)/2 + m - #boundary edges <= (3n-3)/2
        max_internal = min(max_internal, (3 * n - 3) // 2)
    for n_int in range(max_internal + 1):
        for internal in itertools.combinations_with_replacement(pairs, n_int):
            in_int = [0] * n
            out_int = [0] * n
            for t, h in internal:
                out_int[t] += 1
                in_int[h] += 1
            free = [max_valence - in_int[v] - out_int[v] for v in range(n)]
            if min(free) < 0:
                continue
            for b in itertools.product(*(range(f + 1) for f in free)):
                e_b = sum(b)
                if (2 * e_b + n - 1) % 2:
                    continue
                l_a = (2 * e_b + n - 1) // 2
                m = None
                if linear:
                    m = _boundary_count([2 * (in_int[v] + b[v]) for v in range(n)], e_b)
                    if m is None:
                        continue
                caps = [free[v] - b[v] for v in range(n)]
                for l in _compositions(l_a, caps):
                    sigs = [(colors[v], in_int[v] + b[v], out_int[v] + l[v]) for v in range(n)]
                    if any(sig not in table or sum(sig[1:]) < MIN_LEGS[sig[0]] for sig in sigs):
                        continue
                    if not linear:
                        m = _boundary_count([table.degree(sig) for sig in sigs], e_b)
                        if m is None:
                            continue
                    targets = [v for v in range(n) for _ in range(b[v])]
                    for blocks in _groupings(targets, m):
                        yield _build_b_graph(colors, internal, l, blocks)


def _build_b_graph(colors, internal, leaves, blocks):
    vertices = [(f"v{v}", f"bulk_{c}") for v, c in enumerate(colors)]
    edges = [(f"v{t}", f"v{h}") for t, h in internal]
    for j, block in enumerate(blocks):
        vertices.append((f"s{j}", "boundary_B"))
        edges.extend((f"s{j}", f"v{v}") for v in block)
    count = 0
    for v, k in enumerate(leaves):
        for _ in range(k):
            vertices.append((f"a{count}", "leaf_a"))
            edges.append((f"v{v}", f"a{count}"))
            count += 1
    return FeynmanGraph(vertices, edges, validate=False)


def _a_rep_candidates(colors, max_valence):
    color = colors[0]
    for legs in range(2, max_valence + 1):
        if color == "red" and legs < 4:
            continue
        for r in range(1, legs):
            s = legs - r
            for grouping in _integer_partitions(r):
                vertices = [("v0", f"bulk_{color}")]
                edges = []
                for j, size in enumerate(grouping):
                    vertices.append((f"t{j}", "boundary_A"))
                    edges.extend([("v0", f"t{j}")] * size)
                for j in range(s):
                    vertices.append((f"b{j}", "leaf_b"))
                    edges.append((f"b{j}", "v0"))
                yield FeynmanGraph(vertices, edges, validate=False)


def enumerate_bfv(n_bulk, max_valence=6, rep="B_rep", colors=("black", "red"), table=None):
    """
    Connected candidate graphs with n_bulk bulk vertices of valence at most
    max_valence that satisfy the degree counting of the chosen
    representation, deduplicated by canonical form. Vanishing verdicts are
    attached; nothing is dropped.
    """
    _check_bounds(n_bulk, max_valence, rep)
    table = table or VertexDegreeTable(max_legs=max_valence)
    found = {}
    if n_bulk == 0:
        return []
    if rep == "A_rep":
        if n_bulk > 1:
            return []
        colorings = [(c,) for c in colors]
        candidates = itertools.chain.from_iterable(_a_rep_candidates(c, max_valence) for c in colorings)
    else:
        colorings = list(itertools.combinations_with_replacement(colors, n_bulk))
        candidates = itertools.chain.from_iterable(
            _b_rep_candidates(c, max_valence, table) for c in colorings)

    considered = 0
    for g in candidates:
        considered += 1
        g.validate()
        if not g.is_connected():
            continue
        balance = degree_balance(g, table, rep)
        if not balance.balanced:
            continue
        key = canonical_form(g)
        if key in found:
            continue
        found[key] = CatalogEntry(g, key, automorphism_count(g), loops_count(g),
                                  balance, vanishing_filter(g), table)
    entries = sorted(found.values(), key=lambda e: (len(e.graph.edges), e.canonical))
    logger.info(f"enumerate_bfv(n_bulk={n_bulk}, max_valence={max_valence}, {rep}): "
                f"{considered} candidates, {len(entries)} balanced classes, "
                f"{sum(e.verdict.keep for e in entries)} surviving the filters")
    return entries


###########################################
#
# Term skeletons
#
###########################################

def term_skeleton(g, table=None, aut=None, loops=None):
    """
    Symbolic description of the operator term of one graph: vertex tensors,
    composite boundary fields, derivative multiplicities and prefactor.
    The configuration-space weight is kept as an opaque symbol.
    """
    table = table or VertexDegreeTable()
    aut = automorphism_count(g) if aut is None else aut
    loops = loops_count(g) if loops is None else loops
    vertices = []
    for v in g.bulk():
        color, n_in, n_out = g.signature(v)
        vertices.append({"vertex": str(v),
                         "rule": table.name((color, n_in, n_out)),
                         "tensor": f"R^_{n_in + n_out - 1}",
                         "upper": n_in,
                         "lower": n_out,
                         "form": "dx" if color == "black" else "dxbar"})
    fields = []
    for s in g.of_kind("boundary_B"):
        fields.append("[" + " ".join("B" for _ in range(g.out_degree(s))) + "]")
    for t in g.of_kind("boundary_A"):
        fields.append("[" + " ".join("A" for _ in range(g.in_degree(t))) + "]")
    derivatives = {"d/dB": len(g.of_kind("leaf_a")), "d/dA": len(g.of_kind("leaf_b"))}
    derivative_hbar = derivatives["d/dB"] + derivatives["d/dA"]
    hbar, sigma = sp.symbols("hbar"), sp.Symbol(f"sigma_{canonical_form(g)}")
    prefactor = (-sp.I * hbar) ** (loops + derivative_hbar) / aut * sigma
    return {"vertices": vertices,
            "fields": fields,
            "derivatives": derivatives,
            "hbar_power": loops,
            "derivative_hbar": derivative_hbar,
            "aut": aut,
            "prefactor": str(prefactor)}


OMEGA_0 = ({"term": "Omega_0^A", "expression": "-i*hbar * int dA delta/delta A"},
           {"term": "Omega_0^B", "expression": "-i*hbar * int dB delta/delta B"})


def bfv_term_report(entries, only_surviving=True):
    """
    Operator description from enumerate_bfv output (CatalogEntry objects or
    bare graphs). The free pair Omega_0 is always emitted.
    """
    terms = []
    for e in entries:
        if isinstance(e, FeynmanGraph):
            e = catalog_entry(e)
        if only_surviving and not e.verdict.keep:
            continue
        skeleton = e.skeleton()
        skeleton["canonical"] = e.canonical
        terms.append(skeleton)
    return {"omega0": [dict(t) for t in OMEGA_0], "terms": terms}
