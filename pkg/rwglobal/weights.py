"""
Rozansky-Witten weight system at the basepoint.

Every bulk vertex of a trivalent graph carries the Omega-lowered Atiyah
tensor V[i, j, k, lbar] = Omega_{im} dG^m_{jk}/dxb^l, every edge (t, h)
the inverse form (Omega^-1)^{ab} between a slot of t and a slot of h. The
antiholomorphic slots stay free and are antisymmetrised, one per bulk
vertex in the order the vertices are listed.
"""
import dataclasses
import itertools
import logging
import math
import string

import numpy as np

from .errors import GraphError
from .graphs import BULK_KINDS, canonical_form
from .opts import DEFAULT_TOLERANCE
from .utils import permutation_parity

logger = logging.getLogger(name="rwglobal")

METHODS = ("einsum", "tensordot")


@dataclasses.dataclass(frozen=True, eq=False)
class WeightTensor:
    """
    Antisymmetrised contraction W[l1 .. lr] of a graph with r bulk
    vertices. `note` is "saturation" when r exceeds the number of
    antiholomorphic directions and the tensor vanishes for that reason.
    """
    graph_id: str
    rank: int
    components: np.ndarray
    provenance: dict
    note: str = None

    def max_abs(self):
        if self.components.size == 0:
            return 0.0
        return float(np.abs(self.components).max())

    def is_antisymmetric(self, tol=1e-12):
        for perm in itertools.permutations(range(self.rank)):
            swapped = np.transpose(self.components, perm) * permutation_parity(perm)
            if np.abs(swapped - self.components).max(initial=0.0) > tol:
                return False
        return True

    def to_json(self):
        return {"graph": self.graph_id,
                "rank": self.rank,
                "shape": list(self.components.shape),
                "re": np.real(self.components).tolist(),
                "im": np.imag(self.components).tolist(),
                "provenance": dict(self.provenance),
                "note": self.note}


def _check_weight_graph(g):
    for vid, kind in g.vertices:
        if kind not in BULK_KINDS or g.in_degree(vid) + g.out_degree(vid) != 3:
            raise GraphError("not a weight-system graph")


def _slots(g):
    """Slot numbers (tail slot, head slot) per edge, filled in edge order."""
    used = {vid: 0 for vid in g.ids}
    out = []
    for t, h in g.edges:
        st = used[t]
        used[t] += 1
        sh = used[h]
        used[h] += 1
        out.append((st, sh))
    return out


def antisymmetrize(T):
    """Alternation over all axes, normalised by 1/r!."""
    r = T.ndim
    if r < 2:
        return T.copy()
    result = np.zeros_like(T)
    for perm in itertools.permutations(range(r)):
        result += permutation_parity(perm) * np.transpose(T, perm)
    return result / math.factorial(r)


def _contract_einsum(g, V, omi):
    letters = iter(string.ascii_letters)
    slot_letters = {vid: [next(letters) for _ in range(3)] for vid in g.ids}
    free = {vid: next(letters) for vid in g.ids}
    operands, subscripts = [], []
    for vid in g.ids:
        operands.append(V)
        subscripts.append("".join(slot_letters[vid]) + free[vid])
    for (t, h), (st, sh) in zip(g.edges, _slots(g)):
        operands.append(omi)
        subscripts.append(slot_letters[t][st] + slot_letters[h][sh])
    expr = ",".join(subscripts) + "->" + "".join(free[vid] for vid in g.ids)
    return np.einsum(expr, *operands, optimize=True)


def _contract_tensordot(g, V, omi):
    """Vertex by vertex, contracting every edge as soon as both ends are in."""
    T = None
    axes = []
    placed = set()
    pending = list(zip(g.edges, _slots(g)))
    for vid in g.ids:
        T = V.copy() if T is None else np.tensordot(T, V, axes=0)
        axes += [(vid, 0), (vid, 1), (vid, 2), ("free", vid)]
        placed.add(vid)
        remaining = []
        for (t, h), (st, sh) in pending:
            if t not in placed or h not in placed:
                remaining.append(((t, h), (st, sh)))
                continue
            i = axes.index((t, st))
            T = np.tensordot(T, omi, axes=([i], [0]))
            axes = axes[:i] + axes[i + 1:] + ["tmp"]
            j = axes.index((h, sh))
            T = np.trace(T, axis1=j, axis2=len(axes) - 1)
            axes = [a for k, a in enumerate(axes) if k not in (j, len(axes) - 1)]
        pending = remaining
    assert not pending, "edges left uncontracted"
    order = [axes.index(("free", vid)) for vid in g.ids]
    return np.transpose(T, order)


def contract_graph(g, geo, method="einsum", normalization=1.0):
    """
    contract_graph(g, geo, method="einsum", normalization=1.0):

    Contracts a trivalent graph of bulk vertices against the vertex tensor
    of geo and antisymmetrises the free antiholomorphic indices.

    Inputs:
    g: FeynmanGraph
        Only bulk vertices, each of total degree three (a self-loop counts
        twice).

    method: str
        'einsum' (one contraction expression) or 'tensordot' (pairwise
        contraction vertex by vertex).

    normalization: float
        Factor per vertex; the raw contraction uses 1.

    Returns:
    WeightTensor
    """
    if method not in METHODS:
        raise ValueError(f"unknown contraction method {method!r}; expected one of {METHODS}")
    _check_weight_graph(g)
    rank = len(g.vertices)
    dim = geo.dim
    provenance = {"seed": geo.seed, "mode": geo.mode, "method": method,
                  "normalization": normalization}
    gid = canonical_form(g)
    if rank > dim:
        logger.info(f"graph {gid}: rank {rank} exceeds {dim} antiholomorphic directions")
        return WeightTensor(gid, rank, np.zeros((dim,) * rank, dtype=complex), provenance, "saturation")
    V = geo.vertex_tensor * normalization
    omi = np.array(geo.omega_inv, dtype=complex)
    if method == "einsum":
        raw = _contract_einsum(g, V, omi)
    else:
        raw = _contract_tensordot(g, V, omi)
    W = antisymmetrize(raw)
    logger.debug(f"contracted {gid} ({method}), max |W| = {np.abs(W).max(initial=0.0):.3e}")
    return WeightTensor(gid, rank, W, provenance)


###########################################
#
# IHX in Bianchi form
#
###########################################

def ihx_combination(V, omega_inv):
    """
    The three pairings of two vertex tensors through one inverse form,
    with free indices (s, i, j, k, l, m), alternated in (l, m):

        V_{sipm} w^{pq} V_{qjkl} - V_{qijm} w^{pq} V_{spkl} - V_{qikm} w^{pq} V_{sjpl}
    """
    P = (np.einsum("sipm,pq,qjkl->sijklm", V, omega_inv, V)
         - np.einsum("qijm,pq,spkl->sijklm", V, omega_inv, V)
         - np.einsum("qikm,pq,sjpl->sijklm", V, omega_inv, V))
    return P - np.swapaxes(P, 4, 5)


def _jets(geo):
    """G, dG/dxb, d2G/dxb dxb and d3G/dx dxb dxb at the basepoint."""
    dim = geo.dim
    alg = geo.algebra
    linear = []
    for i in range(dim):
        exps = [0] * len(alg.even)
        exps[alg.locate(f"x{i}")[1]] = 1
        linear.append((tuple(exps), ()))
    A = np.zeros((dim,) * 4, dtype=complex)
    B = np.zeros((dim,) * 5, dtype=complex)
    C = np.zeros((dim,) * 6, dtype=complex)
    for r, j, k in itertools.product(range(dim), repeat=3):
        if j > k:
            A[r, j, k], B[r, j, k], C[r, j, k] = A[r, k, j], B[r, k, j], C[r, k, j]
            continue
        gamma = geo.Gamma(r, j, k)
        if gamma.is_zero():
            continue
        for l in range(dim):
            a = gamma.derive(f"xb{l}")
            A[r, j, k, l] = complex(a.evaluate_at_origin())
            for m in range(dim):
                b = a.derive(f"xb{m}")
                B[r, j, k, l, m] = complex(b.evaluate_at_origin())
                for i in range(dim):
                    C[r, j, k, l, m, i] = complex(b.coefficient(linear[i]))
    return geo.gamma_at_origin, A, B, C


def covariant_atiyah_derivative(geo):
    """
    dbar_m (nabla_i R^r_{jk lbar}) at the basepoint, lowered with Omega_{sr}
    and alternated in (l, m); free indices (s, i, j, k, l, m).
    """
    G, A, B, C = _jets(geo)
    # d_m of nabla_i A^r_{jkl}, product rule term by term
    D = np.einsum("rjklmi->rijklm", C)
    D = D + np.einsum("ripm,pjkl->rijklm", A, A) + np.einsum("rip,pjklm->rijklm", G, B)
    D = D - np.einsum("pijm,rpkl->rijklm", A, A) - np.einsum("pij,rpklm->rijklm", G, B)
    D = D - np.einsum("pikm,rjpl->rijklm", A, A) - np.einsum("pik,rjplm->rijklm", G, B)
    D = D - np.swapaxes(D, 4, 5)
    omega = np.array(geo.omega, dtype=complex)
    return np.einsum("sr,rijklm->sijklm", omega, D)


def ihx_residual(geo, perturbation=0.0, seed=0):
    """
    ihx_residual(geo, perturbation=0.0, seed=0):

    Max-norm difference between the IHX pairing combination of the vertex
    tensors and the antiholomorphic derivative of the covariant derivative
    of the Atiyah tensor. A nonzero `perturbation` adds a random tensor,
    symmetric in its first three slots, to the vertex tensor entering the
    pairings.
    """
    dim = geo.dim
    V = geo.vertex_tensor
    if perturbation:
        rng = np.random.default_rng(seed)
        X = rng.uniform(-1, 1, (dim,) * 4)
        X = sum(np.transpose(X, p + (3,)) for p in itertools.permutations(range(3))) / 6.0
        V = V + perturbation * X
    omi = np.array(geo.omega_inv, dtype=complex)
    lhs = covariant_atiyah_derivative(geo)
    rhs = ihx_combination(V, omi)
    residual = float(np.abs(lhs - rhs).max(initial=0.0))
    logger.info(f"IHX residual {residual:.3e} (perturbation {perturbation})")
    return residual


@dataclasses.dataclass
class SymmetryReport:
    symmetry_defect: float
    trace_defect: float
    tolerance: float

    @property
    def symmetric(self):
        return self.symmetry_defect <= self.tolerance

    @property
    def traceless(self):
        return self.trace_defect <= self.tolerance

    @property
    def passed(self):
        return self.symmetric and self.traceless

    def to_dict(self):
        return {"symmetry_defect": self.symmetry_defect,
                "trace_defect": self.trace_defect,
                "tolerance": self.tolerance,
                "symmetric": self.symmetric,
                "traceless": self.traceless,
                "passed": self.passed}


def as_symmetry_check(geo, tol=None):
    """
    Total symmetry of the vertex tensor in its three holomorphic slots and
    vanishing of its trace against the inverse form (the tadpole factor).
    """
    tol = DEFAULT_TOLERANCE if tol is None else tol
    V = geo.vertex_tensor
    symmetry = 0.0
    for p in itertools.permutations(range(3)):
        symmetry = max(symmetry, float(np.abs(np.transpose(V, p + (3,)) - V).max(initial=0.0)))
    omi = np.array(geo.omega_inv, dtype=complex)
    trace = float(np.abs(np.einsum("ij,ijkl->kl", omi, V)).max(initial=0.0))
    report = SymmetryReport(symmetry_defect=symmetry, trace_defect=trace, tolerance=tol)
    logger.info(f"vertex symmetry defect {symmetry:.3e}, trace defect {trace:.3e}")
    return report
