"""
Holomorphic symplectic jet data, formal exponential maps and the
Grothendieck connection.

Conventions: `n` is the quaternionic dimension, the holomorphic dimension
is dim = 2n and Omega is Darboux [[0, I_n], [-I_n, 0]]. Base directions
are indexed a = 0..2*dim-1 with a < dim holomorphic (x^a) and a >= dim
antiholomorphic (xb^{a-dim}). The Riemann tensor is

    R^r_{s m v} = d_m G^r_{v s} - d_v G^r_{m s} + G^r_{m l} G^l_{v s} - G^r_{v l} G^l_{m s}

and the Atiyah tensor is R^m_{jk lbar} = d G^m_{jk} / d xb^l.
"""
import dataclasses
import functools
import itertools
import logging
import math

import numpy as np
import sympy as sp

from .errors import ConfigurationError, GeometryError, ParseError
from .opts import ConventionFlags
from .series import (FLOAT, DerivationForm, GradedSeries, base_name, d_M,
                     fiber_name, form_name, get_ring, jet_algebra,
                     matrix_series_invert, min_order)
from .utils import darboux, itermonomials

logger = logging.getLogger(name="rwglobal")

MODES = ("flat", "compatible", "generic", "hyperkahler")


def _random_coefficient(rng, ring):
    if ring.exact:
        return sp.Rational(int(rng.integers(-2, 3)), 2)
    return complex(rng.uniform(-1, 1), rng.uniform(-1, 1))


def _random_series(algebra, rng, ring, order, variables):
    """Random polynomial of total degree <= order in the named variables."""
    positions = [algebra.locate(v)[1] for v in variables]
    terms = {}
    for exps in itermonomials(len(variables), order):
        full = [0] * len(algebra.even)
        for p, e in zip(positions, exps):
            full[p] = e
        terms[(tuple(full), ())] = _random_coefficient(rng, ring)
    return GradedSeries(algebra, terms, order=order, ring=ring)


@dataclasses.dataclass(frozen=True, eq=False)
class GeometryJet:
    """
    Jets at the basepoint x = xb = 0 of a torsion-free connection on a
    holomorphic symplectic manifold.

    gamma maps sorted index triples (i, j, k), j <= k, to series in
    x, xb exact to order K.
    """
    n: int
    K: int
    omega: tuple
    gamma: dict
    ring: object = FLOAT
    mode: str = "compatible"
    seed: int = 0

    @property
    def dim(self):
        return 2 * self.n

    @property
    def algebra(self):
        return jet_algebra(self.dim)

    @property
    def base_names(self):
        return [base_name(a, self.dim) for a in range(2 * self.dim)]

    @property
    def fiber_names(self):
        return [fiber_name(i) for i in range(self.dim)]

    @functools.cached_property
    def omega_inv(self):
        return tuple(tuple(row) for row in self.ring.inverse_matrix([list(r) for r in self.omega]))

    def Gamma(self, i, j, k):
        if j > k:
            j, k = k, j
        try:
            return self.gamma[(i, j, k)]
        except KeyError:
            return GradedSeries.zero(self.algebra, order=self.K, ring=self.ring)

    @functools.cached_property
    def curvature_20(self):
        """
        (2,0) curvature series R^a_{k b c} for holomorphic b, c, keyed by
        (a, k, b, c).
        """
        dim = self.dim
        R = {}
        for a, k, b, c in itertools.product(range(dim), repeat=4):
            if b == c:
                continue
            if (a, k, c, b) in R:
                R[(a, k, b, c)] = -R[(a, k, c, b)]
                continue
            term = self.Gamma(a, c, k).derive(f"x{b}") - self.Gamma(a, b, k).derive(f"x{c}")
            for m in range(dim):
                term = term + self.Gamma(a, b, m) * self.Gamma(m, c, k)
                term = term - self.Gamma(a, c, m) * self.Gamma(m, b, k)
            R[(a, k, b, c)] = term
        zero = GradedSeries.zero(self.algebra, order=self.K - 1, ring=self.ring)
        for a, k, b in itertools.product(range(dim), repeat=3):
            R[(a, k, b, b)] = zero
        return R

    def atiyah(self, m, j, k, l):
        """Atiyah series R^m_{jk lbar} = dG^m_{jk}/dxb^l."""
        return self.Gamma(m, j, k).derive(f"xb{l}")

    @functools.cached_property
    def gamma_at_origin(self):
        dim = self.dim
        G = np.zeros((dim, dim, dim), dtype=complex)
        for i, j, k in itertools.product(range(dim), repeat=3):
            G[i, j, k] = complex(self.Gamma(i, j, k).evaluate_at_origin())
        return G

    @functools.cached_property
    def vertex_tensor(self):
        """
        Omega-lowered Atiyah tensor at the basepoint,
        V[i, j, k, l] = Omega_{im} R^m_{jk lbar}.
        """
        dim = self.dim
        A = np.zeros((dim, dim, dim, dim), dtype=complex)
        for m, j, k, l in itertools.product(range(dim), repeat=4):
            A[m, j, k, l] = complex(self.atiyah(m, j, k, l).evaluate_at_origin())
        omega = np.array(self.omega, dtype=complex)
        return np.einsum("im,mjkl->ijkl", omega, A)

    def is_flat(self):
        return all(s.is_zero() for s in self.gamma.values())

    def lowered_gamma(self, k, a, b):
        """Omega-lowered connection G_{kab} = Omega_{mk} G^m_{ab}."""
        total = GradedSeries.zero(self.algebra, order=self.K, ring=self.ring)
        for m in range(self.dim):
            if self.omega[m][k] != 0:
                total = total + self.Gamma(m, a, b).scale(self.omega[m][k])
        return total

    def compatibility_defect(self):
        """
        Largest violation of total symmetry of the lowered connection,
        which is the jet form of nabla Omega = 0.
        """
        worst = 0.0
        for k, a, b in itertools.product(range(self.dim), repeat=3):
            ref = self.lowered_gamma(k, a, b)
            for p in set(itertools.permutations((k, a, b))):
                worst = max(worst, (ref - self.lowered_gamma(*p)).max_abs())
        return worst

    def curvature_20_norm(self):
        return max((s.max_abs() for s in self.curvature_20.values()), default=0.0)

    def to_json(self):
        return {"n": self.n,
                "K": self.K,
                "ring": self.ring.name,
                "mode": self.mode,
                "seed": self.seed,
                "omega": [[self.ring.to_json(c) for c in row] for row in self.omega],
                "gamma": {",".join(map(str, key)): s.to_json()
                          for key, s in sorted(self.gamma.items())},
                "flags": {"compatible": self.mode in ("compatible", "hyperkahler", "flat"),
                          "hyperkahler": self.mode in ("hyperkahler", "flat")}}

    @classmethod
    def from_json(cls, data, location="geometry"):
        try:
            n = int(data["n"])
            K = int(data["K"])
            ring = get_ring(data.get("ring", "float"))
            omega = tuple(tuple(ring.from_json(*c) for c in row) for row in data["omega"])
            algebra = jet_algebra(2 * n)
            gamma = {}
            for key, s in data["gamma"].items():
                i, j, k = (int(v) for v in key.split(","))
                gamma[(i, j, k)] = GradedSeries.from_json(s, algebra)
            return cls(n=n, K=K, omega=omega, gamma=gamma, ring=ring,
                       mode=data.get("mode", "compatible"), seed=int(data.get("seed", 0)))
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"malformed geometry: {e}", location)


def make_geometry(n, K, seed=0, compatible=True, mode=None, ring=FLOAT):
    """
    make_geometry(n, K, seed=0, compatible=True, mode=None, ring=FLOAT):

    Random connection jets of base order K on the Darboux model of
    quaternionic dimension n.

    Inputs:
    mode: str
        'flat' (all jets zero), 'compatible' (lowered connection totally
        symmetric, so nabla Omega = 0), 'generic' (torsion-free only) or
        'hyperkahler' (connection from the third derivatives of a random
        potential in the first n holomorphic and all antiholomorphic
        coordinates; the (2,0) curvature vanishes identically). When
        omitted, `compatible` selects between 'compatible' and 'generic'.

    Returns:
    GeometryJet

    Example:
    >>> geo = make_geometry(1, 3, seed=7)
    >>> geo.compatibility_defect() < 1e-12
    True
    """
    if n < 1 or K < 1:
        raise ConfigurationError(f"need n >= 1 and K >= 1, got n={n}, K={K}")
    if mode is None:
        mode = "compatible" if compatible else "generic"
    if mode not in MODES:
        raise ConfigurationError(f"unknown geometry mode {mode!r}; expected one of {MODES}")
    dim = 2 * n
    algebra = jet_algebra(dim)
    omega = tuple(tuple(ring.convert(c) for c in row) for row in darboux(n))
    omega_inv = ring.inverse_matrix([list(r) for r in omega])
    rng = np.random.default_rng(seed)
    base = [base_name(a, dim) for a in range(2 * dim)]
    gamma = {}

    def raise_index(S):
        # G^m_{ab} = -(Omega^-1)^{mk} S_{kab} solves Omega_{mk} G^m_{ab} = S_{kab}
        for m in range(dim):
            for a, b in itertools.combinations_with_replacement(range(dim), 2):
                total = GradedSeries.zero(algebra, order=K, ring=ring)
                for k in range(dim):
                    if omega_inv[m][k] != 0 and (k, a, b) in S:
                        total = total + S[(k, a, b)].scale(-omega_inv[m][k])
                if not total.is_zero():
                    gamma[(m, a, b)] = total

    if mode == "generic":
        for i in range(dim):
            for j, k in itertools.combinations_with_replacement(range(dim), 2):
                gamma[(i, j, k)] = _random_series(algebra, rng, ring, K, base)
    elif mode == "compatible":
        S = {}
        for triple in itertools.combinations_with_replacement(range(dim), 3):
            s = _random_series(algebra, rng, ring, K, base)
            for p in set(itertools.permutations(triple)):
                S[p] = s
        raise_index(S)
    elif mode == "hyperkahler":
        hol = [f"x{i}" for i in range(n)]
        anti = [f"xb{i}" for i in range(dim)]
        variables = hol + anti
        positions = [algebra.locate(v)[1] for v in variables]
        terms = {}
        for exps in itermonomials(len(variables), K + 3):
            if sum(exps[:n]) < 3:
                continue
            full = [0] * len(algebra.even)
            for p, e in zip(positions, exps):
                full[p] = e
            terms[(tuple(full), ())] = _random_coefficient(rng, ring)
        potential = GradedSeries(algebra, terms, order=K + 3, ring=ring)
        S = {}
        for triple in itertools.product(range(n), repeat=3):
            k, a, b = triple
            S[triple] = potential.derive(f"x{k}").derive(f"x{a}").derive(f"x{b}").truncate(K)
        raise_index(S)
    geo = GeometryJet(n=n, K=K, omega=omega, gamma=gamma, ring=ring, mode=mode, seed=seed)
    logger.info(f"built {mode} geometry n={n} K={K} seed={seed} ({len(gamma)} connection components)")
    return geo


def flat_geometry(n, K, ring=FLOAT):
    return make_geometry(n, K, mode="flat", ring=ring)


def rtilde(geo, i, c, j, k):
    """R~^i_{cjk} = (Omega^-1)^{bi} Omega_{aj} R^a_{kbc}."""
    total = GradedSeries.zero(geo.algebra, order=geo.K - 1, ring=geo.ring)
    for a, b in itertools.product(range(geo.dim), repeat=2):
        coeff = geo.omega_inv[b][i] * geo.omega[a][j]
        if coeff != 0:
            total = total + geo.curvature_20[(a, k, b, c)].scale(coeff)
    return total


@dataclasses.dataclass(frozen=True, eq=False)
class ExpMap:
    """phi^i(x; y) truncated at total order L."""
    phi: tuple
    L: int
    geometry: GeometryJet
    symplectic: bool = True

    def check_invariants(self, tol=0.0):
        """phi(x; 0) = x and d phi / d y = Id at y = 0."""
        geo = self.geometry
        names = geo.fiber_names
        worst = 0.0
        for i, p in enumerate(self.phi):
            at_zero = p.homogeneous_part(names, 0)
            target = GradedSeries.generator(geo.algebra, f"x{i}", ring=geo.ring)
            worst = max(worst, (at_zero - target).max_abs())
            for j in range(geo.dim):
                jac = p.derive(f"y{j}").homogeneous_part(names, 0)
                one = GradedSeries.constant(geo.algebra, 1 if i == j else 0, ring=geo.ring)
                worst = max(worst, (jac.project(lambda k: sum(k[0]) == 0) - one).max_abs())
        return worst <= tol


def _euler(f, names):
    total = GradedSeries.zero(f.algebra, order=None, ring=f.ring)
    for name in names:
        total = total + f.derive(name).times(name)
    return total


def geodesic_exp(g, L, symplectic=True):
    """
    geodesic_exp(g, L, symplectic=True):

    Formal exponential map solving phi'' + Gamma(phi)(phi', phi') = 0 in the
    scaling parameter of y, order by order in y, truncated at total order L.

    With symplectic=True the cubic term receives the correction
    -1/24 R~^i_{cjk} y^c y^j y^k which makes the map preserve Omega to that
    order. Both variants are generalized exponential maps.
    """
    if L < 2:
        raise ConfigurationError(f"exponential map needs L >= 2, got {L}")
    if L > g.K + 2:
        raise ConfigurationError(f"L={L} exceeds the fiber truncation K+2={g.K + 2}")
    alg, ring, dim = g.algebra, g.ring, g.dim
    names = g.fiber_names
    phi = [(GradedSeries.generator(alg, f"x{i}", ring=ring)
            + GradedSeries.generator(alg, f"y{i}", ring=ring)).truncate(L) for i in range(dim)]
    for m in range(L - 1):
        subs = {f"x{a}": phi[a] for a in range(dim)}
        composed = {key: s.substitute(subs) for key, s in g.gamma.items()}
        velocity = [_euler(p, names) for p in phi]
        new_phi = []
        for i in range(dim):
            acc = GradedSeries.zero(alg, order=L, ring=ring)
            for j, k in itertools.product(range(dim), repeat=2):
                key = (i, min(j, k), max(j, k))
                if key in composed:
                    acc = acc + composed[key] * velocity[j] * velocity[k]
            part = acc.homogeneous_part(names, m + 2)
            c = part.scale(sp.Rational(-1, (m + 2) * (m + 1)) if ring.exact
                           else -1.0 / ((m + 2) * (m + 1)))
            new_phi.append((phi[i] + c).truncate(L))
        phi = new_phi
        logger.debug(f"exponential map: y-order {m + 2} solved")
    if symplectic and L >= 3:
        y = [GradedSeries.generator(alg, f"y{i}", ring=ring) for i in range(dim)]
        factor = sp.Rational(-1, 24) if ring.exact else -1.0 / 24
        for i in range(dim):
            corr = GradedSeries.zero(alg, order=L, ring=ring)
            for c, j, k in itertools.product(range(dim), repeat=3):
                corr = corr + rtilde(g, i, c, j, k) * (y[c] * y[j] * y[k])
            phi[i] = (phi[i] + corr.scale(factor)).truncate(L)
    return ExpMap(phi=tuple(phi), L=L, geometry=g, symplectic=symplectic)


def grothendieck(phi):
    """
    Grothendieck connection R = dx^a R_a with
    R^i_a = -[(d phi / d y)^-1]^i_p d phi^p / d x^a, both for holomorphic
    and antiholomorphic base directions.
    """
    geo = phi.geometry
    dim = geo.dim
    J = [[phi.phi[p].derive(f"y{q}") for q in range(dim)] for p in range(dim)]
    Jinv = matrix_series_invert(J)
    components = {}
    for a in range(2 * dim):
        dphi = [p.derive(base_name(a, dim)) for p in phi.phi]
        for i in range(dim):
            acc = Jinv[i][0] * dphi[0]
            for p in range(1, dim):
                acc = acc + Jinv[i][p] * dphi[p]
            components[(a, i)] = -acc
    order = min_order(*(s.order for s in components.values()))
    logger.info(f"Grothendieck connection built, exact to order {order}")
    return DerivationForm.from_components(geo.algebra, components, ring=geo.ring, order=order)


@dataclasses.dataclass
class FlatnessReport:
    """Bidegree pieces of a curvature two-form, restricted to resolved orders."""
    pieces: dict
    resolved_order: object

    @property
    def residual(self):
        return max(self.pieces.values(), default=0.0)

    def __float__(self):
        return float(self.residual)

    @property
    def dcme(self):
        """Pieces relabelled after the component equations; the (1,1) piece is their mixed sum."""
        return {"dcme_1": self.pieces["(2,0)"],
                "dcme_mixed": self.pieces["(1,1)"],
                "dcme_4": self.pieces["(0,2)"]}

    def to_dict(self):
        return {"residual": self.residual,
                "resolved_order": self.resolved_order,
                "pieces": dict(self.pieces),
                "dcme": self.dcme}


def split_bidegree(series):
    """Splits a form-valued series into {(p, q): series} by dx / dxb count."""
    dim = series.algebra.dim
    out = {}
    for key, c in series.items():
        p = sum(1 for i in key[1] if i < dim)
        q = sum(1 for i in key[1] if dim <= i < 2 * dim)
        out.setdefault((p, q), {})[key] = c
    return {pq: GradedSeries(series.algebra, t, order=series.order, ring=series.ring)
            for pq, t in out.items()}


def curvature_form(R):
    """d_M R + 1/2 [R, R] as a two-form valued derivation."""
    comps = [d_M(c) + R.apply(c) for c in R.components]
    return DerivationForm(comps, degree=2)


def flatness_residual(R):
    """
    flatness_residual(R):

    Max-norm of the coefficients of d_M R + 1/2 [R, R], split by bidegree
    (2,0), (1,1), (0,2). Coefficients above the resolved order are not
    reported.
    """
    F = curvature_form(R)
    order = F.order
    pieces = {"(2,0)": 0.0, "(1,1)": 0.0, "(0,2)": 0.0}
    for comp in F.components:
        for (p, q), s in split_bidegree(comp).items():
            label = f"({p},{q})"
            if label in pieces:
                pieces[label] = max(pieces[label], s.max_abs())
    report = FlatnessReport(pieces=pieces, resolved_order=order)
    logger.info(f"flatness residual {report.residual:.3e} through order {order}")
    return report


# ----------------------------------------------------------------------
# coefficient tables


def taylor_tensor(series, names, k):
    """
    Symmetric tensor t with series|_{x=0, y-degree k} = t_{s1..sk} y^s1..y^sk.
    Returns a numpy array of shape (len(names),)*k.
    """
    dim = len(names)
    positions = [series.algebra.locate(nm)[1] for nm in names]
    t = np.zeros((dim,) * k, dtype=complex)
    others = [i for i in range(len(series.algebra.even)) if i not in positions]
    for (exps, odds), c in series.items():
        if odds or any(exps[i] for i in others):
            continue
        alpha = [exps[p] for p in positions]
        if sum(alpha) != k:
            continue
        multi = []
        for idx, e in enumerate(alpha):
            multi += [idx] * e
        weight = complex(c) * np.prod([math.factorial(e) for e in alpha]) / math.factorial(k)
        for perm in set(itertools.permutations(multi)):
            t[perm] = weight
    return t


def connection_table(R, flags=ConventionFlags(), max_k=2):
    """
    Taylor tensors of the Grothendieck coefficients at the basepoint:
    {('hol' | 'antihol', k): array[a, i, s1..sk]}. With flags.redef_R the
    tensors are multiplied by (k+1)!.
    """
    dim = R.algebra.dim
    names = [fiber_name(i) for i in range(dim)]
    table = {}
    for k in range(max_k + 1):
        for label, offset in (("hol", 0), ("antihol", dim)):
            arr = np.zeros((dim, dim) + (dim,) * k, dtype=complex)
            for a in range(dim):
                for i in range(dim):
                    arr[(a, i)] = taylor_tensor(R.component(a + offset, i), names, k)
            if flags.redef_R:
                arr = arr * math.factorial(k + 1)
            table[(label, k)] = arr
    return table


def riemann_at_origin(geo):
    """R^a_{kbc} at the basepoint as a numpy array."""
    dim = geo.dim
    R = np.zeros((dim,) * 4, dtype=complex)
    for key, s in geo.curvature_20.items():
        R[key] = complex(s.evaluate_at_origin())
    return R


def reference_table(geo, flags=ConventionFlags(), symplectic=True):
    """
    Closed-form Grothendieck coefficients through y-order 2 at the basepoint,
    in the layout of connection_table:

        order 0:  -delta^i_a
        order 1:  -G^i_{sa}
        order 2:  symplectic map  1/4 R^i_{s a t} + 1/8 (Omega^-1)^{ib} Omega_{s c} R^c_{t a b}
                  geodesic map    1/3 R^i_{s a t}
                  antiholomorphic 1/2 dG^i_{st}/dxb^a (full Atiyah if not atiyah_half)
    the order-2 tensors symmetrised in (s, t).
    """
    dim = geo.dim
    G = geo.gamma_at_origin
    R = riemann_at_origin(geo)
    om = np.array(geo.omega, dtype=complex)
    omi = np.array(geo.omega_inv, dtype=complex)
    A = np.zeros((dim,) * 4, dtype=complex)
    for m, j, k, l in itertools.product(range(dim), repeat=4):
        A[l, m, j, k] = complex(geo.atiyah(m, j, k, l).evaluate_at_origin())
    table = {}
    table[("hol", 0)] = -np.einsum("ai->ai", np.eye(dim, dtype=complex))
    table[("antihol", 0)] = np.zeros((dim, dim), dtype=complex)
    table[("hol", 1)] = -np.einsum("isa->ais", G)
    table[("antihol", 1)] = np.zeros((dim, dim, dim), dtype=complex)
    if symplectic:
        hol2 = 0.25 * np.einsum("isat->aist", R) \
            + 0.125 * np.einsum("ib,sc,ctab->aist", omi, om, R)
    else:
        hol2 = np.einsum("isat->aist", R) / 3.0
    table[("hol", 2)] = 0.5 * (hol2 + np.swapaxes(hol2, 2, 3))
    half = 0.5 if flags.atiyah_half else 1.0
    table[("antihol", 2)] = half * A
    if flags.redef_R:
        for (label, k) in table:
            table[(label, k)] = table[(label, k)] * math.factorial(k + 1)
    return table


def exp_cubic_reference(geo):
    """
    Cubic coefficient tensor of the symplectic exponential map at the
    basepoint, symmetrised in (c, j, k):
    -1/6 dG^i_{jk}/dx^c + 1/3 G^i_{mc} G^m_{jk} - 1/24 R~^i_{cjk}.
    """
    dim = geo.dim
    dG = np.zeros((dim,) * 4, dtype=complex)
    for i, j, k, c in itertools.product(range(dim), repeat=4):
        dG[i, c, j, k] = complex(geo.Gamma(i, j, k).derive(f"x{c}").evaluate_at_origin())
    G = geo.gamma_at_origin
    Rt = np.zeros((dim,) * 4, dtype=complex)
    for i, c, j, k in itertools.product(range(dim), repeat=4):
        Rt[i, c, j, k] = complex(rtilde(geo, i, c, j, k).evaluate_at_origin())
    raw = -dG / 6.0 + np.einsum("imc,mjk->icjk", G, G) / 3.0 - Rt / 24.0
    sym = np.zeros_like(raw)
    for p in itertools.permutations((1, 2, 3)):
        sym += np.transpose(raw, (0,) + p)
    return sym / 6.0
