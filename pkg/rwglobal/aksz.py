"""
Finite dg models of the AKSZ field space and the split BV structure.

A FiniteDgModel stands in for the forms on the source manifold: a finite
graded-commutative algebra with a differential D of degree one and a
trace supported in the top degree. Superfield components become weight
zero generators appended to the jet algebra of the target, so functionals
are GradedSeries and every BV operation is assembled from left and right
derivatives.

Split superfields for quaternionic dimension n:

    Q^i = sum_a e_a A^i_a             (i < n, total degree 0)
    P_i = sum_a e^a B_{i,a}           (total degree 2, e^a the dual basis)

and the target fiber coordinate y^i is sent to Q^i, y^{n+i} to P_i. The
transgression of a form valued polynomial f(x, y) dx^I is
dx^I integral f(x, Q, P), form factors to the left.
"""
import dataclasses
import functools
import itertools
import logging
import math
from collections import Counter

import numpy as np
import sympy as sp

from .errors import ConfigurationError, NotInvertibleError, ParseError
from .fedosov import (_connection_forms, _fraction, check_weight, delta, delta_inv,
                      euler_hamiltonian, fedosov_solve, hamiltonian_vector_field, pi_0,
                      poisson_bracket)
from .geometry import split_bidegree
from .graphs import OMEGA_0
from .series import (FLOAT, RATIONAL, DerivationForm, GradedSeries, d_M, d_x, d_xbar,
                     fiber_name, form_name, jet_algebra)
from .utils import itermonomials

logger = logging.getLogger(name="rwglobal")


def _number(c):
    if isinstance(c, str):
        return sp.Rational(c)
    if isinstance(c, float) and c.is_integer():
        return int(c)
    return c


def _json_number(c):
    if isinstance(c, sp.Basic):
        return int(c) if c.is_integer else str(c)
    return c


def _vadd(u, v, s=1):
    out = dict(u)
    for k, c in v.items():
        out[k] = out.get(k, 0) + s * c
    return {k: c for k, c in out.items() if c != 0}


def _vmax(u):
    return max((abs(complex(c)) for c in u.values()), default=0.0)


###########################################
#
# Finite dg models
#
###########################################

@dataclasses.dataclass(frozen=True, eq=False)
class FiniteDgModel:
    """
    Finite graded-commutative dg algebra with trace.

    basis: tuple of (name, degree)
    product: {(a, b): {c: coefficient}} over basis indices, both orders
    differential: {a: {b: coefficient}} with D e_a = sum_b coefficient e_b
    trace: {a: coefficient}, supported in degree `dimension`
    boundary_pairing: {a: coefficient}; the Stokes defect of the trace,
        empty for a model without boundary
    """
    name: str
    basis: tuple
    product: dict
    differential: dict
    trace: dict
    boundary_pairing: dict = dataclasses.field(default_factory=dict)
    dimension: int = 3
    unit: int = 0

    @classmethod
    def build(cls, name, basis, products=(), differential=(), trace=None,
              boundary_pairing=None, dimension=3, unit="1"):
        """
        Products are given as (left, right, result, coefficient) entries. A
        pair appears in one order only; the other order follows from graded
        commutativity, and products with the unit are implicit.
        """
        basis = tuple((str(nm), int(deg)) for nm, deg in basis)
        index = {nm: i for i, (nm, _) in enumerate(basis)}
        if len(index) != len(basis):
            raise ConfigurationError(f"model {name!r}: duplicate basis names")

        def idx(nm):
            try:
                return index[nm]
            except KeyError:
                raise ConfigurationError(f"model {name!r}: unknown basis element {nm!r}")

        u = idx(unit)
        table = {}
        for a in range(len(basis)):
            table[(u, a)] = {a: 1}
            table[(a, u)] = {a: 1}
        orientation = {}
        for left, right, result, coeff in products:
            a, b, c = idx(left), idx(right), idx(result)
            if u in (a, b):
                raise ConfigurationError(f"model {name!r}: products with the unit are implicit")
            pair = frozenset((a, b))
            if orientation.setdefault(pair, (a, b)) != (a, b):
                raise ConfigurationError(f"model {name!r}: product {left}*{right} given in both orders")
            coeff = _number(coeff)
            slot = table.setdefault((a, b), {})
            slot[c] = slot.get(c, 0) + coeff
            if a != b:
                sign = -1 if (basis[a][1] * basis[b][1]) % 2 else 1
                mirror = table.setdefault((b, a), {})
                mirror[c] = mirror.get(c, 0) + sign * coeff
        D = {}
        for src, dst, coeff in differential:
            D.setdefault(idx(src), {})[idx(dst)] = _number(coeff)
        tr = {idx(nm): _number(c) for nm, c in (trace or {}).items()}
        bd = {idx(nm): _number(c) for nm, c in (boundary_pairing or {}).items()}
        return cls(name, basis, table, D, tr, bd, dimension, u)

    def __repr__(self):
        return f"FiniteDgModel({self.name!r}, size={self.size}, dimension={self.dimension})"

    @property
    def size(self):
        return len(self.basis)

    @property
    def names(self):
        return [nm for nm, _ in self.basis]

    @property
    def degrees(self):
        return [deg for _, deg in self.basis]

    @property
    def has_boundary(self):
        return any(c != 0 for c in self.boundary_pairing.values())

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise ConfigurationError(f"model {self.name!r}: unknown basis element {name!r}")

    def degree(self, a):
        return self.basis[a][1]

    def multiply(self, a, b):
        return self.product.get((a, b), {})

    def apply_D(self, a):
        return self.differential.get(a, {})

    def integrate(self, a):
        return self.trace.get(a, 0)

    def boundary(self, a):
        return self.boundary_pairing.get(a, 0)

    # vectors are {basis index: coefficient} dicts

    def vmul(self, u, v):
        out = {}
        for a, ca in u.items():
            for b, cb in v.items():
                for c, k in self.multiply(a, b).items():
                    out[c] = out.get(c, 0) + ca * cb * k
        return {c: k for c, k in out.items() if k != 0}

    def vD(self, u):
        out = {}
        for a, ca in u.items():
            for b, k in self.apply_D(a).items():
                out[b] = out.get(b, 0) + ca * k
        return {b: k for b, k in out.items() if k != 0}

    def vintegrate(self, u):
        return sum((c * self.integrate(a) for a, c in u.items()), 0)

    def vboundary(self, u):
        return sum((c * self.boundary(a) for a, c in u.items()), 0)

    def gram(self):
        """G[a][b] = integral of e_a e_b."""
        return [[self.vintegrate(self.multiply(a, b)) for b in range(self.size)]
                for a in range(self.size)]

    @functools.cached_property
    def dual_matrix(self):
        """M with e^a = sum_c M[a][c] e_c and integral(e^a e_b) = delta_ab."""
        try:
            return RATIONAL.inverse_matrix([[sp.nsimplify(c) for c in row] for row in self.gram()])
        except NotInvertibleError:
            raise NotInvertibleError(f"model {self.name!r}: trace pairing is degenerate")

    def closed_not_exact(self):
        """Basis elements which are D-closed and not hit by D."""
        image = {b for out in self.differential.values() for b, k in out.items() if k != 0}
        return [a for a in range(self.size) if not self.vD({a: 1}) and a not in image]

    def check(self):
        """Largest violation of each structural identity."""
        deg = self.degrees
        defects = dict.fromkeys(("degree", "d_squared", "leibniz", "commutativity",
                                 "associativity", "stokes", "trace_degree"), 0.0)

        def worst(key, value):
            defects[key] = max(defects[key], value)

        for (a, b), out in self.product.items():
            for c, k in out.items():
                if k != 0 and deg[c] != deg[a] + deg[b]:
                    worst("degree", abs(complex(k)))
        for a, out in self.differential.items():
            for b, k in out.items():
                if k != 0 and deg[b] != deg[a] + 1:
                    worst("degree", abs(complex(k)))
        for a in range(self.size):
            ea = {a: 1}
            worst("d_squared", _vmax(self.vD(self.vD(ea))))
            worst("stokes", abs(complex(self.vintegrate(self.vD(ea)) - self.boundary(a))))
            if self.integrate(a) != 0 and deg[a] != self.dimension:
                worst("trace_degree", abs(complex(self.integrate(a))))
            for b in range(self.size):
                eb = {b: 1}
                ab = self.multiply(a, b)
                sign = -1 if (deg[a] * deg[b]) % 2 else 1
                worst("commutativity", _vmax(_vadd(ab, self.multiply(b, a), -sign)))
                rhs = _vadd(self.vmul(self.vD(ea), eb), self.vmul(ea, self.vD(eb)),
                            -1 if deg[a] % 2 else 1)
                worst("leibniz", _vmax(_vadd(self.vD(ab), rhs, -1)))
                for c in range(self.size):
                    left = self.vmul(ab, {c: 1})
                    right = self.vmul(ea, self.multiply(b, c))
                    worst("associativity", _vmax(_vadd(left, right, -1)))
        return defects

    def validate(self, tol=0.0, nondegenerate=None):
        """
        Raises ConfigurationError if an identity fails. The trace pairing
        must be nondegenerate unless the model has a boundary.
        """
        failing = {k: v for k, v in self.check().items() if v > tol}
        if failing:
            raise ConfigurationError(f"model {self.name!r} violates {sorted(failing)}")
        if nondegenerate is None:
            nondegenerate = not self.has_boundary
        if nondegenerate:
            self.dual_matrix
        return self

    def to_json(self):
        names = self.names
        products = []
        done = set()
        for (a, b), out in sorted(self.product.items()):
            pair = frozenset((a, b))
            if self.unit in (a, b) or pair in done:
                continue
            done.add(pair)
            for c, k in sorted(out.items()):
                if k != 0:
                    products.append([names[a], names[b], names[c], _json_number(k)])
        differential = [[names[a], names[b], _json_number(k)]
                        for a, out in sorted(self.differential.items())
                        for b, k in sorted(out.items()) if k != 0]
        return {"name": self.name,
                "dimension": self.dimension,
                "unit": names[self.unit],
                "basis": [{"name": nm, "degree": deg} for nm, deg in self.basis],
                "product": products,
                "differential": differential,
                "trace": {names[a]: _json_number(c) for a, c in sorted(self.trace.items())},
                "boundary_pairing": {names[a]: _json_number(c)
                                     for a, c in sorted(self.boundary_pairing.items())}}

    @classmethod
    def from_json(cls, data, location="model"):
        try:
            return cls.build(data.get("name", "model"),
                             [(b["name"], b["degree"]) for b in data["basis"]],
                             [tuple(p) for p in data.get("product", [])],
                             [tuple(d) for d in data.get("differential", [])],
                             data.get("trace", {}),
                             data.get("boundary_pairing", {}),
                             int(data.get("dimension", 3)),
                             data.get("unit", "1"))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"malformed model: {e}", location)


def default_model():
    """
    Cohomology of the three-sphere with one acyclic pair (a, b = Da),
    tensored with the dual numbers in e. Eight elements, no boundary.
    """
    return FiniteDgModel.build(
        "S3_dual_numbers",
        [("1", 0), ("e", 0), ("a", 1), ("ea", 1), ("b", 2), ("eb", 2), ("v", 3), ("ev", 3)],
        [("e", "a", "ea", 1), ("e", "b", "eb", 1), ("e", "v", "ev", 1),
         ("a", "b", "v", 1), ("a", "eb", "ev", 1), ("ea", "b", "ev", 1)],
        [("a", "b", 1), ("ea", "eb", 1)],
        {"ev": 1})


def cohomology_model():
    """Cohomology of S^1 x S^2 with D = 0."""
    return FiniteDgModel.build(
        "S1xS2_cohomology",
        [("1", 0), ("alpha", 1), ("beta", 2), ("omega", 3)],
        [("alpha", "beta", "omega", 1)],
        [],
        {"omega": 1})


def boundary_model():
    """
    Interval model (t, tau = Dt) times a two-sphere class s. The trace of
    D(ts) is one, which is the boundary value of ts.
    """
    return FiniteDgModel.build(
        "interval_x_S2",
        [("1", 0), ("t", 0), ("tau", 1), ("s", 2), ("ts", 2), ("taus", 3)],
        [("t", "s", "ts", 1), ("tau", "s", "taus", 1)],
        [("t", "tau", 1), ("ts", "taus", 1)],
        {"taus": 1},
        boundary_pairing={"ts": 1})


def surface_model():
    """
    Closed surface model with trace in degree two: the two-sphere class
    sigma and two acyclic pairs (a, b = Da), (c, e = Dc) in duality.
    """
    return FiniteDgModel.build(
        "S2_surface",
        [("1", 0), ("a", 0), ("b", 1), ("c", 1), ("e", 2), ("sigma", 2)],
        [("a", "e", "sigma", 1), ("b", "c", "sigma", -1)],
        [("a", "b", 1), ("c", "e", 1)],
        {"sigma": 1},
        dimension=2)


MODELS = {"default": default_model, "cohomology": cohomology_model,
          "boundary": boundary_model, "surface": surface_model}


def get_model(name):
    try:
        return MODELS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown model {name!r}; expected one of {sorted(MODELS)}")


###########################################
#
# Fields and model-valued elements
#
###########################################

@dataclasses.dataclass(frozen=True)
class Coordinate:
    name: str
    field: str
    target: int
    basis: int
    form_degree: int
    ghost_degree: int

    @property
    def parity(self):
        return self.ghost_degree % 2


class FiniteModelField:
    """
    FiniteModelField(model, n, boundary=False, ring=FLOAT)

    Component coordinates of the split superfields valued in `model`, for
    a target of quaternionic dimension n. In the bulk the B fields are
    expanded in the dual basis and have total degree 2; a model with
    boundary has a degenerate trace pairing, and there the bulk B fields
    are expanded in the basis itself. With boundary=True the fields are
    the boundary fields AA^i, BB_i (total degrees 0 and 1), both expanded
    in the basis itself.
    """
    def __init__(self, model, n, boundary=False, ring=FLOAT):
        if n < 1:
            raise ConfigurationError(f"need n >= 1, got {n}")
        self.model = model
        self.n = n
        self.dim = 2 * n
        self.boundary = boundary
        self.dual = not boundary and not model.has_boundary
        self.ring = ring
        self._prefix = {"A": "AA", "B": "BB"} if boundary else {"A": "A", "B": "B"}
        total = {"A": 0, "B": 1 if boundary else 2}
        coords = []
        for field in ("A", "B"):
            for i in range(n):
                for a, (bname, bdeg) in enumerate(model.basis):
                    form = model.dimension - bdeg if field == "B" and self.dual else bdeg
                    coords.append(Coordinate(self.name(field, i, a), field, i, a,
                                             form, total[field] - form))
        self.coordinates = tuple(coords)
        self._by_name = {c.name: c for c in coords}
        even = tuple((c.name, 0) for c in coords if not c.parity)
        odd = tuple((c.name, 0) for c in coords if c.parity)
        self.algebra = jet_algebra(self.dim, even, odd)

    def __repr__(self):
        return f"FiniteModelField({self.model.name!r}, n={self.n}, boundary={self.boundary})"

    def name(self, field, i, a):
        return f"{self._prefix[field]}{i}_{self.model.basis[a][0]}"

    @property
    def names(self):
        return [c.name for c in self.coordinates]

    def coordinate(self, name):
        try:
            return self._by_name[name]
        except KeyError:
            raise ConfigurationError(f"{name!r} is not a field coordinate")

    def generator(self, name, coefficient=1):
        return GradedSeries.generator(self.algebra, name, ring=self.ring, coefficient=coefficient)

    def zero(self):
        return GradedSeries.zero(self.algebra, ring=self.ring)

    @property
    def pairs(self):
        """Canonical pairs (A^i_a, B_{i,a})."""
        return [(self.name("A", i, a), self.name("B", i, a))
                for i in range(self.n) for a in range(self.model.size)]

    def residual_pairs(self):
        """Pairs along D-closed, non-exact basis elements (the zero modes)."""
        keep = set(self.model.closed_not_exact())
        return [(self.name("A", i, a), self.name("B", i, a))
                for i in range(self.n) for a in range(self.model.size) if a in keep]

    def superfield(self, k):
        """Target coordinate k as a model element {basis index: series}."""
        size = self.model.size
        if k < self.n:
            return {a: self.generator(self.name("A", k, a)) for a in range(size)}
        i = k - self.n
        if not self.dual:
            return {a: self.generator(self.name("B", i, a)) for a in range(size)}
        M = self.model.dual_matrix
        out = {}
        for a in range(size):
            g = self.generator(self.name("B", i, a))
            for c in range(size):
                if M[a][c] != 0:
                    term = g.scale(M[a][c])
                    out[c] = out[c] + term if c in out else term
        return out

    def degree_table(self):
        """Form and ghost degree of every superfield component."""
        return [{"coordinate": c.name, "field": c.field, "target": c.target,
                 "basis": self.model.basis[c.basis][0], "form_degree": c.form_degree,
                 "ghost_degree": c.ghost_degree, "total_degree": c.form_degree + c.ghost_degree}
                for c in self.coordinates]


def _parity_flip(s):
    """(-1)^|s| s for a series of mixed parity."""
    even = s.project(lambda key: len(key[1]) % 2 == 0)
    odd = s.project(lambda key: len(key[1]) % 2 == 1)
    return even - odd


def element_product(model, x, y):
    """(e_a s)(e_b t) = (-1)^{|s||e_b|} (e_a e_b) s t."""
    result = {}
    flipped = {}
    for a, s in x.items():
        for b, t in y.items():
            out = model.multiply(a, b)
            if not out:
                continue
            if model.degree(b) % 2:
                if a not in flipped:
                    flipped[a] = _parity_flip(s)
                left = flipped[a]
            else:
                left = s
            st = left * t
            if st.is_zero():
                continue
            for c, k in out.items():
                term = st.scale(k)
                result[c] = result[c] + term if c in result else term
    return result


def element_D(model, x):
    result = {}
    for a, s in x.items():
        for b, k in model.apply_D(a).items():
            term = s.scale(k)
            result[b] = result[b] + term if b in result else term
    return result


def element_integrate(model, x, field):
    total = field.zero()
    for a, s in x.items():
        c = model.integrate(a)
        if c != 0:
            total = total + s.scale(c)
    return total


def element_boundary(model, x, field):
    """Boundary pairing of a model element, the Stokes defect of its integral."""
    total = field.zero()
    for a, s in x.items():
        c = model.boundary(a)
        if c != 0:
            total = total + s.scale(c)
    return total


class Transgression:
    """
    Transgression(field)

    Maps form valued polynomials on the target jet algebra to functionals:
    y^k is replaced by the superfield of coordinate k and the result is
    integrated; x, xb and the form factors are carried over on the left.
    """
    def __init__(self, field):
        self.field = field
        self.model = field.model
        self.superfields = [field.superfield(k) for k in range(field.dim)]
        self._elements = {}
        self._integrals = {}
        base = jet_algebra(field.dim)
        self._ypos = [base.locate(fiber_name(k))[1] for k in range(field.dim)]
        self._pad = len(field.algebra.even) - len(base.even)

    def element(self, yexps):
        if yexps not in self._elements:
            if not any(yexps):
                one = GradedSeries.constant(self.field.algebra, 1, ring=self.field.ring)
                elem = {self.model.unit: one}
            else:
                k = max(i for i, e in enumerate(yexps) if e)
                prev = list(yexps)
                prev[k] -= 1
                elem = element_product(self.model, self.element(tuple(prev)), self.superfields[k])
            self._elements[yexps] = elem
        return self._elements[yexps]

    def integral(self, yexps):
        if yexps not in self._integrals:
            self._integrals[yexps] = element_integrate(self.model, self.element(yexps), self.field)
        return self._integrals[yexps]

    def _groups(self, f):
        """Terms of f by y exponent, with the y powers removed."""
        if f.algebra.dim != self.field.dim or f.ring is not self.field.ring:
            raise ConfigurationError("target series does not match the field space")
        groups = {}
        for (exps, odds), c in f.items():
            yexps = tuple(exps[p] for p in self._ypos)
            rest = list(exps)
            for p in self._ypos:
                rest[p] = 0
            key = (tuple(rest) + (0,) * self._pad, odds)
            groups.setdefault(yexps, {})[key] = c
        return groups

    def _assemble(self, groups, integral):
        total = self.field.zero()
        for yexps, terms in groups.items():
            value = integral(yexps)
            if value.is_zero():
                continue
            prefactor = GradedSeries(self.field.algebra, terms, ring=self.field.ring)
            total = total + prefactor * value
        return total

    def __call__(self, f):
        return self._assemble(self._groups(f), self.integral)

    def paired(self, f, w):
        """Transgression of f with the even model element w multiplied into every integrand."""
        def integral(yexps):
            product = element_product(self.model, self.element(yexps), w)
            return element_integrate(self.model, product, self.field)
        return self._assemble(self._groups(f), integral)


def transgress(field, f):
    return Transgression(field)(f)


###########################################
#
# Split action and master equations
#
###########################################

def split_hamiltonian(geo, weight_max=4, I=None):
    """
    split_hamiltonian(geo, weight_max=4, I=None):

    Hamiltonian of the Fedosov connection D_F = d_M + {H, -}: the Euler
    Hamiltonian of -delta, of the fiber connection and of {I, -}. Its
    y-degree k + 1 part carries the coefficients R_k of the split action,
    e.g. 1/6 Omega_{il} (1/2 Atiyah)^i_{sm jbar} y^l y^s y^m dxb^j.
    """
    if I is None:
        I = fedosov_solve(geo, weight_max)
    alg, ring, dim = geo.algebra, geo.ring, geo.dim
    comps = [-form - GradedSeries.generator(alg, form_name(i, dim), ring=ring)
             for i, form in enumerate(_connection_forms(geo))]
    X = DerivationForm(comps, degree=1) + hamiltonian_vector_field(I, geo)
    return euler_hamiltonian(X, geo)


def kinetic_action(field):
    """S_kin = sum_i integral P_i D Q^i."""
    model = field.model
    total = field.zero()
    for i in range(field.n):
        DQ = element_D(model, field.superfield(i))
        P = field.superfield(field.n + i)
        total = total + element_integrate(model, element_product(model, P, DQ), field)
    return total


def split_action_eval(model, geo, field=None, weight_max=4, H=None, values=None):
    """
    split_action_eval(model, geo, field=None, weight_max=4, H=None, values=None):

    The globalized split action S = S_kin + T(H) as a functional with
    form valued coefficients on the target jet base.

    Inputs:
    values: dict
        Optional numbers for even field coordinates; odd coordinates stay
        symbolic.
    """
    check_weight(geo, weight_max)
    if field is None:
        field = FiniteModelField(model, geo.n, ring=geo.ring)
    if field.model is not model or field.n != geo.n or field.ring is not geo.ring:
        raise ConfigurationError("field space does not match model and geometry")
    if H is None:
        H = split_hamiltonian(geo, weight_max)
    S = kinetic_action(field) + transgress(field, H)
    if values:
        S = S.substitute({name: GradedSeries.constant(field.algebra, v, ring=field.ring)
                          for name, v in values.items()})
    logger.info(f"split action on {model.name}: {len(S)} terms")
    return S


def bv_bracket(F, G, field=None, pairs=None):
    """
    (F, G) = sum over canonical pairs of F d<_B d>_A G - F d<_A d>_B G,
    with d< the right and d> the left derivative. Odd of degree one.
    """
    if pairs is None:
        pairs = field.pairs
    result = GradedSeries.zero(F.algebra, ring=F.ring)
    for q, p in pairs:
        Fp = F.right_derive(p)
        if not Fp.is_zero():
            Gq = G.derive(q)
            if not Gq.is_zero():
                result = result + Fp * Gq
        Fq = F.right_derive(q)
        if not Fq.is_zero():
            Gp = G.derive(p)
            if not Gp.is_zero():
                result = result - Fq * Gp
    return result


def bv_laplacian(F, pairs):
    """Delta F = sum (-1)^|z| d>_z d>_{z+} F over residual pairs (z, z+)."""
    result = GradedSeries.zero(F.algebra, ring=F.ring)
    for z, zp in pairs:
        odd, _ = F.algebra.locate(z)
        term = F.derive(zp).derive(z)
        result = result - term if odd else result + term
    return result


def omega0_apply(state, field, hbar=1):
    """
    Omega_0 = -i hbar (d BB d/dBB + d AA d/dAA) on boundary states, i.e.
    -i hbar sum_{a, b} D_{ab} phi_a d>/d phi_b with D e_a = sum_b D_{ab} e_b.
    """
    if not field.boundary:
        raise ConfigurationError("Omega_0 acts on boundary fields")
    model = field.model
    total = field.zero()
    for label in ("A", "B"):
        for i in range(field.n):
            for a, out in model.differential.items():
                source = None
                for b, k in out.items():
                    d = state.derive(field.name(label, i, b))
                    if d.is_zero():
                        continue
                    if source is None:
                        source = field.generator(field.name(label, i, a))
                    total = total + (source * d).scale(k)
    if field.ring.exact:
        coefficient = -sp.I * sp.nsimplify(hbar)
    else:
        coefficient = -1j * hbar
    return total.scale(coefficient)


def term_degrees(S, field):
    """
    Total degree of each term of a split action functional: ghost degrees
    of the coordinates plus one per form, plus 2 - 2 n_B for interaction
    terms with n_B coordinates of B fields.
    """
    alg = field.algebra
    n_forms = 2 * field.dim
    even = [(alg.locate(c.name)[1], c) for c in field.coordinates if not c.parity]
    odd = {alg.locate(c.name)[1]: c for c in field.coordinates if c.parity}
    degrees = Counter()
    for (exps, odds), _ in S.items():
        ghost = forms = n_B = 0
        for pos, c in even:
            if exps[pos]:
                ghost += exps[pos] * c.ghost_degree
                n_B += exps[pos] if c.field == "B" else 0
        for i in odds:
            if i < n_forms:
                forms += 1
            else:
                ghost += odd[i].ghost_degree
                n_B += 1 if odd[i].field == "B" else 0
        degrees[ghost + forms + (2 - 2 * n_B if forms else 0)] += 1
    return degrees


def action_degree_table(max_k=2):
    """
    Coefficient types of <R_k(X^k), X> dx for the split superfield X = A + B:
    n_A + n_B = k + 1 fields, prefactor binom(k+1, n_B)/(k+1)! and
    coefficient degree 2 - 2 n_B. Antiholomorphic coefficients start at k = 2.
    """
    rows = []
    for k in range(max_k + 1):
        for form in ("hol", "antihol"):
            if form == "antihol" and k < 2:
                continue
            for n_B in range(k + 2):
                rows.append({"k": k, "form": form, "n_A": k + 1 - n_B, "n_B": n_B,
                             "coefficient_degree": 2 - 2 * n_B,
                             "prefactor": str(sp.Rational(math.comb(k + 1, n_B),
                                                          math.factorial(k + 1)))})
    return rows


def _perturbation(geo, size, seed):
    """size times a random x-independent cubic one-form in y."""
    rng = np.random.default_rng(seed)
    alg, ring, dim = geo.algebra, geo.ring, geo.dim
    ypos = [alg.locate(fiber_name(k))[1] for k in range(dim)]
    terms = {}
    for a in range(2 * dim):
        for yexps in itermonomials(dim, 3, 3):
            exps = [0] * len(alg.even)
            for p, e in zip(ypos, yexps):
                exps[p] = e
            terms[(tuple(exps), (a,))] = size * int(rng.integers(-3, 4))
    return GradedSeries(alg, terms, ring=ring)


@dataclasses.dataclass
class DcmeReport:
    """
    Max-norm of d_M S + 1/2 (S, S) per component, at field degrees up to
    `resolved_degree`: cme (0,0), one_form, dcme_1 (2,0), dcme_mixed
    (1,1), dcme_4 (0,2). `target` holds the same split of the Fedosov
    curvature d_M H + 1/2 {H, H} without its constant part.

    `halves` splits the (1,1) piece with S = S_R + S_Rbar by form type:
    dcme_2 = d_x S_Rbar + 1/2 (S_R, S_Rbar) and
    dcme_3 = d_xbar S_R + 1/2 (S_Rbar, S_R). Only their sum vanishes for
    a flat connection, so the halves are diagnostics.
    """
    pieces: dict
    resolved_degree: int
    target: dict
    halves: dict = dataclasses.field(default_factory=dict)
    perturbation: float = 0.0

    @property
    def residual(self):
        return max(self.pieces.values(), default=0.0)

    def to_dict(self):
        return {"residual": self.residual, "pieces": dict(self.pieces),
                "resolved_degree": self.resolved_degree, "target": dict(self.target),
                "halves": dict(self.halves), "perturbation": self.perturbation}


_DCME_LABELS = {(0, 0): "cme", (1, 0): "one_form", (0, 1): "one_form",
                (2, 0): "dcme_1", (1, 1): "dcme_mixed", (0, 2): "dcme_4"}


def _split_pieces(series):
    pieces = dict.fromkeys(("cme", "one_form", "dcme_1", "dcme_mixed", "dcme_4"), 0.0)
    for pq, part in split_bidegree(series).items():
        label = _DCME_LABELS.get(pq)
        if label is not None:
            pieces[label] = max(pieces[label], part.max_abs())
    return pieces


def _form_type(series, pq):
    return split_bidegree(series).get(pq, GradedSeries.zero(series.algebra, ring=series.ring))


def dcme_residuals(model, geo, weight_max=4, perturbation=0.0, seed=0, shift=None):
    """
    dcme_residuals(model, geo, weight_max=4, perturbation=0.0, seed=0, shift=None):

    Evaluates d_M S + 1/2 (S, S) for the split action at the basepoint
    x = 0, by field degree up to the degree the truncation resolves.
    A nonzero `perturbation` adds a random cubic one-form to the
    Hamiltonian, which breaks flatness.

    Inputs:
    shift: GradedSeries
        Optional form valued series on the target jet algebra added to
        the Hamiltonian before transgression.

    Returns:
    DcmeReport
    """
    if model.has_boundary:
        raise ConfigurationError("dCME residuals need a model without boundary")
    check_weight(geo, weight_max)
    field = FiniteModelField(model, geo.n, ring=geo.ring)
    half = _fraction(geo.ring, 1, 2)
    H = split_hamiltonian(geo, weight_max)
    if perturbation:
        H = H + _perturbation(geo, perturbation, seed)
    if shift is not None:
        H = H + shift
    fibers, base = geo.fiber_names, geo.base_names
    C = (d_M(H) + poisson_bracket(H, H, geo).scale(half)).drop_above(fibers, weight_max - 1)
    kmax = weight_max - 1 if C.order is None else min(weight_max - 1, C.order)

    T = Transgression(field)
    S0 = (kinetic_action(field) + T(H.homogeneous_part(base, 0))).drop_above(field.names, kmax + 1)
    S1 = T(H.homogeneous_part(base, 1)).drop_above(field.names, kmax)
    R = d_M(S1).homogeneous_part(base, 0) + bv_bracket(S0, S0, field).scale(half)
    R = R.drop_above(field.names, kmax)

    hol, antihol = _form_type(S0, (1, 0)), _form_type(S0, (0, 1))
    dcme_2 = d_x(_form_type(S1, (0, 1))).homogeneous_part(base, 0) \
        + bv_bracket(hol, antihol, field).scale(half)
    dcme_3 = d_xbar(_form_type(S1, (1, 0))).homogeneous_part(base, 0) \
        + bv_bracket(antihol, hol, field).scale(half)
    halves = {"dcme_2": dcme_2.drop_above(field.names, kmax).max_abs(),
              "dcme_3": dcme_3.drop_above(field.names, kmax).max_abs()}

    C0 = C.homogeneous_part(base, 0).drop_above(fibers, kmax)
    C0 = C0.project(lambda key: any(key[0]))
    report = DcmeReport(pieces=_split_pieces(R), resolved_degree=kmax, target=_split_pieces(C0),
                        halves=halves, perturbation=perturbation)
    logger.info(f"dCME residual {report.residual:.3e} on {model.name} through field degree {kmax}")
    return report


@dataclasses.dataclass
class MdcmeReport:
    """
    The modified master equation along one field variation V, as
    functionals: variation = V(S), contraction = omega(Q, V) with Q the
    cohomological vector field, boundary_term the boundary one-form on V.
    `interaction` is the part of the contraction coming from the target
    Hamiltonian.
    """
    variation: GradedSeries
    contraction: GradedSeries
    boundary_term: GradedSeries
    interaction: GradedSeries

    @property
    def discrepancy(self):
        return self.variation - self.contraction

    @property
    def defect(self):
        return (self.discrepancy - self.boundary_term).max_abs()

    def to_dict(self):
        return {"variation": self.variation.max_abs(),
                "contraction": self.contraction.max_abs(),
                "boundary_term": self.boundary_term.max_abs(),
                "interaction": self.interaction.max_abs(),
                "discrepancy": self.discrepancy.max_abs(),
                "defect": self.defect}


def random_variation(field, rng):
    """
    An even vector field on the field space: every coordinate goes to a
    small integer combination of the coordinates of its parity.
    """
    V = {}
    for c in field.coordinates:
        image = field.zero()
        for other in field.coordinates:
            k = int(rng.integers(-2, 3)) if other.parity == c.parity else 0
            if k:
                image = image + field.generator(other.name, coefficient=k)
        V[c.name] = image
    return V


def apply_variation(s, V):
    """V(s) = sum_c V(c) d>/dc s for an even vector field V = {coordinate: image}."""
    total = GradedSeries.zero(s.algebra, ring=s.ring)
    for name, image in V.items():
        if image.is_zero():
            continue
        d = s.derive(name)
        if not d.is_zero():
            total = total + image * d
    return total


def mdcme_boundary_term(model, geo, field=None, weight_max=4, seed=0, variation=None):
    """
    mdcme_boundary_term(model, geo, field=None, weight_max=4, seed=0, variation=None):

    Checks iota_Q omega = delta S + boundary term for the split action of
    `geo` on a model with boundary. With the superfields Q^i, P_i and an
    even variation V,

        variation      = V(S), S from split_action_eval
        contraction    = sum_i integral V(P_i) Q(Q^i) - Q(P_i) V(Q^i)
        boundary_term  = sum_i boundary(P_i V(Q^i))

    where Q(Q^i) = D Q^i + dH/dy^{n+i}(Q, P) and Q(P_i) = D P_i - dH/dy^i(Q, P)
    lift the target Hamiltonian vector field of the split Hamiltonian H.
    The result is an identity of functionals, variation - contraction =
    boundary_term; only the derivative D contributes to the boundary term.

    Inputs:
    variation: dict
        {coordinate name: GradedSeries} of the same parity as the
        coordinate; coordinates left out are not varied. A random integer
        variation drawn from `seed` when omitted.

    Returns:
    MdcmeReport
    """
    check_weight(geo, weight_max)
    if field is None:
        field = FiniteModelField(model, geo.n, ring=geo.ring)
    H = split_hamiltonian(geo, weight_max)
    S = split_action_eval(model, geo, field, weight_max, H=H)
    V = random_variation(field, np.random.default_rng(seed)) if variation is None else variation
    for name, image in V.items():
        coord = field.coordinate(name)
        if not image.is_zero() and image.parity() != coord.parity:
            raise ConfigurationError(f"variation of {name} has the wrong parity")

    n = field.n
    X = [field.superfield(k) for k in range(field.dim)]
    dX = [{a: apply_variation(s, V) for a, s in x.items()} for x in X]
    T = Transgression(field)
    kinetic = field.zero()
    boundary = field.zero()
    for i in range(n):
        Q, P, dQ, dP = X[i], X[n + i], dX[i], dX[n + i]
        kinetic = kinetic + element_integrate(
            model, element_product(model, dP, element_D(model, Q)), field)
        kinetic = kinetic - element_integrate(
            model, element_product(model, element_D(model, P), dQ), field)
        boundary = boundary + element_boundary(model, element_product(model, P, dQ), field)
    interaction = field.zero()
    for k in range(field.dim):
        dH = H.derive(fiber_name(k))
        if not dH.is_zero():
            interaction = interaction + T.paired(dH, dX[k])

    report = MdcmeReport(variation=apply_variation(S, V), contraction=kinetic + interaction,
                         boundary_term=boundary, interaction=interaction)
    logger.info(f"mdCME on {model.name}: discrepancy {report.discrepancy.max_abs():.3e}, "
                f"defect {report.defect:.3e}")
    return report


def qgbfv_operator(entries=()):
    """
    Symbolic assembly of d_M - i hbar Delta + (i/hbar) Omega with
    Omega = Omega_0 + Omega_pert; Omega_pert lists the balanced catalog
    entries which survive the vanishing filters, each with its term
    skeleton prefactor times i/hbar.
    """
    hbar = sp.Symbol("hbar")
    terms = [{"operator": "d_M", "prefactor": "1"},
             {"operator": "Delta", "prefactor": str(-sp.I * hbar)}]
    for omega0 in OMEGA_0:
        terms.append({"operator": omega0["term"],
                      "prefactor": str(sp.simplify(sp.I / hbar * (-sp.I * hbar)))})
    for entry in entries:
        if not entry.verdict.keep or not entry.balance.balanced:
            continue
        skeleton = entry.skeleton()
        weight = sp.Symbol(f"sigma_{entry.canonical}")
        power = skeleton["hbar_power"] + skeleton["derivative_hbar"]
        prefactor = (-sp.I * hbar) ** power / skeleton["aut"] * weight
        terms.append({"operator": "Omega_pert", "graph": entry.canonical,
                      "prefactor": str(sp.expand(sp.I / hbar * prefactor))})
    return terms


###########################################
#
# Nilpotency suite
#
###########################################

def random_polynomial(algebra, names, max_degree, rng, ring=RATIONAL, min_degree=0):
    """Random polynomial in the named generators with small integer coefficients."""
    odd_names = {nm for nm in names if algebra.locate(nm)[0]}
    total = GradedSeries.zero(algebra, ring=ring)
    for degree in range(min_degree, max_degree + 1):
        for combo in itertools.combinations_with_replacement(names, degree):
            counts = Counter(combo)
            if any(counts[nm] > 1 for nm in odd_names):
                continue
            c = int(rng.integers(-2, 3))
            if c == 0:
                continue
            powers = {nm: e for nm, e in counts.items() if nm not in odd_names}
            odds = [nm for nm in combo if nm in odd_names]
            total = total + GradedSeries.monomial(algebra, powers, odds, coefficient=c, ring=ring)
    return total


def nilpotency_suite(seed=0, ring=RATIONAL):
    """
    Max-norms of Delta^2, Omega_0^2, d_x^2, d_xbar^2, delta^2,
    (delta^-1)^2 and of the homotopy identity
    delta delta^-1 + delta^-1 delta + pi_0 - 1 on random inputs.
    """
    rng = np.random.default_rng(seed)
    bulk = FiniteModelField(cohomology_model(), 1, ring=ring)
    F = random_polynomial(bulk.algebra, bulk.names, 3, rng, ring)
    surface = FiniteModelField(surface_model(), 1, boundary=True, ring=ring)
    state = random_polynomial(surface.algebra, surface.names, 2, rng, ring)

    alg = jet_algebra(2)
    forms = random_polynomial(alg, ["x0", "xb1", "y0", "y1", "dx0", "dx1", "dxb0"], 3, rng, ring)
    weyl = random_polynomial(alg, ["y0", "y1", "dx0", "dx1"], 4, rng, ring)
    homotopy = delta(delta_inv(weyl)) + delta_inv(delta(weyl)) + pi_0(weyl) - weyl
    report = {"laplacian": bv_laplacian(bv_laplacian(F, bulk.pairs), bulk.pairs).max_abs(),
              "omega0": omega0_apply(omega0_apply(state, surface), surface).max_abs(),
              "d_x": d_x(d_x(forms)).max_abs(),
              "d_xbar": d_xbar(d_xbar(forms)).max_abs(),
              "delta": delta(delta(weyl)).max_abs(),
              "delta_inv": delta_inv(delta_inv(weyl)).max_abs(),
              "homotopy": homotopy.max_abs()}
    logger.info(f"nilpotency suite: worst {max(report.values()):.3e}")
    return report
