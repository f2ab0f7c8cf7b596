"""
Truncated graded-commutative power series.

A series lives in a GradedAlgebra: even generators (base coordinates x, xb
and fiber coordinates y of the jet algebra, or commuting field coordinates)
and odd generators (the forms dx, dxb, or anticommuting field coordinates).
Monomials are stored as (even exponent tuple, increasing tuple of odd
generator indices) with Koszul signs absorbed into the coefficient.

Every series carries `order`, the total weighted order up to which its
coefficients are exact. `None` marks an exact polynomial. Products and
derivatives track exactness from the valuations of their operands, so a
result never claims more than its inputs resolve.
"""
import dataclasses
import functools
import logging
import math

import numpy as np
import sympy as sp

from .errors import ConfigurationError, NotInvertibleError, ParseError, TruncationError
from .opts import DROP_TOLERANCE
from .utils import merge_odd

logger = logging.getLogger(name="rwglobal")


class CoefficientRing:
    """
    Coefficient arithmetic. The float ring uses Python complex numbers and
    prunes coefficients below `drop_tolerance`; the rational ring uses
    sympy numbers (Gaussian rationals) and is exact.
    """
    def __init__(self, name, drop_tolerance=0.0):
        self.name = name
        self.drop_tolerance = drop_tolerance
        self.exact = name == "rational"

    def __repr__(self):
        return f"CoefficientRing({self.name!r})"

    def convert(self, c):
        if self.exact:
            if isinstance(c, sp.Basic):
                return c
            if isinstance(c, (bool, int, np.integer)):
                return sp.Integer(int(c))
            if isinstance(c, complex):
                return sp.nsimplify(c.real) + sp.I * sp.nsimplify(c.imag)
            return sp.nsimplify(c)
        if isinstance(c, sp.Basic):
            return complex(sp.N(c))
        return complex(c)

    def is_zero(self, c):
        if self.exact:
            return c == 0
        return abs(c) <= self.drop_tolerance

    def magnitude(self, c):
        return abs(complex(c))

    def to_json(self, c):
        if self.exact:
            return [str(sp.re(c)), str(sp.im(c))]
        c = complex(c)
        return [c.real, c.imag]

    def from_json(self, re, im):
        if self.exact:
            return sp.Rational(re) + sp.I * sp.Rational(im)
        return complex(float(re), float(im))

    def inverse_matrix(self, rows):
        """Inverse of a square numeric matrix given as nested lists."""
        if self.exact:
            m = sp.Matrix(rows)
            if m.det() == 0:
                raise NotInvertibleError("not invertible at basepoint")
            inv = m.inv()
            return [[inv[i, j] for j in range(m.cols)] for i in range(m.rows)]
        m = np.array(rows, dtype=complex)
        if m.size and np.linalg.matrix_rank(m) < m.shape[0]:
            raise NotInvertibleError("not invertible at basepoint")
        return np.linalg.inv(m).tolist()


FLOAT = CoefficientRing("float", drop_tolerance=DROP_TOLERANCE)
RATIONAL = CoefficientRing("rational")
RINGS = {"float": FLOAT, "rational": RATIONAL}


def get_ring(name):
    try:
        return RINGS[name]
    except KeyError:
        raise ConfigurationError(f"unknown coefficient ring {name!r}; expected one of {sorted(RINGS)}")


@dataclasses.dataclass(frozen=True)
class Generator:
    name: str
    odd: bool = False
    weight: int = 1


class GradedAlgebra:
    """
    Generator bookkeeping for a family of series. Instances are cached by
    the constructors below, so algebras compare by identity.
    """
    def __init__(self, dim, even, odd):
        self.dim = dim
        self.even = tuple(even)
        self.odd = tuple(odd)
        self.even_weights = tuple(g.weight for g in self.even)
        self.odd_weights = tuple(g.weight for g in self.odd)
        self._index = {}
        for i, g in enumerate(self.even):
            self._index[g.name] = (False, i)
        for i, g in enumerate(self.odd):
            self._index[g.name] = (True, i)

    def __repr__(self):
        return f"GradedAlgebra(dim={self.dim}, even={len(self.even)}, odd={len(self.odd)})"

    @property
    def names(self):
        return [g.name for g in self.even] + [g.name for g in self.odd]

    def locate(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise ConfigurationError(f"{name!r} is not a generator of {self!r}")

    def generator(self, name):
        odd, i = self.locate(name)
        return self.odd[i] if odd else self.even[i]

    def key_order(self, key):
        exps, odds = key
        return (sum(e * w for e, w in zip(exps, self.even_weights))
                + sum(self.odd_weights[i] for i in odds))

    def degree_function(self, names):
        """Returns key -> total degree in the named generators."""
        even_idx = []
        odd_idx = set()
        for name in names:
            odd, i = self.locate(name)
            if odd:
                odd_idx.add(i)
            else:
                even_idx.append(i)

        def degree(key):
            exps, odds = key
            return sum(exps[i] for i in even_idx) + sum(1 for i in odds if i in odd_idx)
        return degree


def base_name(a, dim):
    """Generator name of base direction a (holomorphic a < dim)."""
    return f"x{a}" if a < dim else f"xb{a - dim}"


def form_name(a, dim):
    return f"dx{a}" if a < dim else f"dxb{a - dim}"


def fiber_name(i):
    return f"y{i}"


@functools.lru_cache(maxsize=None)
def jet_algebra(dim, extra_even=(), extra_odd=()):
    """
    jet_algebra(dim, extra_even=(), extra_odd=()):

    The algebra of series in x, xb, y (even, weight 1) and dx, dxb (odd,
    weight 0) for holomorphic dimension `dim`. Extra generators are given
    as (name, weight) pairs and are appended after the standard ones.

    Example:
    >>> jet_algebra(2).names
    ['x0', 'x1', 'xb0', 'xb1', 'y0', 'y1', 'dx0', 'dx1', 'dxb0', 'dxb1']
    """
    if dim < 1:
        raise ConfigurationError(f"dimension must be positive, got {dim}")
    even = [Generator(f"x{i}") for i in range(dim)]
    even += [Generator(f"xb{i}") for i in range(dim)]
    even += [Generator(f"y{i}") for i in range(dim)]
    even += [Generator(name, False, weight) for name, weight in extra_even]
    odd = [Generator(f"dx{i}", True, 0) for i in range(dim)]
    odd += [Generator(f"dxb{i}", True, 0) for i in range(dim)]
    odd += [Generator(name, True, weight) for name, weight in extra_odd]
    return GradedAlgebra(dim, even, odd)


def _inf(order):
    return math.inf if order is None else order


def _finite(order):
    return None if order == math.inf else order


def min_order(*orders):
    return _finite(min((_inf(o) for o in orders), default=math.inf))


class GradedSeries:
    """
    GradedSeries(algebra, terms=None, order=None, ring=FLOAT)

    Inputs:
    algebra: GradedAlgebra
        Generators of the series.

    terms: dict
        Mapping {(even exponents, odd indices): coefficient}. Odd indices
        may be given in any order; they are sorted with the Koszul sign.

    order: int or None
        Total weighted order up to which the coefficients are exact;
        terms above it are discarded. None for exact polynomials.
    """
    __slots__ = ("algebra", "ring", "order", "_terms")

    def __init__(self, algebra, terms=None, order=None, ring=FLOAT):
        self.algebra = algebra
        self.ring = ring
        self.order = order
        clean = {}
        for (exps, odds), c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != len(algebra.even):
                raise ConfigurationError(
                    f"exponent vector {exps} does not match {len(algebra.even)} even generators")
            odds = tuple(odds)
            if len(set(odds)) != len(odds):
                continue
            sign = 1
            for i in range(len(odds)):
                for j in range(i + 1, len(odds)):
                    if odds[i] > odds[j]:
                        sign = -sign
            key = (exps, tuple(sorted(odds)))
            if order is not None and algebra.key_order(key) > order:
                continue
            clean[key] = clean.get(key, 0) + sign * ring.convert(c)
        self._terms = {k: v for k, v in clean.items() if not ring.is_zero(v)}

    @classmethod
    def _raw(cls, algebra, ring, order, terms):
        new = cls.__new__(cls)
        new.algebra = algebra
        new.ring = ring
        new.order = order
        new._terms = {k: v for k, v in terms.items() if not ring.is_zero(v)}
        return new

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def zero(cls, algebra, order=None, ring=FLOAT):
        return cls._raw(algebra, ring, order, {})

    @classmethod
    def constant(cls, algebra, c, order=None, ring=FLOAT):
        key = ((0,) * len(algebra.even), ())
        return cls._raw(algebra, ring, order, {key: ring.convert(c)})

    @classmethod
    def generator(cls, algebra, name, ring=FLOAT, coefficient=1):
        odd, i = algebra.locate(name)
        exps = [0] * len(algebra.even)
        odds = ()
        if odd:
            odds = (i,)
        else:
            exps[i] = 1
        return cls._raw(algebra, ring, None, {(tuple(exps), odds): ring.convert(coefficient)})

    @classmethod
    def monomial(cls, algebra, powers, odds=(), coefficient=1, ring=FLOAT, order=None):
        """
        Monomial from a {even name: exponent} dict and a sequence of odd
        generator names, multiplied in the given order.
        """
        exps = [0] * len(algebra.even)
        for name, e in powers.items():
            odd, i = algebra.locate(name)
            if odd:
                raise ConfigurationError(f"{name!r} is odd; pass it in `odds`")
            exps[i] += e
        idx = []
        for name in odds:
            odd, i = algebra.locate(name)
            if not odd:
                raise ConfigurationError(f"{name!r} is even")
            idx.append(i)
        return cls(algebra, {(tuple(exps), tuple(idx)): coefficient}, order=order, ring=ring)

    # ------------------------------------------------------------------
    # inspection

    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __repr__(self):
        return f"GradedSeries({len(self._terms)} terms, order={self.order}, ring={self.ring.name})"

    def coefficient(self, key):
        return self._terms.get(key, self.ring.convert(0))

    def is_zero(self):
        return not self._terms

    def valuation(self):
        if not self._terms:
            return math.inf
        return min(self.algebra.key_order(k) for k in self._terms)

    def max_abs(self):
        return max((self.ring.magnitude(c) for c in self._terms.values()), default=0.0)

    def parity(self):
        """Parity of a homogeneous series (count of odd generators mod 2)."""
        parities = {len(odds) % 2 for exps, odds in self._terms}
        if len(parities) > 1:
            raise ConfigurationError("series is not homogeneous in parity")
        return parities.pop() if parities else 0

    def form_degree(self):
        """Number of dx/dxb factors of a homogeneous series."""
        n_forms = 2 * self.algebra.dim
        degrees = {sum(1 for i in odds if i < n_forms) for exps, odds in self._terms}
        if len(degrees) > 1:
            raise ConfigurationError("series is not homogeneous in form degree")
        return degrees.pop() if degrees else 0

    # ------------------------------------------------------------------
    # arithmetic

    def _check(self, other):
        if self.algebra is not other.algebra:
            raise ConfigurationError(f"dimension mismatch: {self.algebra!r} vs {other.algebra!r}")
        if self.ring is not other.ring:
            raise ConfigurationError(f"coefficient ring mismatch: {self.ring.name} vs {other.ring.name}")

    def _truncate(self, terms, order):
        if order is None:
            return terms
        return {k: v for k, v in terms.items() if self.algebra.key_order(k) <= order}

    def __add__(self, other):
        if not isinstance(other, GradedSeries):
            other = GradedSeries.constant(self.algebra, other, ring=self.ring)
        self._check(other)
        order = min_order(self.order, other.order)
        terms = dict(self._terms)
        for k, v in other._terms.items():
            terms[k] = terms.get(k, 0) + v
        return GradedSeries._raw(self.algebra, self.ring, order, self._truncate(terms, order))

    __radd__ = __add__

    def __neg__(self):
        return GradedSeries._raw(self.algebra, self.ring, self.order,
                                 {k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = self.ring.convert(c)
        return GradedSeries._raw(self.algebra, self.ring, self.order,
                                 {k: c * v for k, v in self._terms.items()})

    def product_order(self, other):
        return _finite(min(_inf(self.order) + other.valuation(),
                           _inf(other.order) + self.valuation()))

    def __mul__(self, other):
        if not isinstance(other, GradedSeries):
            return self.scale(other)
        self._check(other)
        order = self.product_order(other)
        key_order = self.algebra.key_order
        right = [(k, v, key_order(k)) for k, v in other._terms.items()]
        terms = {}
        for ka, ca in self._terms.items():
            ea, oa = ka
            wa = key_order(ka)
            for kb, cb, wb in right:
                if order is not None and wa + wb > order:
                    continue
                sign, odds = merge_odd(oa, kb[1])
                if not sign:
                    continue
                key = (tuple(i + j for i, j in zip(ea, kb[0])), odds)
                terms[key] = terms.get(key, 0) + sign * ca * cb
        return GradedSeries._raw(self.algebra, self.ring, order, terms)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, p):
        result = GradedSeries.constant(self.algebra, 1, ring=self.ring)
        for _ in range(p):
            result = result * self
        return result

    # ------------------------------------------------------------------
    # derivations

    def derive(self, name):
        """
        Partial derivative in the named generator. For odd generators this
        is the left derivative: the generator is moved to the front first.
        """
        odd, i = self.algebra.locate(name)
        weight = self.algebra.odd_weights[i] if odd else self.algebra.even_weights[i]
        order = None if self.order is None else self.order - weight
        terms = {}
        for (exps, odds), c in self._terms.items():
            if odd:
                if i not in odds:
                    continue
                p = odds.index(i)
                key = (exps, odds[:p] + odds[p + 1:])
                terms[key] = terms.get(key, 0) + (-c if p % 2 else c)
            else:
                if exps[i] == 0:
                    continue
                new = list(exps)
                new[i] -= 1
                key = (tuple(new), odds)
                terms[key] = terms.get(key, 0) + exps[i] * c
        return GradedSeries._raw(self.algebra, self.ring, order, terms)

    def right_derive(self, name):
        """Right derivative; agrees with derive() for even generators."""
        odd, i = self.algebra.locate(name)
        if not odd:
            return self.derive(name)
        order = None if self.order is None else self.order - self.algebra.odd_weights[i]
        terms = {}
        for (exps, odds), c in self._terms.items():
            if i not in odds:
                continue
            p = odds.index(i)
            key = (exps, odds[:p] + odds[p + 1:])
            after = len(odds) - 1 - p
            terms[key] = terms.get(key, 0) + (-c if after % 2 else c)
        return GradedSeries._raw(self.algebra, self.ring, order, terms)

    def times(self, name, coefficient=1):
        """Left multiplication by a generator."""
        gen = GradedSeries.generator(self.algebra, name, ring=self.ring, coefficient=coefficient)
        return gen * self

    # ------------------------------------------------------------------
    # projections

    def project(self, predicate):
        return GradedSeries._raw(self.algebra, self.ring, self.order,
                                 {k: v for k, v in self._terms.items() if predicate(k)})

    def homogeneous_part(self, names, degree):
        deg = self.algebra.degree_function(names)
        return self.project(lambda k: deg(k) == degree)

    def drop_above(self, names, degree):
        """
        Removes terms of degree > `degree` in the named generators. The
        exactness claim then refers to the remaining degrees only.
        """
        deg = self.algebra.degree_function(names)
        return self.project(lambda k: deg(k) <= degree)

    def resolved(self, order):
        """Terms up to `order`; fails if the series does not resolve it."""
        if self.order is not None and order is not None and order > self.order:
            raise TruncationError(f"order {order} requested, series exact to {self.order}")
        return GradedSeries._raw(self.algebra, self.ring, order, self._truncate(self._terms, order))

    def truncate(self, order):
        return GradedSeries._raw(self.algebra, self.ring, min_order(self.order, order),
                                 self._truncate(self._terms, order))

    def evaluate_at_origin(self):
        """Constant coefficient (all generators set to zero)."""
        return self.coefficient(((0,) * len(self.algebra.even), ()))

    # ------------------------------------------------------------------
    # composition

    def substitute(self, subs):
        """
        substitute(subs):

        Replaces even generators by series: subs maps generator names to
        GradedSeries. Each replacement must have valuation at least the
        weight of the generator it replaces, so truncation is preserved.
        """
        index = {}
        for name, s in subs.items():
            odd, i = self.algebra.locate(name)
            if odd:
                raise ConfigurationError(f"cannot substitute odd generator {name!r}")
            self._check(s)
            assert s.valuation() >= self.algebra.even_weights[i], \
                f"substitution for {name} lowers the valuation"
            index[i] = s
        powers = {i: [GradedSeries.constant(self.algebra, 1, ring=self.ring)] for i in index}
        result = GradedSeries.zero(self.algebra, order=self.order, ring=self.ring)
        pieces = {}
        for (exps, odds), c in self._terms.items():
            rest = list(exps)
            factor_key = []
            for i in index:
                factor_key.append((i, exps[i]))
                rest[i] = 0
            factor_key = tuple(factor_key)
            pieces.setdefault(factor_key, {})
            key = (tuple(rest), odds)
            pieces[factor_key][key] = pieces[factor_key].get(key, 0) + c
        for factor_key, terms in pieces.items():
            factor = GradedSeries._raw(self.algebra, self.ring, None, terms)
            for i, e in factor_key:
                while len(powers[i]) <= e:
                    powers[i].append(powers[i][-1] * index[i])
                factor = factor * powers[i][e]
            result = result + factor
        return result

    # ------------------------------------------------------------------
    # comparison and IO

    def equals(self, other, tol=0.0):
        self._check(other)
        diff = self - other
        return diff.max_abs() <= tol

    def to_json(self):
        terms = []
        for (exps, odds), c in sorted(self._terms.items(), key=lambda kc: kc[0]):
            re, im = self.ring.to_json(c)
            terms.append({"even": list(exps), "odd": list(odds), "re": re, "im": im})
        return {"dim": self.algebra.dim,
                "truncation": self.order,
                "ring": self.ring.name,
                "generators": self.algebra.names,
                "terms": terms}

    @classmethod
    def from_json(cls, data, algebra=None):
        try:
            ring = get_ring(data.get("ring", "float"))
            if algebra is None:
                algebra = jet_algebra(int(data["dim"]))
            if "generators" in data and list(data["generators"]) != algebra.names:
                raise ParseError("generator list does not match the algebra", "series")
            terms = {}
            for t in data["terms"]:
                key = (tuple(t["even"]), tuple(t["odd"]))
                terms[key] = ring.from_json(t["re"], t["im"])
            return cls(algebra, terms, order=data.get("truncation"), ring=ring)
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"malformed series: {e}", "series")


# ----------------------------------------------------------------------
# exterior derivatives on the base


def d_x(f):
    """Holomorphic exterior derivative sum_a dx^a d/dx^a, acting from the left."""
    dim = f.algebra.dim
    result = GradedSeries.zero(f.algebra, order=None, ring=f.ring)
    for a in range(dim):
        result = result + f.derive(f"x{a}").times(f"dx{a}")
    return result.truncate(None if f.order is None else f.order - 1)


def d_xbar(f):
    dim = f.algebra.dim
    result = GradedSeries.zero(f.algebra, order=None, ring=f.ring)
    for a in range(dim):
        result = result + f.derive(f"xb{a}").times(f"dxb{a}")
    return result.truncate(None if f.order is None else f.order - 1)


def d_M(f):
    return d_x(f) + d_xbar(f)


def series_mul(a, b):
    return a * b


def series_derive(a, var):
    """Partial derivative in a generator name, or 'd_x' / 'd_xbar' / 'd_M'."""
    if var == "d_x":
        return d_x(a)
    if var == "d_xbar":
        return d_xbar(a)
    if var == "d_M":
        return d_M(a)
    return a.derive(var)


# ----------------------------------------------------------------------
# matrices of series


def matmul(A, B):
    rows, inner, cols = len(A), len(B), len(B[0])
    assert len(A[0]) == inner, "matrix shapes do not match"
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = A[i][0] * B[0][j]
            for k in range(1, inner):
                acc = acc + A[i][k] * B[k][j]
            row.append(acc)
        out.append(row)
    return out


def constant_matrix(algebra, rows, ring=FLOAT):
    return [[GradedSeries.constant(algebra, c, ring=ring) for c in row] for row in rows]


def matrix_series_invert(M):
    """
    matrix_series_invert(M):

    Inverts a square matrix of series by the geometric series
    M^-1 = sum_k (-C^-1 N)^k C^-1 where C is the constant part of M at
    the basepoint and N = M - C has positive valuation.

    Raises NotInvertibleError when C is singular.
    """
    size = len(M)
    first = M[0][0]
    algebra, ring = first.algebra, first.ring
    order = min_order(*(e.order for row in M for e in row))
    if order is None:
        raise ConfigurationError("matrix inversion needs a truncated input")
    C = [[M[i][j].evaluate_at_origin() for j in range(size)] for i in range(size)]
    Cinv = constant_matrix(algebra, ring.inverse_matrix(C), ring)
    N = [[M[i][j] - GradedSeries.constant(algebra, C[i][j], ring=ring) for j in range(size)]
         for i in range(size)]
    P = [[-e for e in row] for row in matmul(Cinv, N)]
    term = [[e.truncate(order) for e in row] for row in Cinv]
    result = term
    for k in range(order + 1):
        term = matmul(P, term)
        if all(e.is_zero() for row in term for e in row):
            break
        result = [[r + t for r, t in zip(rrow, trow)] for rrow, trow in zip(result, term)]
    logger.debug(f"inverted {size}x{size} series matrix to order {order}")
    return [[e.truncate(order) for e in row] for row in result]


# ----------------------------------------------------------------------
# fiber derivations


class DerivationForm:
    """
    Form-valued derivation sum_k R^k d/dy^k of the fiber algebra. Each
    component R^k is a series whose dx / dxb content carries the form part,
    so a one-form R = dx^j R_j + dxb^j R_jbar stores R^k = dx^j R^k_j + ...

    `degree` is the form degree (1 for connections, 2 for curvatures).
    """
    def __init__(self, components, degree=1):
        self.components = tuple(components)
        self.degree = degree
        assert self.components, "a derivation needs at least one component"
        dim = self.algebra.dim
        assert len(self.components) == dim, \
            f"expected {dim} components, got {len(self.components)}"

    @property
    def algebra(self):
        return self.components[0].algebra

    @property
    def ring(self):
        return self.components[0].ring

    @property
    def order(self):
        return min_order(*(c.order for c in self.components))

    @classmethod
    def from_components(cls, algebra, components, ring=FLOAT, order=None):
        """
        Builds a one-form from {(a, k): series} where a indexes base
        directions (a < dim holomorphic) and the series is form degree 0.
        """
        dim = algebra.dim
        comps = [GradedSeries.zero(algebra, order=order, ring=ring) for _ in range(dim)]
        for (a, k), s in components.items():
            comps[k] = comps[k] + s.times(form_name(a, dim))
        return cls(comps, degree=1)

    def component(self, a, k):
        """Coefficient series R^k_a of the base form dx^a (or dxb)."""
        return self.components[k].derive(form_name(a, self.algebra.dim))

    def apply(self, f):
        """The derivation acting on a series: sum_k R^k d f / d y^k."""
        result = GradedSeries.zero(f.algebra, order=None, ring=f.ring)
        for k, comp in enumerate(self.components):
            df = f.derive(fiber_name(k))
            if df.is_zero() and df.order is None:
                continue
            result = result + comp * df
        return result

    def y_degree_part(self, m):
        names = [fiber_name(i) for i in range(self.algebra.dim)]
        return DerivationForm([c.homogeneous_part(names, m) for c in self.components], self.degree)

    def project(self, predicate):
        return DerivationForm([c.project(predicate) for c in self.components], self.degree)

    def truncate(self, order):
        return DerivationForm([c.truncate(order) for c in self.components], self.degree)

    def __add__(self, other):
        return DerivationForm([a + b for a, b in zip(self.components, other.components)], self.degree)

    def __sub__(self, other):
        return DerivationForm([a - b for a, b in zip(self.components, other.components)], self.degree)

    def __neg__(self):
        return DerivationForm([-a for a in self.components], self.degree)

    def scale(self, c):
        return DerivationForm([a.scale(c) for a in self.components], self.degree)

    def max_abs(self):
        return max(c.max_abs() for c in self.components)

    def commutator(self, other):
        return derivation_commutator(self, other)

    def to_json(self):
        return {"degree": self.degree, "components": [c.to_json() for c in self.components]}


def derivation_commutator(A, B):
    """
    Graded commutator [A, B]^i = A(B^i) - (-1)^{|A||B|} B(A^i) of
    form-valued derivations, |.| the form degree.
    """
    if A.algebra is not B.algebra or A.ring is not B.ring:
        raise ConfigurationError("derivations live on different algebras")
    sign = -1 if (A.degree * B.degree) % 2 else 1
    comps = []
    for a_i, b_i in zip(A.components, B.components):
        comps.append(A.apply(b_i) - B.apply(a_i).scale(sign))
    return DerivationForm(comps, A.degree + B.degree)


def derivation_d_M(A):
    """Exterior derivative of the coefficients of a derivation."""
    return DerivationForm([d_M(c) for c in A.components], A.degree + 1)
