"""
Fedosov connection on the holomorphic Weyl bundle, modulo hbar.

Sections are form valued series in the fiber coordinates y. The weight of
y^a hbar^b is a + 2b; the computations here live in the hbar^0 sector, where
the commutator hbar^-1 [a, b] of the Moyal product reduces to the Poisson
bracket {a, b} = (Omega^-1)^{ij} da/dy^i db/dy^j.

    nabla     = d_M - dx^j G^i_{kj} y^k d/dy^i
    delta     = dx^k d/dy^k
    delta^-1  = (p + q)^-1 y^k iota(dx^k)     (p holomorphic form degree, q y-degree)
    I         = delta^-1 (R_h + nabla I + 1/2 {I, I})

with R_h = 1/2 nabla^2(y^i) Omega_{il} y^l the curvature Hamiltonian. The
Fedosov connection D_F = nabla - delta + {I, -} then squares to the
Hamiltonian action of C = R_h + nabla I - delta I + 1/2 {I, I}.
"""
import dataclasses
import functools
import itertools
import logging
import math

import numpy as np
import sympy as sp

from .errors import ConfigurationError, GeometryError, TruncationError
from .geometry import FlatnessReport, split_bidegree, taylor_tensor
from .opts import DEFAULT_TOLERANCE
from .series import DerivationForm, GradedSeries, d_M, d_xbar, fiber_name, form_name

logger = logging.getLogger(name="rwglobal")


def _fraction(ring, num, den):
    return sp.Rational(num, den) if ring.exact else num / den


@dataclasses.dataclass(frozen=True, eq=False)
class WeylSection:
    """
    Section of the holomorphic Weyl bundle.

    series: GradedSeries
        Form valued series in x, xb, y.
    weight_max: int or None
        Largest weight retained; None if the section is not weight capped.
    hbar_power: int
        Power of hbar multiplying the series (0 for the classical sector).
    """
    series: GradedSeries
    weight_max: object = None
    hbar_power: int = 0

    @property
    def algebra(self):
        return self.series.algebra

    @property
    def fiber_names(self):
        return [fiber_name(i) for i in range(self.algebra.dim)]

    def weight_part(self, w):
        return self.series.homogeneous_part(self.fiber_names, w - 2 * self.hbar_power)

    def weights(self):
        deg = self.algebra.degree_function(self.fiber_names)
        return sorted({deg(key) + 2 * self.hbar_power for key, _ in self.series.items()})

    def is_zero(self):
        return self.series.is_zero()

    def max_abs(self):
        return self.series.max_abs()

    def to_json(self):
        return {"weight_max": self.weight_max,
                "hbar_power": self.hbar_power,
                "series": self.series.to_json()}


def _unwrap(w):
    if isinstance(w, WeylSection):
        return w.series, lambda s: dataclasses.replace(w, series=s)
    return w, lambda s: s


def _fiber_names(algebra):
    return [fiber_name(i) for i in range(algebra.dim)]


def _holomorphic_form_count(algebra):
    dim = algebra.dim

    def count(key):
        return sum(1 for i in key[1] if i < dim)
    return count


def delta(w):
    """delta(w) = sum_k dx^k dw/dy^k."""
    s, wrap = _unwrap(w)
    dim = s.algebra.dim
    result = GradedSeries.zero(s.algebra, order=None, ring=s.ring)
    for k in range(dim):
        result = result + s.derive(fiber_name(k)).times(form_name(k, dim))
    return wrap(result.truncate(None if s.order is None else s.order - 1))


def delta_inv(w):
    """
    delta_inv(w):

    delta^-1 on each (p, q) homogeneous piece, p the number of holomorphic
    dx factors and q the y-degree: (p + q)^-1 y^k iota(dx^k). Pieces with
    p = q = 0 are annihilated, and antiholomorphic forms are spectators.

    Example:
    >>> alg = jet_algebra(2)
    >>> delta_inv(GradedSeries.generator(alg, "dx0")).equals(GradedSeries.generator(alg, "y0"))
    True
    """
    s, wrap = _unwrap(w)
    alg, ring, dim = s.algebra, s.ring, s.algebra.dim
    p = _holomorphic_form_count(alg)
    q = alg.degree_function(_fiber_names(alg))
    result = GradedSeries.zero(alg, order=None, ring=ring)
    for total in sorted({p(key) + q(key) for key, _ in s.items()}):
        if total == 0:
            continue
        part = s.project(lambda key, t=total: p(key) + q(key) == t)
        acc = GradedSeries.zero(alg, order=None, ring=ring)
        for k in range(dim):
            acc = acc + part.derive(form_name(k, dim)).times(fiber_name(k))
        result = result + acc.scale(_fraction(ring, 1, total))
    return wrap(result.truncate(None if s.order is None else s.order + 1))


def pi_0(w):
    """Projection onto the part with no y and no holomorphic dx."""
    s, wrap = _unwrap(w)
    p = _holomorphic_form_count(s.algebra)
    q = s.algebra.degree_function(_fiber_names(s.algebra))
    return wrap(s.project(lambda key: p(key) == 0 and q(key) == 0))


def poisson_bracket(f, g, geo):
    """{f, g} = (Omega^-1)^{ij} df/dy^i dg/dy^j, form factors kept in order."""
    fs, wrap = _unwrap(f)
    gs, _ = _unwrap(g)
    dim = geo.dim
    df = [fs.derive(fiber_name(i)) for i in range(dim)]
    dg = [gs.derive(fiber_name(j)) for j in range(dim)]
    result = GradedSeries.zero(fs.algebra, order=None, ring=fs.ring)
    for i, j in itertools.product(range(dim), repeat=2):
        c = geo.omega_inv[i][j]
        if c != 0:
            result = result + (df[i] * dg[j]).scale(c)
    return wrap(result)


def hamiltonian_vector_field(H, geo, degree=1):
    """Derivation X with X^j = {H, y^j} = (Omega^-1)^{ij} dH/dy^i."""
    s, _ = _unwrap(H)
    dim = geo.dim
    dH = [s.derive(fiber_name(i)) for i in range(dim)]
    comps = []
    for j in range(dim):
        acc = GradedSeries.zero(s.algebra, order=None, ring=s.ring)
        for i in range(dim):
            c = geo.omega_inv[i][j]
            if c != 0:
                acc = acc + dH[i].scale(c)
        comps.append(acc.truncate(None if s.order is None else s.order - 1))
    return DerivationForm(comps, degree=degree)


def euler_hamiltonian(X, geo):
    """
    euler_hamiltonian(X, geo):

    H = sum_k (k + 1)^-1 X^i_(k) Omega_{il} y^l with X_(k) the y-degree k part
    of the derivation X. For a Hamiltonian X this recovers its Hamiltonian,
    so hamiltonian_vector_field(euler_hamiltonian(X)) == X.
    """
    alg, ring, dim = X.algebra, X.ring, geo.dim
    names = _fiber_names(alg)
    y = [GradedSeries.generator(alg, nm, ring=ring) for nm in names]
    degrees = set()
    deg = alg.degree_function(names)
    for comp in X.components:
        degrees |= {deg(key) for key, _ in comp.items()}
    H = GradedSeries.zero(alg, order=None, ring=ring)
    for k in sorted(degrees):
        part = X.y_degree_part(k)
        for i, l in itertools.product(range(dim), repeat=2):
            if geo.omega[i][l] != 0:
                H = H + (part.components[i] * y[l]).scale(_fraction(ring, 1, k + 1) * geo.omega[i][l])
    return H.truncate(None if X.order is None else X.order + 1)


@functools.lru_cache(maxsize=None)
def _connection_forms(geo):
    """Components dx^j G^i_{kj} y^k of the fiber connection."""
    alg, ring, dim = geo.algebra, geo.ring, geo.dim
    forms = []
    for i in range(dim):
        acc = GradedSeries.zero(alg, order=geo.K + 1, ring=ring)
        for j, k in itertools.product(range(dim), repeat=2):
            gamma = geo.Gamma(i, k, j)
            if gamma.is_zero():
                continue
            acc = acc + (gamma * GradedSeries.generator(alg, fiber_name(k), ring=ring)).times(form_name(j, dim))
        forms.append(acc)
    return tuple(forms)


def nabla(w, geo):
    """nabla w = d_M w - dx^j G^i_{kj} y^k dw/dy^i."""
    s, wrap = _unwrap(w)
    result = d_M(s)
    for i, form in enumerate(_connection_forms(geo)):
        dw = s.derive(fiber_name(i))
        if dw.is_zero():
            continue
        result = result - form * dw
    return wrap(result)


def curvature_hamiltonian(geo):
    """R_h = 1/2 nabla^2(y^i) Omega_{il} y^l, a two-form of y-degree 2."""
    alg, ring, dim = geo.algebra, geo.ring, geo.dim
    y = [GradedSeries.generator(alg, fiber_name(i), ring=ring) for i in range(dim)]
    half = _fraction(ring, 1, 2)
    R_h = GradedSeries.zero(alg, order=None, ring=ring)
    for i in range(dim):
        F = nabla(nabla(y[i], geo), geo)
        for l in range(dim):
            if geo.omega[i][l] != 0:
                R_h = R_h + (F * y[l]).scale(half * geo.omega[i][l])
    return R_h


def cubic_reference(geo):
    """
    cubic_reference(geo):

    Weight 3 part of the Fedosov connection at the basepoint, written out
    in the Christoffel jets:

        1/8 Omega_{il} [(-dG^i_{kj}/dx^a + G^m_{ka} G^i_{mj}) - (a <-> j)] y^l y^k y^a dx^j
      + 1/6 Omega_{il} dG^i_{kj}/dxb^a y^l y^k y^j dxb^a

    Returns:
    (hol, antihol), arrays of shape (dim,)*4 indexed by the form direction
    first and symmetric in the three fiber slots.
    """
    dim = geo.dim
    omega = np.array(geo.omega, dtype=complex)
    G = geo.gamma_at_origin
    dG = np.zeros((dim,) * 4, dtype=complex)
    dGb = np.zeros((dim,) * 4, dtype=complex)
    for i, k, j, a in itertools.product(range(dim), repeat=4):
        dG[i, k, j, a] = complex(geo.Gamma(i, k, j).derive(f"x{a}").evaluate_at_origin())
        dGb[i, k, j, a] = complex(geo.Gamma(i, k, j).derive(f"xb{a}").evaluate_at_origin())
    # T[i, k, a, j]: coefficient of y^k dx^a dx^j in nabla^2 y^i
    T = -np.einsum("ikja->ikaj", dG) + np.einsum("mka,imj->ikaj", G, G)
    T = T - np.einsum("ikaj->ikja", T)
    hol = np.einsum("il,ikaj->jlka", omega, T) / 8.0
    antihol = np.einsum("il,ikja->alkj", omega, dGb) / 6.0
    return _symmetrise_fiber(hol), _symmetrise_fiber(antihol)


def _symmetrise_fiber(t):
    out = np.zeros_like(t)
    for p in itertools.permutations((1, 2, 3)):
        out += np.transpose(t, (0,) + p)
    return out / 6.0


def cubic_tensors(I, geo):
    """Taylor tensors at the basepoint of the weight 3 part of I, split as in cubic_reference."""
    s, _ = _unwrap(I)
    I3 = s.homogeneous_part(geo.fiber_names, 3)
    dim = geo.dim
    hol = np.array([taylor_tensor(I3.derive(form_name(j, dim)), geo.fiber_names, 3)
                    for j in range(dim)])
    antihol = np.array([taylor_tensor(I3.derive(form_name(dim + a, dim)), geo.fiber_names, 3)
                        for a in range(dim)])
    return hol, antihol


def _require_symplectic(geo):
    if geo.mode == "generic":
        raise GeometryError("Fedosov recursion needs an Omega-compatible connection")


def fedosov_step(geo, I, weight_max, source=None):
    """One application of I -> delta^-1(R_h + nabla I + 1/2 {I, I})."""
    s, wrap = _unwrap(I)
    if source is None:
        source = curvature_hamiltonian(geo)
    rhs = source + nabla(s, geo) + poisson_bracket(s, s, geo).scale(_fraction(s.ring, 1, 2))
    new = delta_inv(rhs).drop_above(_fiber_names(s.algebra), weight_max)
    return wrap(new)


def check_weight(g, weight_max, what="weight_max"):
    """Weights 3..K+2 are the ones the connection jets of g resolve."""
    if weight_max < 3:
        raise ConfigurationError(f"{what} must be at least 3, got {weight_max}")
    if weight_max > g.K + 2:
        raise TruncationError(
            f"{what}={weight_max} needs connection jets of order {weight_max - 2}, "
            f"geometry has K={g.K}")


def fedosov_solve(g, weight_max, max_iterations=None):
    """
    fedosov_solve(g, weight_max, max_iterations=None):

    Solves the Fedosov recursion by fixed point iteration. Each step fixes
    one more weight, so the iteration is stable after weight_max - 2 steps.

    Returns:
    WeylSection of weight 3..weight_max
    """
    check_weight(g, weight_max)
    _require_symplectic(g)
    source = curvature_hamiltonian(g)
    I = GradedSeries.zero(g.algebra, order=None, ring=g.ring)
    steps = max_iterations if max_iterations is not None else weight_max + 1
    tol = g.ring.drop_tolerance
    stable = False
    for step in range(steps):
        new = fedosov_step(g, I, weight_max, source=source)
        if step > 0 and (new - I).max_abs() <= tol:
            stable = True
            I = new
            break
        I = new
        logger.debug(f"Fedosov iteration {step + 1}: {len(I)} terms")
    assert stable or max_iterations is not None, "Fedosov iteration did not stabilise"
    logger.info(f"Fedosov connection solved to weight {weight_max} after {step + 1} steps")
    return WeylSection(series=I, weight_max=weight_max)


def fedosov_curvature(g, I):
    """
    C = R_h + nabla I - delta I + 1/2 {I, I}, restricted to weights below
    weight_max, which are the ones the capped I resolves.
    """
    s, _ = _unwrap(I)
    C = (curvature_hamiltonian(g) + nabla(s, g) - delta(s)
         + poisson_bracket(s, s, g).scale(_fraction(s.ring, 1, 2)))
    if isinstance(I, WeylSection) and I.weight_max is not None:
        C = C.drop_above(_fiber_names(s.algebra), I.weight_max - 1)
    return C


def fedosov_residual(g, I):
    """Max-norm of the Fedosov curvature, split by bidegree."""
    C = fedosov_curvature(g, I)
    pieces = {"(2,0)": 0.0, "(1,1)": 0.0, "(0,2)": 0.0}
    for (p, q), part in split_bidegree(C).items():
        label = f"({p},{q})"
        if label in pieces:
            pieces[label] = max(pieces[label], part.max_abs())
    report = FlatnessReport(pieces=pieces, resolved_order=C.order)
    logger.info(f"Fedosov curvature residual {report.residual:.3e}")
    return report


def extract_linf(g, I=None, weight_max=4):
    """
    extract_linf(g, I=None, weight_max=4):

    The first L-infinity products read off the Fedosov connection as
    derivations of the fiber:

        l0 = -dx^i d/dy^i
        l1 = -dx^j G^i_{kj} y^k d/dy^i
        l2 = X_{I_3}, the Hamiltonian vector field of the weight 3 part of I
    """
    check_weight(g, max(weight_max, 4))
    if I is None:
        I = fedosov_solve(g, max(weight_max, 4))
    elif I.weight_max is not None and I.weight_max < 4:
        raise ConfigurationError("L-infinity products need a Fedosov solution to weight >= 4")
    alg, ring, dim = g.algebra, g.ring, g.dim
    l0 = DerivationForm([GradedSeries.generator(alg, form_name(i, dim), ring=ring, coefficient=-1)
                         for i in range(dim)], degree=1)
    l1 = DerivationForm([-form for form in _connection_forms(g)], degree=1)
    l2 = hamiltonian_vector_field(I.weight_part(3), g)
    return l0, l1, l2


# ----------------------------------------------------------------------
# Theta series


@dataclasses.dataclass(frozen=True, eq=False)
class ThetaSeries:
    """Components Theta_ibar of the antiholomorphic one-form, y-degree 3..N."""
    components: tuple
    N: int
    geometry: object

    def as_form(self):
        dim = self.geometry.dim
        total = GradedSeries.zero(self.geometry.algebra, order=None, ring=self.geometry.ring)
        for l, comp in enumerate(self.components):
            total = total + comp.times(form_name(dim + l, dim))
        return total

    def leading_term(self):
        return [c.homogeneous_part(self.geometry.fiber_names, 3) for c in self.components]


def covariant_euler(f, geo):
    """y^l d/dx^l - y^l G^m_{la} y^a d/dy^m."""
    alg, ring, dim = geo.algebra, geo.ring, geo.dim
    y = [GradedSeries.generator(alg, fiber_name(i), ring=ring) for i in range(dim)]
    result = GradedSeries.zero(alg, order=None, ring=ring)
    for l in range(dim):
        result = result + f.derive(f"x{l}") * y[l]
    for m in range(dim):
        df = f.derive(fiber_name(m))
        if df.is_zero():
            continue
        result = result - _gamma_yy(geo)[m] * df
    return result


@functools.lru_cache(maxsize=None)
def _gamma_yy(geo):
    alg, ring, dim = geo.algebra, geo.ring, geo.dim
    y = [GradedSeries.generator(alg, fiber_name(i), ring=ring) for i in range(dim)]
    out = []
    for m in range(dim):
        acc = GradedSeries.zero(alg, order=geo.K + 2, ring=ring)
        for l, a in itertools.product(range(dim), repeat=2):
            acc = acc + geo.Gamma(m, l, a) * (y[l] * y[a])
        out.append(acc)
    return tuple(out)


def theta_series(g, N, tol=None):
    """
    theta_series(g, N, tol=None):

    Theta_ibar = sum_{m=3}^N (1/m!) D^(m-3) P_ibar, with
    P_ibar = Omega_{kl} y^l dG^k_{ab}/dxb^i y^a y^b and D the covariant
    Euler operator. Defined when the (2,0) curvature vanishes, where Theta
    is the antiholomorphic part of the Fedosov solution.
    """
    check_weight(g, N, what="N")
    tol = DEFAULT_TOLERANCE if tol is None else tol
    if g.curvature_20_norm() > tol:
        raise GeometryError("hyperkähler mode required")
    alg, ring, dim = g.algebra, g.ring, g.dim
    y = [GradedSeries.generator(alg, fiber_name(i), ring=ring) for i in range(dim)]
    names = g.fiber_names
    components = []
    for ib in range(dim):
        P = GradedSeries.zero(alg, order=None, ring=ring)
        for k in range(dim):
            lowered = GradedSeries.zero(alg, order=None, ring=ring)
            for l in range(dim):
                if g.omega[k][l] != 0:
                    lowered = lowered + y[l].scale(g.omega[k][l])
            if lowered.is_zero():
                continue
            for a, b in itertools.product(range(dim), repeat=2):
                A = g.atiyah(k, a, b, ib)
                if not A.is_zero():
                    P = P + lowered * A * y[a] * y[b]
        theta = GradedSeries.zero(alg, order=None, ring=ring)
        term = P
        for m in range(3, N + 1):
            theta = theta + term.scale(_fraction(ring, 1, math.factorial(m)))
            if m < N:
                term = covariant_euler(term, g)
        components.append(theta.drop_above(names, N))
    logger.info(f"Theta series built through y-order {N}")
    return ThetaSeries(components=tuple(components), N=N, geometry=g)


def theta_mc_residual(theta):
    """
    Max-norm of dTheta_jbar/dxb^i - dTheta_ibar/dxb^j + {Theta_ibar, Theta_jbar}
    over i < j, on the y-degrees the truncated series resolves.
    """
    g = theta.geometry
    names = g.fiber_names
    worst = 0.0
    for i, j in itertools.combinations(range(g.dim), 2):
        Ti, Tj = theta.components[i], theta.components[j]
        mc = Tj.derive(f"xb{i}") - Ti.derive(f"xb{j}") + poisson_bracket(Ti, Tj, g)
        worst = max(worst, mc.drop_above(names, theta.N).max_abs())
    logger.info(f"Theta Maurer-Cartan residual {worst:.3e}")
    return worst


def theta_form_residual(theta):
    """Same check in form language: d_xbar Theta + 1/2 {Theta, Theta}."""
    g = theta.geometry
    form = theta.as_form()
    mc = d_xbar(form) + poisson_bracket(form, form, g).scale(_fraction(g.ring, 1, 2))
    return mc.drop_above(g.fiber_names, theta.N).max_abs()
