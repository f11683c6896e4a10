"""Exact and numeric application of L_gamma on single angular modes.

L_gamma = -x d^2/drho^2 - (1/rho - (3+2 gamma) rho) d/drho - rho^-2 d^2/domega^2
          + (gamma+1)^2,                                   x = 1 - rho^2.

Functions are handled one angular mode at a time.  An *element* is any
object with attributes ``gamma``, ``m``, ``c0`` and a method ``parts(x)``
returning ``(s, ds, h, dh)``: the values and rho-derivatives of a smooth part
``s`` and of the profile ``h`` multiplying the singular weight
``w = x^-gamma`` (gamma != 0) or ``w = log x`` (gamma = 0), so that
``f = s + w h``.  ``boundary_values()`` returns ``(s(1), h(1))``.

Inner products carry the angular factor: for two functions on the same mode
``<f, g> = 2 pi int f conj(g) x^gamma rho drho``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import (
    GammaParam, PhiGamma, QuadratureRule, RadialProfile, WeightKind, as_gamma,
    phi_eval, radial_rule, s_series,
)

DEFAULT_C0 = 4.0


class ModeMismatchError(ValueError):
    pass


class MalformedElementError(ValueError):
    pass


def singular_weight(gamma: float, x):
    """w_gamma(x) and its rho-derivative."""
    x = np.asarray(x, dtype=float)
    rho = np.sqrt(1.0 - x)
    if gamma == 0:
        return np.log(x), -2.0 * rho / x
    w = x ** (-gamma)
    return w, 2.0 * gamma * rho * w / x


class RadialElement:
    """Base class for single-mode functions f = s + w_gamma h."""
    gamma: float
    m: int
    c0: float = DEFAULT_C0

    def parts(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def boundary_values(self):  # pragma: no cover - interface
        raise NotImplementedError

    def evaluate(self, x):
        """Return (f, d_rho f) at x."""
        s, ds, h, dh = self.parts(x)
        w, dw = singular_weight(self.gamma, x)
        return s + w * h, ds + w * dh + dw * h


@dataclass(frozen=True)
class ConormalElement(RadialElement):
    """f = smooth + w_gamma * singular on angular mode m, with polynomial profiles."""
    gamma: float
    m: int
    smooth: RadialProfile
    singular: RadialProfile
    c0: float = DEFAULT_C0

    def __post_init__(self):
        g = as_gamma(self.gamma).require_traces().gamma
        object.__setattr__(self, "gamma", g)
        m = int(self.m)
        object.__setattr__(self, "m", m)
        for name in ("smooth", "singular"):
            p = getattr(self, name)
            if not isinstance(p, RadialProfile):
                p = RadialProfile(m, p)
            if abs(p.m) != abs(m):
                raise ModeMismatchError(f"{name} profile on mode {p.m}, element on mode {m}")
            if not np.all(np.isfinite(p.coeffs)):
                raise MalformedElementError(f"{name} profile has non-finite coefficients")
            object.__setattr__(self, name, RadialProfile(m, p.coeffs))

    @classmethod
    def from_coeffs(cls, gamma, m, smooth=(0.0,), singular=(0.0,), c0=DEFAULT_C0):
        return cls(gamma, m, RadialProfile(m, smooth), RadialProfile(m, singular), c0)

    def parts(self, x):
        s, ds = self.smooth.evaluate(x)
        h, dh = self.singular.evaluate(x)
        return s, ds, h, dh

    def boundary_values(self):
        return self.smooth.boundary_value(), self.singular.boundary_value()

    # linear structure -----------------------------------------------------
    def __add__(self, other: "ConormalElement") -> "ConormalElement":
        if other.m != self.m or other.gamma != self.gamma:
            raise ModeMismatchError("elements differ in mode or gamma")
        return ConormalElement(self.gamma, self.m, self.smooth + other.smooth,
                               self.singular + other.singular, self.c0)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, a) -> "ConormalElement":
        return ConormalElement(self.gamma, self.m, self.smooth.scale(a),
                               self.singular.scale(a), self.c0)

    def conj_coeffs(self):
        return ConormalElement(self.gamma, self.m, RadialProfile(self.m, np.conj(self.smooth.coeffs)),
                               RadialProfile(self.m, np.conj(self.singular.coeffs)), self.c0)

    def allclose(self, other, rtol=1e-12, atol=1e-12) -> bool:
        return (self.m == other.m and self.smooth.allclose(other.smooth, rtol, atol)
                and self.singular.allclose(other.singular, rtol, atol))


@dataclass(frozen=True)
class PhiElement(RadialElement):
    """The regularizer phi_gamma as a radial element (mode 0)."""
    phi: PhiGamma
    m: int = 0

    @property
    def gamma(self):
        return self.phi.gamma

    @property
    def c0(self):
        return self.phi.c0

    def parts(self, x):
        x = np.asarray(x, dtype=float)
        g = self.gamma
        rho = np.sqrt(1.0 - x)
        zero = np.zeros_like(x)
        if g < 0:
            return np.ones_like(x), zero, zero, zero
        if g == 0:
            # phi = log x + a, a = -log(1-x) - c0, d_rho a = -2/rho
            return -np.log1p(-x) - self.c0, -2.0 / rho, np.ones_like(x), zero
        S = s_series(g, x)
        dS_dx = g / (1.0 - x) + g * S / x
        return zero, zero, 1.0 - S, 2.0 * rho * dS_dx

    def boundary_values(self):
        g = self.gamma
        if g < 0:
            return 1.0, 0.0
        if g == 0:
            return -self.c0, 1.0
        return 0.0, 1.0


# ---------------------------------------------------------------------------
# exact operator algebra
# ---------------------------------------------------------------------------

def apply_L_profile(gamma: float, p: RadialProfile) -> RadialProfile:
    """L_{gamma,m} on a profile, using L(rho^a) = (a+gamma+1)^2 rho^a + (m^2-a^2) rho^(a-2)."""
    c = p.coeffs
    am = abs(p.m)
    j = np.arange(len(c))
    a = am + 2 * j
    out = c * (a + gamma + 1.0) ** 2
    # rho^(a-2) contributions land on index j-1; j = 0 has m^2 - |m|^2 = 0 exactly
    out[:-1] = out[:-1] + c[1:] * (am ** 2 - a[1:] ** 2)
    return RadialProfile(p.m, out)


def apply_L(gamma: float, elem: ConormalElement) -> ConormalElement:
    """L_gamma applied exactly to a conormal element.

    Smooth part: monomial rule.  x^-gamma part: L_gamma(x^-gamma h) = x^-gamma L_{-gamma} h.
    log part (gamma = 0): L_0(log x h) = log x L_0 h + 4 (rho d_rho h + h).
    """
    g = as_gamma(gamma).gamma
    if not isinstance(elem, ConormalElement):
        raise MalformedElementError("apply_L works on ConormalElement coefficient data")
    if g != elem.gamma:
        raise ValueError("gamma does not match the element")
    smooth = apply_L_profile(g, elem.smooth)
    if g == 0:
        h = elem.singular
        j = np.arange(len(h.coeffs))
        extra = RadialProfile(elem.m, 4.0 * (abs(elem.m) + 2 * j + 1) * h.coeffs)
        smooth = smooth + extra
        singular = apply_L_profile(0.0, h)
    else:
        singular = apply_L_profile(-g, elem.singular)
    return ConormalElement(g, elem.m, smooth, singular, elem.c0)


def multiply_weight(gamma: float, elem: ConormalElement) -> ConormalElement:
    """x^-gamma * f for a smooth f, viewed as an element of the gamma family."""
    if not elem.singular.is_zero():
        raise ValueError("multiply_weight expects a smooth element")
    return ConormalElement(gamma, elem.m, RadialProfile.zero(elem.m), elem.smooth, elem.c0)


# ---------------------------------------------------------------------------
# quasi-derivative and forms
# ---------------------------------------------------------------------------

def n_phi(phi: PhiGamma, elem, x):
    """N_phi f = phi d_rho(f/phi), evaluated without cancellation near x = 0."""
    x = np.asarray(x, dtype=float)
    g = phi.gamma
    s, ds, h, dh = elem.parts(x)
    rho = np.sqrt(1.0 - x)
    if g < 0:
        w, dw = singular_weight(g, x)
        return ds + w * dh + dw * h
    if g == 0:
        a = -np.log1p(-x) - phi.c0
        phival = np.log(x) + a
        r = s - a * h
        dr = ds - a * dh + 2.0 * h / rho
        return phival * dh + dr + 2.0 * r / (rho * x * phival)
    S = s_series(g, x)
    D = 1.0 - S
    dD = 2.0 * rho * (g / (1.0 - x) + g * S / x)
    xg = x ** (-g)
    # x^-g * dq with q = x^g s + h
    xdq = ds - 2.0 * g * rho * s / x + xg * dh
    return xdq - (s + xg * h) * dD / D


def _sqrt_w(rule: QuadratureRule, gamma: float, p: float = 0.0):
    """sqrt of the weights for int F x^(gamma+p) rho drho on the given rule.

    Bilinear integrals are formed as sum((F sw) conj(G sw)) so that tiny
    weights and large integrand values near x = 0 never under/overflow.
    """
    if rule.weight_kind is WeightKind.POWER_GAMMA:
        return rule.sqrt_weights(gamma + p - rule.gamma)
    if rule.weight_kind is WeightKind.POWER_GAMMA_TIMES_X:
        return rule.sqrt_weights(gamma + p - rule.gamma - 1.0)
    if rule.weight_kind is WeightKind.COMPOSITE:
        return rule.sqrt_weights(gamma + p)
    raise ValueError(f"rule of kind {rule.weight_kind} is not a radial disk rule")


def default_rule(order: int = 24) -> QuadratureRule:
    return radial_rule(0.0, 1.0, order)


def _values(elems, x):
    ev = [e.evaluate(x) for e in elems]
    return np.array([v[0] for v in ev]), np.array([v[1] for v in ev])


def _same_mode(f, g):
    if f.m != g.m:
        raise ModeMismatchError(f"modes differ: {f.m} vs {g.m}")


def inner_product(gamma: float, f, g, rule: Optional[QuadratureRule] = None):
    """<f, g>_{L^2_gamma(D)}; zero across different modes."""
    if f.m != g.m:
        return 0.0
    rule = rule or radial_rule(0.0, 1.0, 24, breaks=element_breaks([f, g]))
    sw = _sqrt_w(rule, gamma)
    return 2 * np.pi * np.sum((sw * f.evaluate(rule.x)[0]) * np.conj(sw * g.evaluate(rule.x)[0]))


def l2_norm(gamma: float, f, rule: Optional[QuadratureRule] = None) -> float:
    return float(np.sqrt(abs(inner_product(gamma, f, f, rule))))


def alpha_form(gamma: float, f, g, rule: Optional[QuadratureRule] = None):
    """alpha_gamma(f, g) = <sqrt(x) f', sqrt(x) g'> + <rho^-1 d_w f, rho^-1 d_w g> + (1+gamma)^2 <f,g>.

    Finite only for smooth inputs or for gamma in (-1, 0).
    """
    for e in (f, g):
        if gamma >= 0 and isinstance(e, ConormalElement) and not e.singular.is_zero():
            raise ValueError("alpha_form is infinite on singular elements for gamma >= 0")
    if f.m != g.m:
        return 0.0
    rule = rule or radial_rule(0.0, 1.0, 24, breaks=element_breaks([f, g]))
    x = rule.x
    rho = rule.nodes
    F, dF = f.evaluate(x)
    G, dG = g.evaluate(x)
    s0 = _sqrt_w(rule, gamma)
    s1 = _sqrt_w(rule, gamma, 1.0)
    c = f.m ** 2 / rho ** 2 + (1 + gamma) ** 2
    val = np.sum((s1 * dF) * np.conj(s1 * dG)) + np.sum(c * (s0 * F) * np.conj(s0 * G))
    return 2 * np.pi * val


@dataclass(frozen=True)
class FormValue:
    value: complex
    b_used: float


def admissible_b(phi: PhiGamma, b: float) -> bool:
    return phi.b_gamma < b < 1.0


def default_b(phi: PhiGamma) -> float:
    """Midpoint of (b_gamma, 1)."""
    return 0.5 * (phi.b_gamma + 1.0)


def element_breaks(elems):
    """Union of the breakpoints (in x) declared by the elements, e.g. bump support edges."""
    out = set()
    for e in elems:
        out.update(getattr(e, "breakpoints", ()))
    return sorted(out)


def _form_rules(b: float, order: int, breaks=()):
    xb = (1.0 - b) * (1.0 + b)
    return (radial_rule(0.0, xb, order, breaks=breaks),
            radial_rule(xb, 1.0, order, breaks=breaks))


def _annulus_tail(phi: PhiGamma, log_x_cut: float, elems_f, elems_g):
    """Analytic contribution of [0, x_cut] to int x^(gamma+1) N_phi f conj(N_phi g) rho drho.

    Leading behaviour of N_phi f at x = 0:
      gamma > 0:  -2 gamma s(0) / x        ->  2 gamma s_f s_g x_cut^gamma
      gamma = 0:  2 r(0) / (x phi)         ->  2 r_f r_g / (c0 - log x_cut),  r = s + c0 h
      gamma < 0:  2 gamma h(0) x^(-gamma-1) -> 2|gamma| h_f h_g x_cut^|gamma|
    """
    g = phi.gamma
    if not np.isfinite(log_x_cut):
        return 0.0
    bf = np.array([e.boundary_values() for e in elems_f], dtype=complex)
    bg = np.array([e.boundary_values() for e in elems_g], dtype=complex)
    if g > 0:
        return 2.0 * g * math.exp(g * log_x_cut) * np.outer(bf[:, 0], np.conj(bg[:, 0]))
    if g == 0:
        rf = bf[:, 0] + phi.c0 * bf[:, 1]
        rg = bg[:, 0] + phi.c0 * bg[:, 1]
        return 2.0 * np.outer(rf, np.conj(rg)) / (phi.c0 - log_x_cut)
    return 2.0 * abs(g) * math.exp(abs(g) * log_x_cut) * np.outer(bf[:, 1], np.conj(bg[:, 1]))


def h1_gram(gamma: float, b: float, elems_f, elems_g=None, order: int = 24,
            c0: float = DEFAULT_C0):
    """Matrix of the regularized form t_{gamma,b}[f_i, g_j] (single common mode)."""
    phi = PhiGamma.build(gamma, c0)
    if not admissible_b(phi, b):
        raise ValueError(f"b={b} outside the admissible interval ({phi.b_gamma}, 1)")
    elems_g = elems_f if elems_g is None else elems_g
    modes = {e.m for e in elems_f} | {e.m for e in elems_g}
    if len(modes) != 1:
        raise ModeMismatchError("h1_gram expects elements on one mode; cross-mode entries are zero")
    m = modes.pop()
    g = gamma
    xb = (1.0 - b) * (1.0 + b)
    outer, inner = _form_rules(b, order, element_breaks(list(elems_f) + list(elems_g)))

    # annulus b < rho < 1 with the quasi-derivative
    sw = outer.sqrt_weights(g + 1)
    Nf = np.array([n_phi(phi, e, outer.x) for e in elems_f]) * sw
    Ng = np.array([n_phi(phi, e, outer.x) for e in elems_g]) * sw
    T = Nf @ np.conj(Ng).T
    T = T + _annulus_tail(phi, outer.log_x_cut, elems_f, elems_g)
    # interior disk rho < b
    sw = inner.sqrt_weights(g + 1)
    _, dF = _values(elems_f, inner.x)
    _, dG = _values(elems_g, inner.x)
    T = T + (dF * sw) @ np.conj(dG * sw).T
    # circle term at rho = b
    if g >= 0:
        pv, dpv = phi_eval(phi, np.array([xb]))
        fb = np.array([e.evaluate(np.array([xb]))[0][0] for e in elems_f])
        gb = np.array([e.evaluate(np.array([xb]))[0][0] for e in elems_g])
        T = T - b * xb ** (g + 1) * (dpv[0] / pv[0]) * np.outer(fb, np.conj(gb))
    # zeroth-order terms on the whole disk
    for r in (outer, inner):
        F, _ = _values(elems_f, r.x)
        G, _ = _values(elems_g, r.x)
        sw = r.sqrt_weights(g) * np.sqrt(m ** 2 / r.nodes ** 2 + (g + 1) ** 2)
        T = T + (F * sw) @ np.conj(G * sw).T
    return 2 * np.pi * T


def h1_form(gamma: float, b: float, f, g, order: int = 24, c0: Optional[float] = None) -> FormValue:
    """The regularized H^1-type form t_{gamma,b}[f, g]; independent of b in (b_gamma, 1)."""
    c0 = f.c0 if c0 is None else c0
    if f.m != g.m:
        phi = PhiGamma.build(gamma, c0)
        if not admissible_b(phi, b):
            raise ValueError(f"b={b} outside the admissible interval ({phi.b_gamma}, 1)")
        return FormValue(0.0, b)
    val = h1_gram(gamma, b, [f], [g], order=order, c0=c0)[0, 0]
    return FormValue(complex(val), b)


def h1_norm(gamma: float, f, order: int = 24) -> float:
    phi = PhiGamma.build(gamma, f.c0)
    return math.sqrt(max(h1_form(gamma, default_b(phi), f, f, order).value.real, 0.0))


# ---------------------------------------------------------------------------
# Wronskian bracket and Green identities
# ---------------------------------------------------------------------------

def wronskian_bracket(gamma: float, f, g, rho: float):
    """W(f, g)(rho) = rho x^(gamma+1) (f g' - g f') on a common mode."""
    _same_mode(f, g)
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0,1)")
    x = np.array([(1.0 - rho) * (1.0 + rho)])
    F, dF = f.evaluate(x)
    G, dG = g.evaluate(x)
    return complex(rho * x[0] ** (gamma + 1) * (F[0] * dG[0] - G[0] * dF[0]))


def wronskian_at_x(gamma: float, f, g, x: float):
    """W(f, g) at a point given by x (no cancellation in x near the boundary)."""
    _same_mode(f, g)
    xa = np.array([x])
    F, dF = f.evaluate(xa)
    G, dG = g.evaluate(xa)
    rho = math.sqrt(1.0 - x)
    return complex(rho * x ** (gamma + 1) * (F[0] * dG[0] - G[0] * dF[0]))


def green_residual_preR(gamma: float, f: ConormalElement, g: ConormalElement, R: float,
                        rule: Optional[QuadratureRule] = None, which: str = "G1") -> float:
    """|LHS - RHS| of the Green identities on the disk D_R.

    G1: int_{D_R} (conj(g) Lf - x f' conj(g)' - rho^-2 d_w f d_w conj(g) - (1+gamma)^2 f conj(g)) x^gamma dV
        = - int_{dD_R} rho x^(gamma+1) conj(g) f' dw
    G2: int_{D_R} (conj(g) Lf - f L conj(g)) x^gamma dV
        = - int_{dD_R} rho x^(gamma+1) (conj(g) f' - f conj(g)') dw
    (the boundary terms carry a minus sign: the outward flux of
    x^(gamma+1) rho f' enters the divergence form of L with a minus).
    """
    if not 0.0 < R < 1.0:
        raise ValueError("R must lie in (0,1)")
    if f.m != g.m:
        return 0.0
    xR = (1.0 - R) * (1.0 + R)
    rule = rule or radial_rule(xR, 1.0, 24)
    if rule.weight_kind is not WeightKind.COMPOSITE or rule.x.min() < xR * (1 - 1e-14):
        raise ValueError("rule must be a composite rule on [x(R), 1]")
    x = rule.x
    rho = rule.nodes
    F, dF = f.evaluate(x)
    G, dG = g.evaluate(x)
    LF = apply_L(gamma, f).evaluate(x)[0]
    w = rule.weights * x ** gamma   # x >= x(R) here: no underflow
    m = f.m
    if which == "G1":
        integrand = np.conj(G) * LF - x * dF * np.conj(dG) - (m ** 2 / rho ** 2 + (1 + gamma) ** 2) * F * np.conj(G)
        lhs = 2 * np.pi * np.sum(w * integrand)
        FR, dFR = f.evaluate(np.array([xR]))
        GR, _ = g.evaluate(np.array([xR]))
        rhs = -2 * np.pi * R * xR ** (gamma + 1) * np.conj(GR[0]) * dFR[0]
    elif which == "G2":
        LG = apply_L(gamma, g).evaluate(x)[0]
        lhs = 2 * np.pi * np.sum(w * (np.conj(G) * LF - F * np.conj(LG)))
        FR, dFR = f.evaluate(np.array([xR]))
        GR, dGR = g.evaluate(np.array([xR]))
        rhs = -2 * np.pi * R * xR ** (gamma + 1) * (np.conj(GR[0]) * dFR[0] - FR[0] * np.conj(dGR[0]))
    else:
        raise ValueError("which must be 'G1' or 'G2'")
    return float(abs(lhs - rhs))


def lagrange_scale(gamma: float, f, rule: Optional[QuadratureRule] = None) -> float:
    """1 + ||f|| + ||L f|| in L^2_gamma: the magnitude used for relative residuals."""
    rule = rule or default_rule()
    s = 1.0 + l2_norm(gamma, f, rule)
    if isinstance(f, ConormalElement):
        s += l2_norm(gamma, apply_L(gamma, f), rule)
    return s
