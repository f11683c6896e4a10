"""Sobolev scales, Dirichlet/Neumann traces and their right inverses.

Spectral coordinates: a :class:`SpectralVector` holds coefficients with
respect to the unit-normalized eigenbasis
    G^_{n,k} = G_{n,k}^gamma / n_{n,k}            (gamma >= 0)
    G^_{n,k} = x^{|gamma|} G_{n,k}^{|gamma|} / n_{n,k}^{|gamma|}   (gamma < 0)
of the Dirichlet realization, with eigenvalues (n + 1 + |gamma|)^2.

Boundary functions are finite Fourier series sum_m f_m e^{i m w}; the
L^2(S^1) pairing is 2 pi sum_m f_m conj(g_m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional

import numpy as np

from .basis import (
    PhiGamma, RadialProfile, WeightKind, ZernikeIndex, as_gamma, quad_rule,
    radial_rule, s_series, zernike_mode_table, zernike_norm_sq, zernike_values,
)
from .operator import (
    DEFAULT_C0, ConormalElement, RadialElement, h1_form, default_b, element_breaks,
)


# ---------------------------------------------------------------------------
# boundary functions
# ---------------------------------------------------------------------------

def bracket(k) -> np.ndarray:
    """<k> = sqrt(1 + k^2)."""
    return np.sqrt(1.0 + np.asarray(k, dtype=float) ** 2)


@dataclass(frozen=True)
class BoundaryFunction:
    """Finite Fourier series on the circle: {m: f_m}."""
    coeffs: Mapping[int, complex] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", {int(m): complex(v) for m, v in dict(self.coeffs).items()})

    @classmethod
    def mode(cls, m: int, value: complex = 1.0) -> "BoundaryFunction":
        return cls({m: value})

    @property
    def modes(self) -> List[int]:
        return sorted(self.coeffs)

    def get(self, m: int) -> complex:
        return self.coeffs.get(int(m), 0.0)

    def array(self, modes: Iterable[int]) -> np.ndarray:
        return np.array([self.get(m) for m in modes], dtype=complex)

    def __add__(self, other: "BoundaryFunction") -> "BoundaryFunction":
        out = dict(self.coeffs)
        for m, v in other.coeffs.items():
            out[m] = out.get(m, 0.0) + v
        return BoundaryFunction(out)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, a) -> "BoundaryFunction":
        return BoundaryFunction({m: a * v for m, v in self.coeffs.items()})

    def is_real_valued(self, tol: float = 1e-14) -> bool:
        return all(abs(self.get(-m) - np.conj(v)) <= tol * (1 + abs(v)) for m, v in self.coeffs.items())

    def max_abs_diff(self, other: "BoundaryFunction") -> float:
        ms = set(self.coeffs) | set(other.coeffs)
        return max([abs(self.get(m) - other.get(m)) for m in ms] + [0.0])


def l2_pairing(f: BoundaryFunction, g: BoundaryFunction) -> complex:
    """<f, g>_{L^2(S^1)} = 2 pi sum f_m conj(g_m)."""
    return 2 * np.pi * sum(v * np.conj(g.get(m)) for m, v in f.coeffs.items())


def hgamma_weight(gamma: float, m) -> np.ndarray:
    """Squared weight of the boundary space H_(gamma): <m>^{2|gamma|}, or 1 + log<m> at gamma = 0."""
    if gamma == 0:
        return 1.0 + np.log(bracket(m))
    return bracket(m) ** (2 * abs(gamma))


def boundary_norm(f: BoundaryFunction, gamma: float = 0.0, kind="Hgamma", s: float = 0.0) -> float:
    """Norms on the circle.

    kind = "Hgamma":  (sum w_gamma(m) |f_m|^2)^(1/2)
    kind = "Hgamma'": the dual norm, weights inverted
    kind = "Hs":      (sum <m>^{2s} |f_m|^2)^(1/2)
    """
    ms = np.array(f.modes, dtype=float)
    a = np.abs(f.array(f.modes)) ** 2
    if kind in ("Hgamma", "Hgamma'"):
        as_gamma(gamma).require_traces()
        w = hgamma_weight(gamma, ms)
        if kind == "Hgamma'":
            w = 1.0 / w
    elif kind == "Hs":
        w = bracket(ms) ** (2 * s)
    else:
        raise ValueError(f"unknown boundary norm {kind!r}")
    return float(np.sqrt(np.sum(w * a)))


# ---------------------------------------------------------------------------
# spectral vectors
# ---------------------------------------------------------------------------

def spectral_norm(gamma: float, idx: ZernikeIndex) -> float:
    """n_{n,k} of the basis actually used for gamma (|gamma| for gamma < 0)."""
    return math.sqrt(zernike_norm_sq(abs(gamma), idx))


def neumann_constant(gamma: float) -> float:
    """c_gamma: tau^N of the unit-boundary-value eigenfunction is c_gamma e^{imw}."""
    return -2.0 if gamma == 0 else 2.0 * abs(gamma)


@dataclass(frozen=True)
class SpectralVector:
    gamma: float
    entries: Mapping[ZernikeIndex, complex] = field(default_factory=dict)
    truncation: int = 0

    def __post_init__(self):
        ent = {}
        N = int(self.truncation)
        for idx, v in dict(self.entries).items():
            if not isinstance(idx, ZernikeIndex):
                idx = ZernikeIndex(*idx)
            ent[idx] = complex(v)
            N = max(N, idx.n)
        object.__setattr__(self, "entries", ent)
        object.__setattr__(self, "truncation", N)
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def unit(cls, gamma: float, idx: ZernikeIndex, value: complex = 1.0) -> "SpectralVector":
        return cls(gamma, {idx: value}, idx.n)

    @classmethod
    def random(cls, gamma: float, N: int, rng: np.random.Generator, modes=None, decay: float = 0.0):
        ent = {}
        for n in range(N + 1):
            for k in range(n + 1):
                idx = ZernikeIndex(n, k)
                if modes is not None and idx.m not in modes:
                    continue
                ent[idx] = complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) * (n + 1.0) ** (-decay)
        return cls(gamma, ent, N)

    @property
    def modes(self) -> List[int]:
        return sorted({idx.m for idx in self.entries})

    def mode_coeffs(self, m: int, N: Optional[int] = None):
        """Coefficients on mode m as an array over k' = 0..(N-|m|)//2."""
        N = self.truncation if N is None else N
        idxs = zernike_mode_table(self.gamma, m, N)
        return idxs, np.array([self.entries.get(i, 0.0) for i in idxs], dtype=complex)

    def scale(self, a) -> "SpectralVector":
        return SpectralVector(self.gamma, {i: a * v for i, v in self.entries.items()}, self.truncation)

    def __add__(self, other: "SpectralVector") -> "SpectralVector":
        out = dict(self.entries)
        for i, v in other.entries.items():
            out[i] = out.get(i, 0.0) + v
        return SpectralVector(self.gamma, out, max(self.truncation, other.truncation))

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def eigenvalues(self) -> Dict[ZernikeIndex, float]:
        return {i: (i.n + 1 + abs(self.gamma)) ** 2 for i in self.entries}

    def apply_L(self) -> "SpectralVector":
        """L_{gamma,D} acts diagonally."""
        ev = self.eigenvalues()
        return SpectralVector(self.gamma, {i: v * ev[i] for i, v in self.entries.items()}, self.truncation)

    def element(self, m: int) -> "SpectralElement":
        return SpectralElement(self, m)

    def max_abs_diff(self, other: "SpectralVector") -> float:
        keys = set(self.entries) | set(other.entries)
        return max([abs(self.entries.get(i, 0) - other.entries.get(i, 0)) for i in keys] + [0.0])

    def l2_norm_quadrature(self, npts: Optional[int] = None) -> float:
        """L^2_gamma norm by Gauss-Jacobi quadrature of the represented function."""
        g = abs(self.gamma)
        npts = npts or self.truncation + 8
        rule = quad_rule(npts, WeightKind.POWER_GAMMA, g)
        tot = 0.0
        for m in self.modes:
            v = self._radial_sum(m, rule.x)[0]
            # for gamma < 0: |x^{|g|} G|^2 x^gamma = |G|^2 x^{|g|}
            tot += rule.disk_integral(np.abs(v) ** 2)
        return float(np.sqrt(tot))

    def _radial_sum(self, m: int, x):
        """sum_k u_k g_k / n_k on mode m and its rho-derivative (no x^{|gamma|} factor)."""
        idxs, c = self.mode_coeffs(m)
        if not idxs:
            z = np.zeros_like(np.asarray(x, dtype=float))
            return z.astype(complex), z.astype(complex)
        norms = np.array([spectral_norm(self.gamma, i) for i in idxs])
        vals, dvals = zernike_values(abs(self.gamma), m, len(idxs) - 1, x)
        w = c / norms
        return w @ vals, w @ dvals


@dataclass(frozen=True)
class SpectralElement(RadialElement):
    """Mode-m part of a spectral vector, seen as an element f = s + w h."""
    vec: SpectralVector
    m: int

    @property
    def gamma(self):
        return self.vec.gamma

    @property
    def c0(self):
        return DEFAULT_C0

    def parts(self, x):
        x = np.asarray(x, dtype=float)
        v, dv = self.vec._radial_sum(self.m, x)
        z = np.zeros_like(v)
        if self.gamma < 0:
            return z, z, v, dv
        return v, dv, z, z

    def boundary_values(self):
        idxs, c = self.vec.mode_coeffs(self.m)
        tot = sum(ci / spectral_norm(self.gamma, i) for i, ci in zip(idxs, c)) if idxs else 0.0
        return (0.0, tot) if self.gamma < 0 else (tot, 0.0)

    def apply_L(self) -> "SpectralElement":
        return SpectralElement(self.vec.apply_L(), self.m)


def sobolev_D_norm(u: SpectralVector, s: float) -> float:
    """(sum (n+1+|gamma|)^{2s} |u_{n,k}|^2)^(1/2)."""
    g = abs(u.gamma)
    return float(np.sqrt(sum((i.n + 1 + g) ** (2 * s) * abs(v) ** 2 for i, v in u.entries.items())))


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

def _trace_pair(elem, c0: Optional[float] = None):
    g = elem.gamma
    as_gamma(g).require_traces()
    c0 = elem.c0 if c0 is None else c0
    s0, h0 = elem.boundary_values()
    if g < 0:
        return s0, -2.0 * g * h0
    if g == 0:
        return h0, -2.0 * s0 - 2.0 * c0 * h0
    return h0, 2.0 * g * s0


def _as_list(elems):
    if isinstance(elems, (list, tuple)):
        return list(elems)
    return [elems]


def trace_dirichlet(elems) -> BoundaryFunction:
    """tau^D: coefficient of the most singular boundary term."""
    out = BoundaryFunction()
    for e in _as_list(elems):
        out = out + BoundaryFunction({e.m: _trace_pair(e)[0]})
    return out


def trace_neumann(elems) -> BoundaryFunction:
    """tau^N: coefficient of the second most singular boundary term."""
    out = BoundaryFunction()
    for e in _as_list(elems):
        out = out + BoundaryFunction({e.m: _trace_pair(e)[1]})
    return out


def trace_neumann_spectral(u: SpectralVector) -> BoundaryFunction:
    """Mode m coefficient: c_gamma * sum_{n-2k=m} u_{n,k} / n_{n,k}."""
    as_gamma(u.gamma).require_traces()
    c = neumann_constant(u.gamma)
    out: Dict[int, complex] = {}
    for idx, v in u.entries.items():
        out[idx.m] = out.get(idx.m, 0.0) + c * v / spectral_norm(u.gamma, idx)
    return BoundaryFunction(out)


# ---------------------------------------------------------------------------
# right inverses
# ---------------------------------------------------------------------------

BUMP_A = 0.5


@dataclass(frozen=True)
class Bump:
    """g(t) = exp(1 - 1/(1 - (t/a)^2)) on [0, a), zero beyond; g(0) = 1."""
    a: float = BUMP_A

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        u = t / self.a
        val = np.zeros_like(t)
        inside = np.abs(u) < 1
        q = 1.0 - u[inside] ** 2
        val[inside] = np.exp(1.0 - 1.0 / q)
        return val

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        u = t / self.a
        out = np.zeros_like(t)
        inside = np.abs(u) < 1
        q = 1.0 - u[inside] ** 2
        out[inside] = np.exp(1.0 - 1.0 / q) * (-2.0 * u[inside] / self.a) / q ** 2
        return out


def lift_frequency(gamma: float, n: int, a: float = BUMP_A, c0: float = DEFAULT_C0) -> int:
    """Scaling frequency nu used for mode n; large enough that the support sits inside x < x_gamma/2."""
    if gamma < 0:
        return abs(n)
    nu = max(abs(n), 2) if gamma == 0 else max(abs(n), 1)
    xg = PhiGamma.build(gamma, c0).x_gamma
    while a / nu ** 2 >= 0.5 * xg:
        nu += 1
    return nu


@dataclass(frozen=True)
class BumpLift(RadialElement):
    """Dirichlet lift of amp * e^{imw}:

    gamma < 0:  amp * g(nu^2 x)
    gamma = 0:  amp * phi_0 * g(nu^2 x) (1 + 2 log nu / log x)
    gamma > 0:  amp * phi_gamma * g(nu^2 x)
    """
    gamma: float
    m: int
    amp: complex = 1.0
    nu: int = 1
    bump: Bump = field(default_factory=Bump)
    c0: float = DEFAULT_C0

    @property
    def breakpoints(self):
        if self.gamma < 0 and self.nu == 0:
            return ()
        return (self.bump.a / self.nu ** 2,)

    def parts(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.sqrt(1.0 - x)
        g, nu, A = self.gamma, self.nu, self.amp
        zero = np.zeros(x.shape, dtype=complex)
        if g < 0 and nu == 0:
            return A * np.ones_like(zero), zero, zero, zero
        b = self.bump(nu ** 2 * x)
        db = self.bump.derivative(nu ** 2 * x) * nu ** 2 * (-2.0 * rho)
        if g < 0:
            return A * b + zero, A * db + zero, zero, zero
        if g > 0:
            S = s_series(g, x)
            D = 1.0 - S
            dD = 2.0 * rho * (g / (1.0 - x) + g * S / x)
            return zero, zero, A * D * b, A * (dD * b + D * db)
        # gamma = 0: f = log x * b + 2L b + a q,  q = b (1 + 2L/log x), a = -log(1-x) - c0
        L = math.log(nu)
        lx = np.log(x)
        a = -np.log1p(-x) - self.c0
        q = b * (1.0 + 2.0 * L / lx)
        dq = db * (1.0 + 2.0 * L / lx) + b * 2.0 * L * 2.0 * rho / (x * lx ** 2)
        s = 2.0 * L * b + a * q
        ds = 2.0 * L * db + (-2.0 / rho) * q + a * dq
        return A * s, A * ds, A * b + zero, A * db + zero

    def boundary_values(self):
        g, A = self.gamma, self.amp
        if g < 0:
            return A, 0.0
        if g == 0:
            return A * (2.0 * math.log(self.nu) - self.c0), A
        return 0.0, A


def right_inverse_dirichlet(gamma: float, f: BoundaryFunction, bump: Optional[Bump] = None,
                            c0: float = DEFAULT_C0) -> List[RadialElement]:
    """R_D f: one lift per nonzero mode with tau^D(R_D f) = f."""
    as_gamma(gamma).require_traces()
    bump = bump or Bump()
    out = []
    for m in f.modes:
        amp = f.get(m)
        if amp == 0:
            continue
        if gamma < 0 and m == 0:
            out.append(ConormalElement.from_coeffs(gamma, 0, [amp], [0.0], c0))
            continue
        out.append(BumpLift(gamma, m, amp, lift_frequency(gamma, m, bump.a, c0), bump, c0))
    return out


def right_inverse_neumann(gamma: float, f: BoundaryFunction) -> SpectralVector:
    """R_N f = sum_m f_m / (c_gamma (1+|m|)) sum_{l=0}^{|m|} G_{|m|+2l, .}, stored unit-normalized."""
    as_gamma(gamma).require_traces()
    c = neumann_constant(gamma)
    ent = {}
    N = 0
    for m in f.modes:
        am = abs(m)
        for ell in range(am + 1):
            idx = ZernikeIndex.from_mode(m, ell)
            ent[idx] = ent.get(idx, 0.0) + f.get(m) * spectral_norm(gamma, idx) / (c * (1 + am))
            N = max(N, idx.n)
    return SpectralVector(gamma, ent, N)


def minimal_domain_vector(gamma: float, N: int, rng: np.random.Generator, modes=None) -> SpectralVector:
    """Random smooth spectral vector with tau^N = 0 on every mode.

    On each mode the coefficient of lowest degree is chosen so that
    sum_k u_k / n_k = 0, the recipe that makes the Neumann trace vanish.
    """
    u = SpectralVector.random(gamma, N, rng, modes=modes, decay=2.0)
    ent = dict(u.entries)
    for m in u.modes:
        idxs, c = u.mode_coeffs(m)
        if len(idxs) < 2:
            for i in idxs:
                ent.pop(i, None)
            continue
        norms = np.array([spectral_norm(gamma, i) for i in idxs])
        ent[idxs[0]] = -norms[0] * np.sum(c[1:] / norms[1:])
    return SpectralVector(gamma, ent, N)


# ---------------------------------------------------------------------------
# boundedness statistics
# ---------------------------------------------------------------------------

def lift_norm_ratio(gamma: float, n: int, c0: float = DEFAULT_C0, order: int = 24) -> float:
    """||R_D e_n||^2 in the regularized H^1 form divided by ||e_n||^2_{H_(gamma)}."""
    e = right_inverse_dirichlet(gamma, BoundaryFunction.mode(n), c0=c0)[0]
    phi = PhiGamma.build(gamma, c0)
    t = h1_form(gamma, default_b(phi), e, e, order=order).value.real
    return t / float(hgamma_weight(gamma, n))


def r0_lift_quantity(n: int, a: float = BUMP_A, order: int = 24) -> float:
    """(1/log n)(||sqrt(x) log x f_n'||^2 + n^2 ||log x f_n||^2) on [0, a],
    with f_n = h(n^2 x)(1 + 2 log n / log x)."""
    if abs(n) < 2:
        raise ValueError("needs |n| >= 2")
    n = abs(n)
    bump = Bump(a)
    L = math.log(n)
    rule = radial_rule(0.0, a / n ** 2, order)
    x = rule.x
    wdx = 2.0 * rule.weights   # rho drho -> dx
    lx = np.log(x)
    hb = bump(n ** 2 * x)
    dhb = bump.derivative(n ** 2 * x) * n ** 2
    f = hb * (1.0 + 2.0 * L / lx)
    df = dhb * (1.0 + 2.0 * L / lx) - hb * 2.0 * L / (x * lx ** 2)
    s1 = np.sum((np.sqrt(wdx * x) * lx * df) ** 2)
    # uncovered [0, x_cut]: x log^2 x f'^2 ~ 4 L^2 / (x log^2 x)
    s1 += 4.0 * L ** 2 / (-rule.log_x_cut)
    s2 = n ** 2 * np.sum(wdx * (lx * f) ** 2)
    return float((s1 + s2) / L)


def dirichlet_trace_constant(gamma: float, elems, c0: float = DEFAULT_C0, order: int = 24) -> float:
    """max ||tau^D f||_{H_(gamma)} / ||f||_{H1 form} over the given single-mode elements."""
    phi = PhiGamma.build(gamma, c0)
    best = 0.0
    for e in elems:
        t = h1_form(gamma, default_b(phi), e, e, order=order).value.real
        tr = boundary_norm(trace_dirichlet(e), gamma)
        best = max(best, tr / math.sqrt(t))
    return best
