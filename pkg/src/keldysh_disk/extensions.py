"""Dirichlet resolvent, DN map, Weyl function and Krein-type resolvents.

Everything is diagonal in the angular mode m, because L_gamma commutes with
d/domega.  Kernel solutions of (L_{gamma,m} - lambda) u = 0 are built from
two convergent series matched at x_match = min(1/2, 2/(|m|+1)):

* the regular series  rho^|m| sum_j b_j rho^{2j}           (used for x >= x_match)
* Frobenius series    rho^|m| x^e sum_j a_j x^j, e in {0, -gamma}
  (with the logarithmic partner when gamma = 0)            (used for x <  x_match)

The x-form of the operator, L_m(rho^|m| x^s) = rho^|m| [(2s+|m|+gamma+1)^2 x^s
- 4 s (s+gamma) x^(s-1)], gives the Frobenius recurrence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .basis import (
    PhiGamma, RadialProfile, ZernikeIndex, as_gamma, radial_rule, zernike_mode_table,
    zernike_values,
)
from .operator import (
    DEFAULT_C0, ConormalElement, RadialElement, apply_L, element_breaks, inner_product,
)
from .spaces import (
    BoundaryFunction, SpectralElement, SpectralVector, hgamma_weight, neumann_constant,
    right_inverse_neumann, spectral_norm, trace_dirichlet, trace_neumann,
    trace_neumann_spectral,
)

COLLISION_TOL = 1e-9
MATCH_X = 0.5


def match_point(m: int) -> float:
    """Matching abscissa: x = 1/2, moved toward the boundary for large |m| where the
    Frobenius solutions grow like (1 - x)^(-|m|) and the 2x2 match loses conditioning."""
    return min(MATCH_X, 2.0 / (abs(m) + 1))
_SERIES_TOL = 1e-18
_SERIES_MAX = 4000


class SpectralCollisionError(ArithmeticError):
    """lambda is (numerically) a Dirichlet eigenvalue."""


class KreinCollisionError(ArithmeticError):
    """1 - B M(lambda) is (numerically) singular: lambda is a candidate eigenvalue of A_[B]."""

    def __init__(self, msg, mode=None, lam=None):
        super().__init__(msg)
        self.mode = mode
        self.lam = lam


def dirichlet_eigenvalue(gamma: float, n: int) -> float:
    return (n + 1 + abs(gamma)) ** 2


def check_resolvent_set(gamma: float, lam: complex, N: int, m: Optional[int] = None):
    """Raise if lam is within COLLISION_TOL of a Dirichlet eigenvalue with n <= N (on mode m)."""
    ns = range(N + 1) if m is None else range(abs(m), N + 1, 2)
    for n in ns:
        if abs(dirichlet_eigenvalue(gamma, n) - lam) < COLLISION_TOL:
            raise SpectralCollisionError(
                f"lambda={lam} collides with the Dirichlet eigenvalue (n={n})")


# ---------------------------------------------------------------------------
# Dirichlet resolvent
# ---------------------------------------------------------------------------

def dirichlet_resolvent(gamma: float, lam: complex, u: SpectralVector) -> SpectralVector:
    """(L_{gamma,D} - lambda)^{-1} u, entrywise."""
    check_resolvent_set(gamma, lam, u.truncation)
    out = {i: v / (dirichlet_eigenvalue(gamma, i.n) - lam) for i, v in u.entries.items()}
    return SpectralVector(u.gamma, out, u.truncation)


# ---------------------------------------------------------------------------
# series solutions
# ---------------------------------------------------------------------------

def regular_series(gamma: float, lam: complex, m: int, zmax: float = 1.0 - MATCH_X) -> np.ndarray:
    """b_j with u = rho^|m| sum b_j z^j (z = rho^2), b_0 = 1."""
    am = abs(m)
    b = [1.0 + 0j]
    big = 1.0
    j = 0
    while j < _SERIES_MAX:
        nb = b[-1] * ((am + 2 * j + gamma + 1) ** 2 - lam) / (4.0 * (j + 1) * (j + 1 + am))
        b.append(nb)
        j += 1
        t = abs(nb) * zmax ** j
        big = max(big, t)
        if j > 8 and t < _SERIES_TOL * big and abs(b[-2]) * zmax ** (j - 1) < _SERIES_TOL * big:
            break
    else:
        raise RuntimeError("regular series did not converge")
    return np.array(b)


def frobenius_series(gamma: float, lam: complex, m: int, e: float, K: Optional[int] = None,
                     xmax: float = MATCH_X, with_derivative: bool = False):
    """a_j (and d a_j / d e) of rho^|m| x^e sum a_j x^j, a_0 = 1.

    a_{j+1} = a_j ((2(e+j) + c)^2 - lambda) / (4 (e+j+1)(e+j+1+gamma)),  c = |m| + gamma + 1.
    If K is None the series is continued until its terms at xmax are negligible.
    """
    c = abs(m) + gamma + 1.0
    a = [1.0 + 0j]
    da = [0.0 + 0j]
    big = bigd = 1.0
    j = 0
    while True:
        if K is not None and j >= K:
            break
        if K is None and j > 8:
            ta, td = abs(a[-1]) * xmax ** j, abs(da[-1]) * xmax ** j
            tp = max(abs(a[-2]), abs(da[-2])) * xmax ** (j - 1)
            if ta < _SERIES_TOL * big and td < _SERIES_TOL * bigd and tp < _SERIES_TOL * max(big, bigd):
                break
        if j >= _SERIES_MAX:
            raise RuntimeError("Frobenius series did not converge")
        s = e + j
        P = (2 * s + c) ** 2 - lam
        Q = 4.0 * (s + 1) * (s + 1 + gamma)
        dP = 4.0 * (2 * s + c)
        dQ = 4.0 * (2 * s + 2 + gamma)
        a.append(a[-1] * P / Q)
        da.append(da[-1] * P / Q + a[-2] * (dP / Q - P * dQ / Q ** 2))
        j += 1
        big = max(big, abs(a[-1]) * xmax ** j)
        bigd = max(bigd, abs(da[-1]) * xmax ** j)
    a = np.array(a)
    if with_derivative:
        return a, np.array(da)
    return a


def _poly_and_dx(coeffs, t):
    """sum c_j t^j and its t-derivative."""
    val = np.polynomial.polynomial.polyval(t, coeffs)
    d = np.polynomial.polynomial.polyval(t, coeffs[1:] * np.arange(1, len(coeffs))) if len(coeffs) > 1 else 0 * t
    return val, d


@dataclass(frozen=True)
class _KernelData:
    gamma: float
    lam: complex
    m: int
    c0: float
    xm: float              # matching abscissa
    b: np.ndarray          # regular series in z
    a0: np.ndarray         # Frobenius, exponent 0
    a1: np.ndarray         # Frobenius, exponent -gamma (gamma != 0) / log partner d a / d e (gamma = 0)
    A: complex             # regular solution = A * (Dirichlet-type) + B * (other) near x = 0
    B: complex


def _kernel_data(gamma: float, lam: complex, m: int, c0: float = DEFAULT_C0) -> _KernelData:
    xm = match_point(m)
    b = regular_series(gamma, lam, m, 1.0 - xm)
    R, dR = _poly_and_dx(b, 1.0 - xm)      # in z; d/dx = -d/dz
    target = np.array([R, -dR])
    if gamma == 0:
        a, da = frobenius_series(0.0, lam, m, 0.0, xmax=xm, with_derivative=True)
        H, dH = _poly_and_dx(a, xm)
        Q, dQ = _poly_and_dx(da, xm)
        ylog = np.array([math.log(xm) * H + Q, H / xm + math.log(xm) * dH + dQ])
        y0 = np.array([H, dH])
        # u = A ylog + B y0: tau^D = A, s(0) = B
        M = np.column_stack([ylog, y0])
        A, B = np.linalg.solve(M, target)
        return _KernelData(gamma, lam, m, c0, xm, b, a, da, A, B)
    a0 = frobenius_series(gamma, lam, m, 0.0, xmax=xm)
    a1 = frobenius_series(gamma, lam, m, -gamma, xmax=xm)
    F0, dF0 = _poly_and_dx(a0, xm)
    F1, dF1 = _poly_and_dx(a1, xm)
    y0 = np.array([F0, dF0])
    y1 = np.array([xm ** (-gamma) * F1, xm ** (-gamma) * (dF1 - gamma * F1 / xm)])
    if gamma > 0:
        # u = A x^-g F1 + B F0: tau^D = A, tau^N = 2 gamma B
        A, B = np.linalg.solve(np.column_stack([y1, y0]), target)
    else:
        # u = A F0 + B x^|g| F1: tau^D = A, tau^N = -2 gamma B
        A, B = np.linalg.solve(np.column_stack([y0, y1]), target)
    return _KernelData(gamma, lam, m, c0, xm, b, a0, a1, A, B)


def _dn_from_data(d: _KernelData) -> complex:
    g = d.gamma
    if abs(d.A) < COLLISION_TOL * (abs(d.A) + abs(d.B)):
        raise SpectralCollisionError(f"lambda={d.lam} is a Dirichlet eigenvalue on mode {d.m}")
    if g > 0:
        return 2 * g * d.B / d.A
    if g < 0:
        return -2 * g * d.B / d.A
    return -2 * d.B / d.A - 2 * d.c0


def dn_map_mode_ode(gamma: float, lam: complex, m: int, c0: float = DEFAULT_C0) -> complex:
    """mu_m(lambda) from the series solution regular at the origin."""
    as_gamma(gamma).require_traces()
    check_resolvent_set(gamma, lam, abs(m) + 2 * int(abs(lam) ** 0.5 + 4), m)
    return complex(_dn_from_data(_kernel_data(gamma, lam, m, c0)))


@dataclass(frozen=True)
class KernelElement(RadialElement):
    """amp * (solution of (L - lambda) u = 0 on mode m, regular at 0, with tau^D u = 1)."""
    gamma: float
    lam: complex
    m: int
    amp: complex = 1.0
    c0: float = DEFAULT_C0
    data: Optional[_KernelData] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.data is None:
            check_resolvent_set(self.gamma, self.lam, abs(self.m) + 2 * int(abs(self.lam) ** 0.5 + 4), self.m)
            object.__setattr__(self, "data", _kernel_data(self.gamma, self.lam, self.m, self.c0))

    @property
    def mu(self) -> complex:
        return _dn_from_data(self.data)

    def scaled(self, amp) -> "KernelElement":
        return KernelElement(self.gamma, self.lam, self.m, amp, self.c0, self.data)

    def parts(self, x):
        x = np.asarray(x, dtype=float)
        d = self.data
        g = self.gamma
        am = abs(self.m)
        rho = np.sqrt(1.0 - x)
        pm = rho ** am
        dpm = am * rho ** (am - 1) if am > 0 else np.zeros_like(rho)
        s = np.zeros(x.shape, dtype=complex)
        ds, h, dh = s.copy(), s.copy(), s.copy()
        scale = self.amp / d.A
        hi = x >= d.xm
        if np.any(hi):
            R, dR = _poly_and_dx(d.b, 1.0 - x[hi])
            # d/drho of R(rho^2) = 2 rho R'
            s[hi] = scale * pm[hi] * R
            ds[hi] = scale * (dpm[hi] * R + pm[hi] * 2.0 * rho[hi] * dR)
        lo = ~hi
        if np.any(lo):
            xl = x[lo]
            dxdrho = -2.0 * rho[lo]

            def lift(F, dF):
                return pm[lo] * F, dpm[lo] * F + pm[lo] * dF * dxdrho

            F0, dF0 = _poly_and_dx(d.a0, xl)
            F1, dF1 = _poly_and_dx(d.a1, xl)
            if g == 0:
                # u/A = log x * H + Q + (B/A) H  with H = a0-series, Q = d a / d e series
                sv, sd = lift(F1 + (d.B / d.A) * F0, dF1 + (d.B / d.A) * dF0)
                hv, hd = lift(F0, dF0)
                s[lo], ds[lo], h[lo], dh[lo] = self.amp * sv, self.amp * sd, self.amp * hv, self.amp * hd
            elif g > 0:
                sv, sd = lift(F0, dF0)
                hv, hd = lift(F1, dF1)
                r = d.B / d.A
                s[lo], ds[lo], h[lo], dh[lo] = self.amp * r * sv, self.amp * r * sd, self.amp * hv, self.amp * hd
            else:
                sv, sd = lift(F0, dF0)
                hv, hd = lift(F1, dF1)
                r = d.B / d.A
                s[lo], ds[lo], h[lo], dh[lo] = self.amp * sv, self.amp * sd, self.amp * r * hv, self.amp * r * hd
        return s, ds, h, dh

    def boundary_values(self):
        d = self.data
        r = d.B / d.A
        if self.gamma == 0:
            return self.amp * r, self.amp       # s(0) = B/A (d a_0/de = 0)
        if self.gamma > 0:
            return self.amp * r, self.amp
        return self.amp, self.amp * r

    def residual(self, x):
        """(L - lambda) applied to the truncated series, from the x-form/monomial identities.

        Only the first omitted term survives; the values certify the truncation.
        """
        x = np.asarray(x, dtype=float)
        d = self.data
        g = self.gamma
        am = abs(self.m)
        c = am + g + 1.0
        rho = np.sqrt(1.0 - x)
        out = np.zeros(x.shape, dtype=complex)
        hi = x >= d.xm
        J = len(d.b) - 1
        out[hi] = -(self.amp / d.A) * d.b[J] * ((am + 2 * J + g + 1) ** 2 - self.lam) * rho[hi] ** (am + 2 * J)
        lo = ~hi
        xl = x[lo]

        def tail(a, e):
            K = len(a) - 1
            return a[K] * ((2 * (e + K) + c) ** 2 - self.lam) * xl ** (e + K)

        if g == 0:
            K = len(d.a0) - 1
            P = (2 * K + c) ** 2 - self.lam
            log_part = d.a0[K] * P * xl ** K
            other = (d.a1[K] * P + d.a0[K] * 4.0 * (2 * K + c)) * xl ** K
            val = np.log(xl) * log_part + other + (d.B / d.A) * log_part
            out[lo] = self.amp * rho[lo] ** am * val
        else:
            e_d, e_o = (-g, 0.0) if g > 0 else (0.0, -g)
            a_d, a_o = (d.a1, d.a0) if g > 0 else (d.a0, d.a1)
            out[lo] = self.amp * rho[lo] ** am * (tail(a_d, e_d) + (d.B / d.A) * tail(a_o, e_o))
        return out


# ---------------------------------------------------------------------------
# spectral DN map
# ---------------------------------------------------------------------------

LIFT_ORDER = 10


def frobenius_lift(gamma: float, lam: complex, m: int, K: int = LIFT_ORDER,
                   c0: float = DEFAULT_C0) -> ConormalElement:
    """Boundary-fitted Dirichlet lift of e^{imw}: the order-K truncation of the Frobenius
    solution with tau^D = 1 and tau^N = 0 (gamma != 0) or -2 c0 (gamma = 0)."""
    e = -gamma if gamma > 0 else 0.0
    if gamma == 0:
        a, da = frobenius_series(0.0, lam, m, 0.0, K=K, with_derivative=True)
    else:
        a = frobenius_series(gamma, lam, m, e, K=K)
        da = None
    # x^j = (1 - rho^2)^j as polynomials in rho^2
    def to_rho2(coeffs):
        P = np.polynomial.polynomial.Polynomial([0.0])
        one_minus = np.polynomial.polynomial.Polynomial([1.0, -1.0])
        for cj in coeffs[::-1]:
            P = P * one_minus + cj
        return P.coef.astype(complex)

    H = to_rho2(a)
    if gamma == 0:
        return ConormalElement(gamma, m, RadialProfile(m, to_rho2(da)), RadialProfile(m, H), c0)
    if gamma > 0:
        return ConormalElement(gamma, m, RadialProfile(m, [0.0]), RadialProfile(m, H), c0)
    return ConormalElement(gamma, m, RadialProfile(m, H), RadialProfile(m, [0.0]), c0)


def _lift_residual(gamma, lam, m, K, x):
    """(L - lambda) of the order-K Frobenius lift, in closed form: a single x^(e+K) term."""
    am = abs(m)
    c = am + gamma + 1.0
    rho = np.sqrt(1.0 - x)
    if gamma == 0:
        a, da = frobenius_series(0.0, lam, m, 0.0, K=K, with_derivative=True)
        P = (2 * K + c) ** 2 - lam
        return rho ** am * x ** K * ((da[K] * P + a[K] * 4.0 * (2 * K + c)) + a[K] * P * np.log(x))
    e = -gamma if gamma > 0 else 0.0
    a = frobenius_series(gamma, lam, m, e, K=K)
    return rho ** am * a[K] * ((2 * (e + K) + c) ** 2 - lam) * x ** (e + K)


def _mode_basis(gamma: float, m: int, N: int, x):
    """Unit-normalized basis functions on mode m (values only), rows k' = 0.."""
    idxs = zernike_mode_table(gamma, m, N)
    vals, _ = zernike_values(abs(gamma), m, len(idxs) - 1, x)
    norms = np.array([spectral_norm(gamma, i) for i in idxs])
    vals = vals / norms[:, None]
    if gamma < 0:
        vals = vals * x ** (-gamma)
    return idxs, vals, norms


def _projection_rule():
    return radial_rule(0.0, 1.0, 48, panels=16)


def dn_spectral_correction(gamma: float, lam: complex, m: int, N: int, K: int = LIFT_ORDER):
    """Spectral coefficients w with (L - lambda)(lift + sum w G^) = 0 up to truncation."""
    rule = _projection_rule()
    x = rule.x
    idxs, vals, norms = _mode_basis(gamma, m, N, x)
    r = _lift_residual(gamma, lam, m, K, x)
    sw = rule.sqrt_weights(gamma)
    proj = 2 * np.pi * ((vals * sw) @ (r * sw))
    ev = np.array([dirichlet_eigenvalue(gamma, i.n) for i in idxs])
    return idxs, -proj / (ev - lam), norms


@dataclass(frozen=True)
class DNResult:
    mu: complex
    truncation_estimate: float
    N: int


def dn_map_mode(gamma: float, lam: complex, m: int, N: int = 64, K: int = LIFT_ORDER,
                c0: float = DEFAULT_C0, f: complex = 1.0) -> DNResult:
    """mu_m(lambda) * f via lift, exact (L - lambda), projection, Dirichlet resolvent, traces.

    N counts radial orders on the mode: basis functions with n = |m| + 2k', k' <= N.
    The truncation estimate compares with k' <= N/2.
    """
    as_gamma(gamma).require_traces()
    check_resolvent_set(gamma, lam, abs(m) + 2 * N, m)
    if f == 0:
        return DNResult(0.0, 0.0, N)

    def mu_at(NN):
        idxs, w, norms = dn_spectral_correction(gamma, lam, m, abs(m) + 2 * NN, K)
        tn_lift = -2.0 * c0 if gamma == 0 else 0.0
        return tn_lift + neumann_constant(gamma) * np.sum(w / norms)

    mu = mu_at(N)
    mu_half = mu_at(N // 2)
    return DNResult(complex(f * mu), float(abs(f) * abs(mu - mu_half)), N)


# ---------------------------------------------------------------------------
# multipliers, Weyl function, Poisson map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierMultiplier:
    """Diagonal operator f_m -> symbol(m) f_m; symbol is a dict or a callable of m."""
    symbol: Union[Mapping[int, complex], Callable[[int], complex]]
    modes: Optional[Sequence[int]] = None

    def __call__(self, m: int) -> complex:
        if callable(self.symbol):
            return complex(self.symbol(m))
        return complex(self.symbol.get(int(m), 0.0))

    @property
    def selfadjoint(self) -> bool:
        ms = self.modes if self.modes is not None else (list(self.symbol) if not callable(self.symbol) else range(-32, 33))
        return all(abs(self(m).imag) == 0.0 for m in ms)

    def apply(self, f: BoundaryFunction) -> BoundaryFunction:
        return BoundaryFunction({m: self(m) * v for m, v in f.coeffs.items()})

    @classmethod
    def constant(cls, beta: complex) -> "FourierMultiplier":
        return cls(lambda m, b=beta: b)


@dataclass(frozen=True)
class IotaMultiplier:
    """f_m -> <m>^s f_m: an isometry H^s(S^1) -> L^2(S^1) for the weights <m>^{2s}."""
    order: float

    def weight(self, m) -> float:
        return float((1.0 + m * m) ** (0.5 * self.order))

    def apply(self, f: BoundaryFunction) -> BoundaryFunction:
        return BoundaryFunction({m: self.weight(m) * v for m, v in f.coeffs.items()})

    def inverse(self, f: BoundaryFunction) -> BoundaryFunction:
        return BoundaryFunction({m: v / self.weight(m) for m, v in f.coeffs.items()})


def iota_gamma(gamma: float, m: int) -> float:
    """Weight of iota_(gamma): H_(gamma) -> L^2; iota_(gamma)' uses its inverse."""
    return float(np.sqrt(hgamma_weight(gamma, m)))


def weyl_function(gamma: float, lam: complex, M: int, N: int = 64, c0: float = DEFAULT_C0,
                  route: str = "ode") -> FourierMultiplier:
    """M(lambda) symbol(m) = mu_m(lambda) / w(m)^2 for |m| <= M."""
    sym = {}
    for m in range(-M, M + 1):
        mu = dn_map_mode_ode(gamma, lam, m, c0) if route == "ode" else dn_map_mode(gamma, lam, m, N, c0=c0).mu
        sym[m] = mu / iota_gamma(gamma, m) ** 2
    return FourierMultiplier(sym, list(range(-M, M + 1)))


def poisson_lift(gamma: float, lam: complex, f: BoundaryFunction, c0: float = DEFAULT_C0) -> List[KernelElement]:
    """P(lambda) f: kernel elements with iota tau^D = f, one per nonzero mode."""
    out = []
    for m in f.modes:
        v = f.get(m)
        if v == 0:
            continue
        out.append(KernelElement(gamma, lam, m, v / iota_gamma(gamma, m), c0))
    return out


# ---------------------------------------------------------------------------
# Krein resolvent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KreinSolution:
    spectral: SpectralVector          # u_D = (L_D - lambda)^{-1} rhs
    kernel: List[KernelElement]       # correction c_m p_m
    lam: complex
    operator_residual: float
    boundary_residual: float
    pairing_crosscheck: float         # |<rhs, p(conj lambda)>/2pi - tau^N u_D| over modes


def _spectral_element_pairing(gamma: float, u: SpectralVector, m: int, elem, rule=None):
    """<u|_m, elem> in L^2_gamma by quadrature."""
    return inner_product(gamma, SpectralElement(u, m), elem, rule or radial_rule(0.0, 1.0, 32, panels=16))


def krein_resolvent(gamma: float, lam: complex, B: FourierMultiplier, rhs: SpectralVector,
                    M: Optional[int] = None, c0: float = DEFAULT_C0) -> KreinSolution:
    """(A_[B] - lambda)^{-1} rhs for the extension with boundary condition Gamma0 u = B Gamma1 u.

    Per mode: u = u_D + c_m p_m with p_m the kernel element (tau^D = 1, tau^N = mu_m),
    c_m = B_m (P(conj lambda)^* rhs)_m / (w_m^2 - B_m mu_m),  w_m^2 the H_(gamma) weight;
    (P(conj lambda)^* rhs)_m is the pairing <rhs, p_m(conj lambda)> / (2 pi) (Riesz form).
    """
    as_gamma(gamma).require_traces()
    uD = dirichlet_resolvent(gamma, lam, rhs)
    tn_uD = trace_neumann_spectral(uD)
    modes = rhs.modes if M is None else [m for m in rhs.modes if abs(m) <= M]
    kernel = []
    op_res = 0.0
    bd_res = 0.0
    cross = 0.0
    rule = radial_rule(0.0, 1.0, 32, panels=16)
    for m in modes:
        Bm = B(m)
        if Bm == 0:
            continue
        p = KernelElement(gamma, lam, m, 1.0, c0)
        mu = p.mu
        w2 = iota_gamma(gamma, m) ** 2
        if abs(1.0 - Bm * mu / w2) < COLLISION_TOL:
            raise KreinCollisionError(f"1 - B M(lambda) vanishes on mode {m}: lambda={lam} is a "
                                      f"candidate eigenvalue of the extension", m, lam)
        pbar = KernelElement(gamma, np.conj(lam), m, 1.0, c0)
        pstar = _spectral_element_pairing(gamma, rhs, m, pbar, rule) / (2 * np.pi)
        cross = max(cross, abs(pstar - tn_uD.get(m)))
        cm = Bm * pstar / (w2 - Bm * mu)
        pk = p.scaled(cm)
        kernel.append(pk)
        # certificates
        xs = np.linspace(0.02, 0.98, 49)
        op_res = max(op_res, float(np.max(np.abs(pk.residual(xs)))))
        tD = cm
        tN = tn_uD.get(m) + cm * mu
        bd_res = max(bd_res, abs(w2 * tD - Bm * tN) / math.sqrt(w2))
    return KreinSolution(uD, kernel, lam, op_res, bd_res, cross)


def krein_pairing(gamma: float, sol: KreinSolution, v: SpectralVector) -> complex:
    """<(A_[B] - lambda)^{-1} rhs, v>_{L^2_gamma}."""
    val = sum(a * np.conj(v.entries.get(i, 0.0)) for i, a in sol.spectral.entries.items())
    rule = radial_rule(0.0, 1.0, 32, panels=16)
    for p in sol.kernel:
        val += np.conj(_spectral_element_pairing(gamma, v, p.m, p, rule))
    return complex(val)


def robin_denominator(gamma: float, lam: float, m: int, Bm: float, c0: float = DEFAULT_C0) -> float:
    """w_m^2 - B_m mu_m(lambda) for real lambda (zero at eigenvalues of A_[B] on mode m)."""
    return float((iota_gamma(gamma, m) ** 2 - Bm * dn_map_mode_ode(gamma, lam, m, c0)).real)


def robin_eigenvalue_scan(gamma: float, m: int, Bm: float, n_lo: int, c0: float = DEFAULT_C0,
                          samples: int = 64) -> Optional[float]:
    """Locate a zero of the Krein denominator strictly between the Dirichlet eigenvalues
    of degrees n_lo and n_lo + 2 on mode m (interlacing scan + bisection)."""
    from scipy.optimize import brentq
    lo = dirichlet_eigenvalue(gamma, n_lo)
    hi = dirichlet_eigenvalue(gamma, n_lo + 2)
    eps = 1e-6 * (hi - lo)
    grid = np.linspace(lo + eps, hi - eps, samples)
    vals = [robin_denominator(gamma, l, m, Bm, c0) for l in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            return float(a)
        if fa * fb < 0:
            return float(brentq(lambda l: robin_denominator(gamma, l, m, Bm, c0), a, b, xtol=1e-13))
    return None


# ---------------------------------------------------------------------------
# maximal domain, boundary triple
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaxDomainSplit:
    f_D: SpectralVector                 # projected coefficients of the Dirichlet part
    f_D_exact: Tuple[SpectralVector, List[RadialElement]]   # u + (a - p), exact representation
    f_lambda: List[KernelElement]
    lam: complex
    certificate: float


@dataclass(frozen=True)
class MaxElement:
    """f = u + sum(a): spectral (Dirichlet-domain) part plus conormal elements."""
    u: SpectralVector
    elems: List[ConormalElement]

    @property
    def gamma(self):
        return self.u.gamma

    @property
    def modes(self):
        return sorted(set(self.u.modes) | {a.m for a in self.elems})


def decompose_max(gamma: float, lam: complex, f: MaxElement, N: Optional[int] = None,
                  c0: float = DEFAULT_C0) -> MaxDomainSplit:
    """f = f_D + f_lambda with f_D in the Dirichlet domain and (L - lambda) f_lambda = 0."""
    N = f.u.truncation if N is None else N
    check_resolvent_set(gamma, lam, N)
    f_lam, rest = [], []
    cert = 0.0
    xs = np.linspace(0.02, 0.98, 49)
    for a in f.elems:
        tD = trace_dirichlet(a).get(a.m)
        if tD == 0:
            rest.append(a)
            continue
        p = KernelElement(gamma, lam, a.m, tD, c0)
        f_lam.append(p)
        rest.append(_Difference(a, p))
        cert = max(cert, float(np.max(np.abs(p.residual(xs)))))
    # projected Dirichlet coefficients: <(L - lambda) f, G^> / (mu - lambda)
    rule = _projection_rule()
    ent = dict(f.u.entries)
    for a in f.elems:
        La = apply_L(gamma, a)
        idxs, vals, _ = _mode_basis(gamma, a.m, N, rule.x)
        sw = rule.sqrt_weights(gamma)
        F = La.evaluate(rule.x)[0] - lam * a.evaluate(rule.x)[0]
        proj = 2 * np.pi * ((vals * sw) @ (F * sw))
        for i, c in zip(idxs, proj):
            ent[i] = ent.get(i, 0.0) + c / (dirichlet_eigenvalue(gamma, i.n) - lam)
    fD = SpectralVector(gamma, ent, N)
    return MaxDomainSplit(fD, (f.u, rest), f_lam, lam, cert)


@dataclass(frozen=True)
class _Difference(RadialElement):
    a: RadialElement
    b: RadialElement

    @property
    def gamma(self):
        return self.a.gamma

    @property
    def m(self):
        return self.a.m

    @property
    def c0(self):
        return self.a.c0

    def parts(self, x):
        pa = self.a.parts(x)
        pb = self.b.parts(x)
        return tuple(u - v for u, v in zip(pa, pb))

    def boundary_values(self):
        sa, ha = self.a.boundary_values()
        sb, hb = self.b.boundary_values()
        return sa - sb, ha - hb


def extended_dirichlet_trace(gamma: float, f: MaxElement, M: Optional[int] = None) -> BoundaryFunction:
    """tau~^D through the pairing tau~^D_m f = (<f, L g_m> - <L f, g_m>) / (2 pi), g_m = R_N e_m.

    The spectral part pairs to zero exactly (L_D is symmetric on it); the conormal part is
    paired by quadrature.
    """
    out = {}
    modes = f.modes if M is None else [m for m in f.modes if abs(m) <= M]
    rule = radial_rule(0.0, 1.0, 32, panels=16)
    for m in modes:
        g = right_inverse_neumann(gamma, BoundaryFunction.mode(m))
        ge = SpectralElement(g, m)
        Lge = SpectralElement(g.apply_L(), m)
        val = 0.0
        for a in f.elems:
            if a.m != m:
                continue
            val += inner_product(gamma, a, Lge, rule) - inner_product(gamma, apply_L(gamma, a), ge, rule)
        out[m] = val / (2 * np.pi)
    return BoundaryFunction(out)


def boundary_triple_maps(gamma: float, lam: complex, f: MaxElement, c0: float = DEFAULT_C0,
                         use_pairing: bool = False):
    """(Gamma0 f, Gamma1 f) = (iota tau~^D f, iota' tau^N f_D)."""
    tD = extended_dirichlet_trace(gamma, f) if use_pairing else trace_dirichlet(f.elems) if f.elems else BoundaryFunction()
    tN_u = trace_neumann_spectral(f.u)
    tN_a = trace_neumann(f.elems) if f.elems else BoundaryFunction()
    g0, g1 = {}, {}
    for m in f.modes:
        w = iota_gamma(gamma, m)
        d = tD.get(m)
        mu = dn_map_mode_ode(gamma, lam, m, c0) if d != 0 else 0.0
        g0[m] = w * d
        g1[m] = (tN_u.get(m) + tN_a.get(m) - mu * d) / w
    return BoundaryFunction(g0), BoundaryFunction(g1)


def max_inner(gamma: float, f: MaxElement, g: MaxElement, Lf: bool = False, Lg: bool = False) -> complex:
    """<L^? f, L^? g>_{L^2_gamma} for maximal-domain representatives."""
    fu = f.u.apply_L() if Lf else f.u
    gu = g.u.apply_L() if Lg else g.u
    fa = [apply_L(gamma, a) for a in f.elems] if Lf else list(f.elems)
    ga = [apply_L(gamma, a) for a in g.elems] if Lg else list(g.elems)
    val = sum(v * np.conj(gu.entries.get(i, 0.0)) for i, v in fu.entries.items())
    rule = radial_rule(0.0, 1.0, 32, panels=16)
    for a in fa:
        for b in ga:
            val += inner_product(gamma, a, b, rule)
        if a.m in gu.modes:
            val += inner_product(gamma, a, SpectralElement(gu, a.m), rule)
    for b in ga:
        if b.m in fu.modes:
            val += inner_product(gamma, SpectralElement(fu, b.m), b, rule)
    return complex(val)
