"""Special functions and the generalized Zernike eigenbasis on the unit disk.

Conventions used throughout the package
---------------------------------------
* ``rho`` is the radial coordinate and ``x = 1 - rho**2`` the boundary
  defining function.  Everything that can lose precision near the boundary
  is evaluated on ``x`` directly.
* A :class:`RadialProfile` on angular mode ``m`` stores coefficients ``c_j``
  of ``rho**(|m| + 2j)``.
* Quadrature rules integrate in the radial variable with the disk measure
  ``rho d rho`` already included; a disk integral of a single-mode product
  is ``2*pi * rule.integrate(values)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_jacobi


class RegimeError(ValueError):
    """Raised when an operation is not admitted for the given gamma."""


class Regime(enum.Enum):
    SUBCRITICAL_NEGATIVE = "SubcriticalNegative"
    LOG_CRITICAL = "LogCritical"
    SUBCRITICAL_POSITIVE = "SubcriticalPositive"
    ESSENTIAL = "Essential"


@dataclass(frozen=True)
class GammaParam:
    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not math.isfinite(g):
            raise ValueError(f"gamma must be finite, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    @property
    def regime(self) -> Regime:
        g = self.gamma
        if abs(g) >= 1.0:
            return Regime.ESSENTIAL
        if g < 0:
            return Regime.SUBCRITICAL_NEGATIVE
        if g == 0:
            return Regime.LOG_CRITICAL
        return Regime.SUBCRITICAL_POSITIVE

    def require_traces(self):
        """Regularized traces exist only for |gamma| < 1."""
        if self.regime is Regime.ESSENTIAL:
            raise RegimeError(
                f"gamma={self.gamma} is in the essential regime |gamma|>=1; "
                "boundary traces are not defined there")
        return self


def as_gamma(gamma) -> GammaParam:
    return gamma if isinstance(gamma, GammaParam) else GammaParam(gamma)


# ---------------------------------------------------------------------------
# radial profiles and indices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """rho**|m| * sum_j coeffs[j] * rho**(2j) on angular mode m."""
    m: int
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs))
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        if c.size == 0:
            c = np.zeros(1, dtype=c.dtype)
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, m: int = 0) -> "RadialProfile":
        return cls(m, np.zeros(1))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def boundary_value(self):
        """Value at rho = 1 (x = 0): the sum of the coefficients."""
        return self.coeffs.sum()

    def evaluate(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """Return (value, d/drho) at the points x = 1 - rho^2."""
        x = np.asarray(x, dtype=float)
        z = 1.0 - x
        rho = np.sqrt(z)
        am = abs(self.m)
        c = self.coeffs
        val = np.polynomial.polynomial.polyval(z, c)
        dc = c * (am + 2 * np.arange(len(c)))
        if am == 0:
            # j = 0 term has zero derivative; pull one factor rho out
            dpoly = np.polynomial.polynomial.polyval(z, dc[1:]) if len(c) > 1 else 0.0 * z
            dval = rho * dpoly
        else:
            dval = rho ** (am - 1) * np.polynomial.polynomial.polyval(z, dc)
        return rho ** am * val, dval

    def __call__(self, x):
        return self.evaluate(x)[0]

    # simple algebra ---------------------------------------------------------
    def _padded(self, other: "RadialProfile"):
        if other.m != self.m and not (self.is_zero() or other.is_zero()):
            raise ValueError("profiles live on different modes")
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, dtype=np.result_type(self.coeffs, other.coeffs))
        b = np.zeros(n, dtype=a.dtype)
        a[:len(self.coeffs)] = self.coeffs
        b[:len(other.coeffs)] = other.coeffs
        return a, b

    def __add__(self, other: "RadialProfile") -> "RadialProfile":
        a, b = self._padded(other)
        m = self.m if not self.is_zero() else other.m
        return RadialProfile(m, a + b)

    def __sub__(self, other: "RadialProfile") -> "RadialProfile":
        return self + other.scale(-1.0)

    def scale(self, s) -> "RadialProfile":
        return RadialProfile(self.m, self.coeffs * s)

    def __mul__(self, s):
        return self.scale(s)

    __rmul__ = __mul__

    def with_mode(self, m: int) -> "RadialProfile":
        if abs(m) != abs(self.m):
            raise ValueError("only the sign of the mode may change")
        return RadialProfile(m, self.coeffs)

    def times_x(self) -> "RadialProfile":
        """Multiply by x = 1 - rho^2."""
        c = self.coeffs
        out = np.zeros(len(c) + 1, dtype=c.dtype)
        out[:-1] += c
        out[1:] -= c
        return RadialProfile(self.m, out)

    def trimmed(self, tol: float = 0.0) -> "RadialProfile":
        c = self.coeffs
        nz = np.nonzero(np.abs(c) > tol)[0]
        if nz.size == 0:
            return RadialProfile(self.m, np.zeros(1, dtype=c.dtype))
        return RadialProfile(self.m, c[: nz[-1] + 1])

    def allclose(self, other: "RadialProfile", rtol=1e-12, atol=1e-12) -> bool:
        a, b = self._padded(other)
        return bool(np.allclose(a, b, rtol=rtol, atol=atol))


@dataclass(frozen=True)
class ZernikeIndex:
    n: int
    k: int

    def __post_init__(self):
        n, k = int(self.n), int(self.k)
        if n < 0 or k < 0 or k > n:
            raise ValueError(f"invalid Zernike index (n={self.n}, k={self.k})")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)

    @property
    def m(self) -> int:
        return self.n - 2 * self.k

    @property
    def radial_order(self) -> int:
        """k' = (n - |m|)/2 = min(k, n - k)."""
        return min(self.k, self.n - self.k)

    @classmethod
    def from_mode(cls, m: int, kprime: int) -> "ZernikeIndex":
        """Index of degree |m| + 2k' on angular mode m."""
        n = abs(m) + 2 * kprime
        return cls(n, (n - m) // 2)


def indices_up_to(N: int):
    """All Zernike indices with n <= N in (n, k) order."""
    return [ZernikeIndex(n, k) for n in range(N + 1) for k in range(n + 1)]


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def jacobi_table(kmax: int, alpha: float, beta: float, t) -> np.ndarray:
    """P_0..P_kmax^{(alpha,beta)}(t) stacked along axis 0 (three-term recurrence)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((kmax + 1,) + t.shape)
    out[0] = 1.0
    if kmax == 0:
        return out
    a, b = alpha, beta
    out[1] = (a + 1.0) + (a + b + 2.0) * (t - 1.0) / 2.0
    for k in range(2, kmax + 1):
        s = 2 * k + a + b
        c1 = 2.0 * k * (k + a + b) * (s - 2.0)
        c2 = (s - 1.0) * (s * (s - 2.0) * t + a * a - b * b)
        c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s
        out[k] = (c2 * out[k - 1] - c3 * out[k - 2]) / c1
    return out


def jacobi_eval(k: int, alpha: float, beta: float, t):
    """Return (P_k^{(alpha,beta)}(t), d/dt P_k^{(alpha,beta)}(t))."""
    if k < 0 or alpha <= -1 or beta <= -1:
        raise ValueError("need k >= 0, alpha > -1, beta > -1")
    val = jacobi_table(k, alpha, beta, t)[k]
    if k == 0:
        return val, np.zeros_like(val)
    dval = 0.5 * (k + alpha + beta + 1) * jacobi_table(k - 1, alpha + 1, beta + 1, t)[k - 1]
    return val, dval


def jacobi_at_one(k: int, alpha: float) -> float:
    """P_k^{(alpha,beta)}(1) = binom(k + alpha, k)."""
    return math.exp(log_gamma(k + alpha + 1) - log_gamma(k + 1) - log_gamma(alpha + 1))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

class WeightKind(enum.Enum):
    POWER_GAMMA = "PowerGamma"              # x^gamma rho drho on [0,1]
    POWER_GAMMA_TIMES_X = "PowerGammaTimesX"  # x^(gamma+1) rho drho on [0,1]
    LOG_SQUARED = "LogSquared"              # log^2(x) dx on [0,a]
    COMPOSITE = "Composite"                 # rho drho on an x-interval, graded at x=0


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray        # rho values, strictly increasing
    x: np.ndarray            # 1 - rho^2, computed without cancellation
    weights: np.ndarray
    weight_kind: WeightKind
    gamma: float = 0.0
    # composite rules leave [0, exp(log_x_cut)] uncovered (graded part stops
    # before x underflows); -inf when the rule reaches x = 0
    log_x_cut: float = -math.inf

    def __post_init__(self):
        for name in ("nodes", "x", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def npts(self) -> int:
        return len(self.weights)

    def integrate(self, values):
        return np.sum(self.weights * np.asarray(values), axis=-1)

    def sqrt_weights(self, power: float = 0.0):
        """sqrt(weights * x^power), formed without underflow for tiny x."""
        return np.sqrt(self.weights) * self.x ** (0.5 * power)

    def disk_integral(self, values):
        """Integral over the disk of a radial integrand (times the rule weight)."""
        return 2.0 * np.pi * self.integrate(values)


def _gauss_jacobi_power(npts: int, p: float, kind: WeightKind, gamma: float) -> QuadratureRule:
    # t = 2 rho^2 - 1:  x^p rho drho = 2^-p (1-t)^p dt / 4
    t, w = roots_jacobi(npts, p, 0.0)
    if np.any(~np.isfinite(t)) or np.any(w <= 0):
        raise RuntimeError("Gauss-Jacobi node computation failed")
    x = 0.5 * (1.0 - t)
    rho = np.sqrt(0.5 * (1.0 + t))
    return QuadratureRule(rho, x, w * 2.0 ** (-p) / 4.0, kind, gamma)


def _panel_points(a: float, b: float, order: int):
    s, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (b - a) * s + 0.5 * (a + b), 0.5 * (b - a) * w


def quad_rule(npts: int, kind: WeightKind = WeightKind.POWER_GAMMA, gamma: float = 0.0,
              a: float = 1.0) -> QuadratureRule:
    """Build a quadrature rule.

    POWER_GAMMA(gamma) is Gauss-Jacobi and integrates rho^{2j} x^gamma rho drho
    exactly for j <= 2*npts - 1.  LOG_SQUARED integrates F(x) log(x)^2 dx on
    [0, a] with geometrically graded Gauss-Legendre panels (20 per decade down
    to 1e-14 a); its error target for integrands smooth in x is 1e-10.
    """
    if npts < 1:
        raise ValueError("npts must be >= 1")
    kind = WeightKind(kind)
    if kind is WeightKind.POWER_GAMMA:
        if not gamma > -1:
            raise ValueError("PowerGamma rule needs gamma > -1")
        return _gauss_jacobi_power(npts, gamma, kind, gamma)
    if kind is WeightKind.POWER_GAMMA_TIMES_X:
        if not gamma > -2:
            raise ValueError("PowerGammaTimesX rule needs gamma > -2")
        return _gauss_jacobi_power(npts, gamma + 1.0, kind, gamma)
    if kind is WeightKind.LOG_SQUARED:
        if not 0 < a <= 1:
            raise ValueError("LogSquared rule needs 0 < a <= 1")
        edges = a * 10.0 ** (-np.arange(0, 14 * 20 + 1) / 20.0)
        xs, ws = [], []
        for hi, lo in zip(edges[:-1], edges[1:]):
            p, w = _panel_points(lo, hi, npts)
            xs.append(p)
            ws.append(w)
        p, w = _panel_points(0.0, edges[-1], npts)
        xs.append(p)
        ws.append(w)
        x = np.concatenate(xs)
        w = np.concatenate(ws) * np.log(np.concatenate(xs)) ** 2
        order = np.argsort(-x)
        x, w = x[order], w[order]
        return QuadratureRule(np.sqrt(1.0 - x), x, w, kind, gamma)
    if kind is WeightKind.COMPOSITE:
        return radial_rule(0.0, 1.0, npts)
    raise ValueError(f"unknown weight kind {kind}")


_X_FLOOR = 1e-150  # graded nodes stay above this so x^(-2) products stay finite


def radial_rule(x_lo: float = 0.0, x_hi: float = 1.0, order: int = 16,
                panels: int = 8, breaks: Sequence[float] = ()) -> QuadratureRule:
    """Composite rule for integrands with boundary singularities at x = 0.

    Integrates F(x) rho drho = F dx / 2 over x in [x_lo, x_hi].  If x_lo = 0,
    the part of the range below X0 = min(x_hi, first break, 1/2) uses the
    substitution x = X0^(1/t) with dyadic t-panels, which integrates x^p
    (p > -1), log x, log^2 x and 1/(x log^2 x) to near machine precision.  The
    rest is split at ``breaks`` and covered by ``panels`` Gauss-Legendre
    panels per piece.  The graded part stops at the last dyadic
    panel whose nodes stay above 1e-150; the uncovered interval
    [0, x_cut = exp(log_x_cut)] carries mass x_cut^(p+1)/(p+1) for x^p, which
    is negligible unless p is close to -1, and 1/|log x_cut| for
    1/(x log^2 x).  Callers with such integrands add the tail analytically.
    """
    if not 0.0 <= x_lo < x_hi <= 1.0:
        raise ValueError("need 0 <= x_lo < x_hi <= 1")
    cuts = sorted(b for b in breaks if x_lo < b < x_hi)
    xs, ws = [], []
    log_x_cut = -math.inf
    if x_lo == 0.0:
        X0 = min([x_hi, 0.5] + cuts)
        L = math.log(X0)
        for j in range(60):
            t, wt = _panel_points(2.0 ** (-j - 1), 2.0 ** (-j), order)
            xx = np.exp(L / t)
            if np.any(xx < _X_FLOOR):
                log_x_cut = L * 2.0 ** j
                break
            # dx = x * (-L / t^2) dt
            xs.append(xx)
            ws.append(xx * (-L) / t ** 2 * wt)
        start = X0
    else:
        start = x_lo
    pts = [start] + [c for c in cuts if c > start] + [x_hi]
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        if a > 0 and b / a > 2.0:
            # geometric panels keep log-type behaviour near x = 0 resolved
            edges = np.geomspace(a, b, max(panels, math.ceil(math.log2(b / a))) + 1)
        else:
            edges = np.linspace(a, b, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            p, w = _panel_points(lo, hi, order)
            xs.append(p)
            ws.append(w)
    x = np.concatenate(xs)
    w = 0.5 * np.concatenate(ws)
    order_idx = np.argsort(-x)
    x, w = x[order_idx], w[order_idx]
    return QuadratureRule(np.sqrt(1.0 - x), x, w, WeightKind.COMPOSITE, 0.0, log_x_cut)


# ---------------------------------------------------------------------------
# regularizer phi_gamma
# ---------------------------------------------------------------------------

_SERIES_TERMS = 80  # 0.5^80 ~ 1e-24, ample for x <= 1/2


def _big_phi(gamma: float, x, u):
    """Phi(x) = sum_{k>=0} x^(k-gamma)/(k-gamma) for 0 < gamma < 1.

    Uses the power series for x <= 1/2 and the expansion of the primitive
    around x = 1 (in u = 1 - x) otherwise.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    out = np.empty_like(x)
    k = np.arange(_SERIES_TERMS)
    lo = x <= 0.5
    if np.any(lo):
        xl = x[lo][:, None]
        out[lo] = np.sum(xl ** (k - gamma) / (k - gamma), axis=1)
    hi = ~lo
    if np.any(hi):
        phi_half = np.sum(0.5 ** (k - gamma) / (k - gamma))
        i = np.arange(1, _SERIES_TERMS)
        # a_i = (gamma+1)_i / i!
        a_i = np.exp(np.cumsum(np.log((gamma + i) / i)))
        uh = u[hi][:, None]
        tail = np.sum(a_i * (0.5 ** i - uh ** i) / i, axis=1)
        out[hi] = phi_half - np.log(2.0 * u[hi]) + tail
    return out


def s_series(gamma: float, x, u=None):
    """S(x) = gamma * sum_{k>=1} x^k/(k - gamma), so that phi = x^-gamma (1 - S)."""
    x = np.asarray(x, dtype=float)
    u = 1.0 - x if u is None else np.asarray(u, dtype=float)
    out = np.empty_like(x)
    lo = x <= 0.5
    k = np.arange(1, _SERIES_TERMS)
    if np.any(lo):
        xl = x[lo][:, None]
        out[lo] = gamma * np.sum(xl ** k / (k - gamma), axis=1)
    hi = ~lo
    if np.any(hi):
        out[hi] = 1.0 + gamma * x[hi] ** gamma * _big_phi(gamma, x[hi], u[hi])
    return out


def x_gamma_root(gamma: float) -> float:
    """Positivity threshold: the x in (0,1) with gamma*sum x^k/(k-gamma) = 1."""
    return -math.expm1(_log_u_gamma_root(gamma))


def _big_phi_logu(gamma: float, logu: float) -> float:
    """Phi at x = 1 - exp(logu), usable even when exp(logu) underflows."""
    u = math.exp(logu)
    if u >= 0.5:
        x = -math.expm1(logu)
        return float(_big_phi(gamma, np.array([x]), np.array([u]))[0])
    k = np.arange(_SERIES_TERMS)
    phi_half = np.sum(0.5 ** (k - gamma) / (k - gamma))
    i = np.arange(1, _SERIES_TERMS)
    a_i = np.exp(np.cumsum(np.log((gamma + i) / i)))
    tail = np.sum(a_i * (0.5 ** i - u ** i) / i)
    return float(phi_half - math.log(2.0) - logu + tail)


def _log_u_gamma_root(gamma: float) -> float:
    """log(1 - x_gamma), by bisection in log(1 - x); x_gamma -> 1 as gamma -> 0."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("x_gamma_root needs gamma in (0,1)")
    # Phi has the sign of S - 1 and increases with x, i.e. decreases with log u
    lo, hi = -1.0e6, math.log(1.0 - 1e-12)
    if not (_big_phi_logu(gamma, lo) > 0 > _big_phi_logu(gamma, hi)):
        raise RuntimeError("x_gamma bisection is not bracketed")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if _big_phi_logu(gamma, mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PhiGamma:
    """The radial regularizer phi_gamma and its positivity threshold.

    gamma in (0,1): phi = -gamma * sum_{k>=0} x^(k-gamma)/(k-gamma)
    gamma = 0:      phi = log x - log(1-x) - c0
    gamma in (-1,0): phi = 1 (x_gamma = 1, b_gamma = 0 by convention)
    """
    gamma: float
    c0: float = 4.0
    x_gamma: float = 1.0
    u_gamma: float = 0.0     # 1 - x_gamma, kept separately (tiny for small gamma)
    b_gamma: float = 0.0
    log_u_gamma: float = -math.inf

    @classmethod
    def build(cls, gamma, c0: float = 4.0) -> "PhiGamma":
        gp = as_gamma(gamma).require_traces()
        g = gp.gamma
        if g == 0:
            if not c0 > math.log(math.exp(4.0) - 1.0):
                raise ValueError("c0 must exceed log(e^4 - 1)")
            u = 1.0 / (1.0 + math.exp(c0))
            return cls(g, c0, 1.0 / (1.0 + math.exp(-c0)), u, math.sqrt(u), math.log(u))
        if g < 0:
            return cls(g, c0, 1.0, 0.0, 0.0, -math.inf)
        lu = _log_u_gamma_root(g)
        return cls(g, c0, -math.expm1(lu), math.exp(lu), math.exp(0.5 * lu), lu)

    def weight(self, x):
        """The singular weight w_gamma: x^-gamma (gamma != 0) or log x."""
        x = np.asarray(x, dtype=float)
        return np.log(x) if self.gamma == 0 else x ** (-self.gamma)


def phi_eval(phi: PhiGamma, x):
    """Return (phi_gamma(x), d/drho phi_gamma(x)) for x in (0,1)."""
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) | (x >= 1)):
        raise ValueError("phi_eval requires 0 < x < 1")
    g = phi.gamma
    rho = np.sqrt(1.0 - x)
    if g < 0:
        return np.ones_like(x), np.zeros_like(x)
    if g == 0:
        val = np.log(x) - np.log1p(-x) - phi.c0
        return val, -2.0 / (rho * x)
    val = x ** (-g) * (1.0 - s_series(g, x))
    return val, 2.0 * g * x ** (-g - 1.0) / rho


# ---------------------------------------------------------------------------
# generalized Zernike basis
# ---------------------------------------------------------------------------

def zernike_profile(gamma: float, idx: ZernikeIndex) -> RadialProfile:
    """Radial part of G_{n,k}^gamma in monomials rho^{|m|+2j}, normalized to g(1) = 1."""
    if gamma < 0:
        raise ValueError("zernike_profile needs gamma >= 0 (use the intertwined basis)")
    m = idx.m
    am = abs(m)
    kp = idx.radial_order
    lam = (idx.n + 1 + gamma) ** 2
    c = np.empty(kp + 1)
    c[0] = 1.0
    for j in range(kp):
        c[j + 1] = c[j] * ((am + 2 * j + gamma + 1) ** 2 - lam) / (4.0 * (j + 1) * (am + j + 1))
    return RadialProfile(m, c / c.sum())


def zernike_eigenvalue(gamma: float, n: int) -> float:
    return (n + 1 + abs(gamma)) ** 2


def zernike_norm_sq(gamma: float, idx: ZernikeIndex) -> float:
    """Squared L^2_gamma(D) norm of G_{n,k}^gamma (boundary value 1)."""
    if gamma < 0:
        raise ValueError("zernike_norm_sq needs gamma >= 0")
    n, k = idx.n, idx.k
    lg = (log_gamma(n - k + 1) + 2 * log_gamma(gamma + 1) + log_gamma(k + 1)
          - log_gamma(k + gamma + 1) - log_gamma(n - k + gamma + 1))
    return math.pi / (n + gamma + 1) * math.exp(lg)


def zernike_values(gamma: float, m: int, kmax: int, x) -> Tuple[np.ndarray, np.ndarray]:
    """Values and rho-derivatives of the radial parts of degree |m|+2k', k' = 0..kmax.

    Evaluated through the Jacobi recurrence, which stays accurate for degrees
    where the monomial coefficients of :func:`zernike_profile` would cancel.
    Returns arrays of shape (kmax+1, len(x)); g(1) = 1 for every row.
    """
    if gamma < 0:
        raise ValueError("zernike_values needs gamma >= 0")
    x = np.asarray(x, dtype=float)
    am = abs(m)
    t = 1.0 - 2.0 * x
    rho = np.sqrt(1.0 - x)
    P = jacobi_table(kmax, gamma, am, t)
    dP = np.zeros_like(P)
    if kmax >= 1:
        Q = jacobi_table(kmax - 1, gamma + 1, am + 1, t)
        ks = np.arange(1, kmax + 1)
        dP[1:] = 0.5 * (ks + gamma + am + 1)[:, None] * Q
    norm = np.array([jacobi_at_one(k, gamma) for k in range(kmax + 1)])[:, None]
    P, dP = P / norm, dP / norm
    val = rho ** am * P
    # d/drho [rho^|m| P(t)] with dt/drho = 4 rho
    if am == 0:
        dval = 4.0 * rho * dP
    else:
        dval = am * rho ** (am - 1) * P + 4.0 * rho ** (am + 1) * dP
    return val, dval


def zernike_mode_table(gamma: float, m: int, N: int):
    """Indices on mode m with n <= N, in increasing degree."""
    am = abs(m)
    if am > N:
        return []
    return [ZernikeIndex.from_mode(m, kp) for kp in range((N - am) // 2 + 1)]


def intertwined_weight(gamma: float, x):
    """x^{-gamma} for gamma < 0 (basis factor of the intertwined Dirichlet basis); 1 otherwise."""
    x = np.asarray(x, dtype=float)
    return x ** (-gamma) if gamma < 0 else np.ones_like(x)
