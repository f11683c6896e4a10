"""Finite-sample audits of the trace inequalities, decay rates and dichotomies.

Each audit produces an :class:`AuditReport` whose ``worst_margin`` is the
smallest (normalized) slack observed; an audit passes iff the worst margin is
at least ``-slack``, with the slack recorded in the report parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, roots_jacobi

from .basis import PhiGamma, ZernikeIndex, radial_rule, zernike_norm_sq
from .operator import ConormalElement, default_b, h1_gram, inner_product, l2_norm


@dataclass
class AuditReport:
    name: str
    parameters: Dict[str, object]
    samples: int
    worst_margin: float
    passed: bool
    data: List[Dict[str, object]] = field(default_factory=list)

    @classmethod
    def from_margins(cls, name, parameters, margins, data=None, slack: float = 0.0):
        margins = np.asarray(margins, dtype=float)
        worst = float(margins.min()) if margins.size else 0.0
        params = dict(parameters)
        params["slack"] = slack
        return cls(name, params, int(margins.size), worst, bool(worst >= -slack), data or [])

    def to_dict(self):
        return {"name": self.name, "parameters": self.parameters, "samples": self.samples,
                "worst_margin": self.worst_margin, "passed": self.passed, "data": self.data}


def _gauss_jacobi_01(npts: int, gamma: float, a: float):
    """Nodes/weights for int_0^a F(x) x^gamma dx."""
    t, w = roots_jacobi(npts, 0.0, gamma)          # weight (1+t)^gamma on [-1, 1]
    x = 0.5 * a * (1.0 + t)
    return x, w * (0.5 * a) ** (gamma + 1)


# ---------------------------------------------------------------------------
# 1D trace estimates
# ---------------------------------------------------------------------------

TRACE_1D_FACTOR = 2.0


def trace_1d_margin(gamma: float, a: float, coeffs, ell: float, factor: float = TRACE_1D_FACTOR) -> float:
    """(gamma+1)(factor ell^-1 |f|^2 + 2/(-gamma) |sqrt(x) f'|^2) - ell^gamma |f(0)|^2 for a polynomial f.

    The averaging argument (|f(0)|^2 <= 2|f(x)|^2 + 2|int_0^x f'|^2, integrated
    against x^gamma over [0, ell]) yields factor = 2; with factor = 1 the
    estimate fails for some cubics when ell is close to a.
    """
    P = np.polynomial.Polynomial(coeffs)
    x, w = _gauss_jacobi_01(len(coeffs) + 4, gamma, a)
    f2 = np.sum(w * np.abs(P(x)) ** 2)
    d2 = np.sum(w * x * np.abs(P.deriv()(x)) ** 2)
    return float((gamma + 1) * (factor * f2 / ell + 2.0 / (-gamma) * d2) - ell ** gamma * abs(P(0.0)) ** 2)


def audit_trace_1d(gamma: float, a: float = 1.0, samples: int = 1000,
                   ell_grid: Optional[Sequence[float]] = None, degree: int = 3, seed: int = 0,
                   slack: float = 1e-12, factor: float = TRACE_1D_FACTOR) -> AuditReport:
    if not -1.0 < gamma < 0.0:
        raise ValueError("audit_trace_1d needs gamma in (-1, 0)")
    ell_grid = list(ell_grid) if ell_grid is not None else list(a * np.geomspace(1e-4, 0.999, 12))
    rng = np.random.default_rng(seed)
    margins, rows = [], []
    for i in range(samples):
        c = rng.uniform(-1.0, 1.0, degree + 1)
        for ell in ell_grid:
            mg = trace_1d_margin(gamma, a, c, ell, factor)
            scale = (gamma + 1) * ell ** -1 + ell ** gamma * abs(np.sum(c)) + 1.0
            margins.append(mg / scale)
        rows.append({"sample": i, "worst": float(min(margins[-len(ell_grid):]))})
    return AuditReport.from_margins("trace_1d", {"gamma": gamma, "a": a, "degree": degree,
                                                 "ell_grid": ell_grid, "seed": seed,
                                                 "factor": factor},
                                    margins, rows, slack)


def log_integrals(ell: float):
    """(int_0^ell log^2 x dx, int_0^ell -log x dx) in closed form."""
    L = math.log(ell)
    return ell * ((1.0 - L) ** 2 + 1.0), ell * (1.0 - L)


def trace_log_margin(a: float, p_coeffs, q_coeffs, ell: float, rule=None) -> float:
    """Margin of the log-weighted trace estimate for f = p + q / log x on [0, a], a < 1."""
    rule = rule or radial_rule(0.0, a, 24)
    x = rule.x
    w = 2.0 * rule.weights            # rule integrates F dx / 2
    P, Q = np.polynomial.Polynomial(p_coeffs), np.polynomial.Polynomial(q_coeffs)
    lx = np.log(x)
    f = P(x) + Q(x) / lx
    df = P.deriv()(x) + Q.deriv()(x) / lx - Q(x) / (x * lx ** 2)
    I_f = np.sum(w * lx ** 2 * np.abs(f) ** 2)
    I_df = np.sum(w * x * lx ** 2 * np.abs(df) ** 2)
    if np.isfinite(rule.log_x_cut):
        # |q|^2 / (x log^2 x) over [0, x_cut]
        I_df += abs(Q(0.0)) ** 2 / abs(rule.log_x_cut)
    I2, I1 = log_integrals(ell)
    return float(2.0 / I1 * I_f + 2.0 * I_df - I2 / I1 * abs(P(0.0)) ** 2)


def audit_trace_log(a: float = 0.5, samples: int = 1000, ell_grid: Optional[Sequence[float]] = None,
                    degree: int = 3, seed: int = 0, slack: float = 1e-12) -> AuditReport:
    if not 0.0 < a < 1.0:
        raise ValueError("audit_trace_log needs a in (0, 1)")
    ell_grid = list(ell_grid) if ell_grid is not None else list(a * np.geomspace(1e-6, 1.0, 12))
    rng = np.random.default_rng(seed)
    rule = radial_rule(0.0, a, 24)
    margins, rows = [], []
    for i in range(samples):
        p = rng.uniform(-1.0, 1.0, degree + 1)
        q = rng.uniform(-1.0, 1.0, degree + 1)
        for ell in ell_grid:
            I2, I1 = log_integrals(ell)
            scale = 1.0 + I2 / I1 * abs(p[0]) ** 2
            margins.append(trace_log_margin(a, p, q, ell, rule) / scale)
        rows.append({"sample": i, "worst": float(min(margins[-len(ell_grid):]))})
    return AuditReport.from_margins("trace_log", {"a": a, "degree": degree, "ell_grid": ell_grid,
                                                  "seed": seed}, margins, rows, slack)


def ell_of_eps(eps: float) -> float:
    """The root ell in (0, 1] of ell (1 - log ell) = eps."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if eps == 1.0:
        return 1.0
    le = math.log(eps)
    # t = log ell solves t + log(1 - t) = log eps, with t <= log eps
    g = lambda t: t + math.log1p(-t) - le
    lo = le - math.log1p(-le) - 1.0
    t = brentq(g, lo, le, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(t)


def audit_ell(eps_grid: Sequence[float] = (1e-6, 1e-9, 1e-12), n_mono: int = 1000) -> AuditReport:
    """ell(1) = 1, log ell / log eps decreasing toward 1, strict monotonicity on a grid."""
    ratios = [math.log(ell_of_eps(e)) / math.log(e) for e in eps_grid]
    grid = np.linspace(1e-6, 1.0, n_mono)
    ells = np.array([ell_of_eps(e) for e in grid])
    margins = [1.0 if ell_of_eps(1.0) == 1.0 else -1.0]
    margins += [r - 1.0 for r in ratios]                                  # ratio >= 1
    margins += [ratios[i] - ratios[i + 1] for i in range(len(ratios) - 1)]  # decreasing
    margins.append(float(np.min(np.diff(ells))))                           # increasing
    rows = [{"eps": e, "ell": ell_of_eps(e), "ratio": r} for e, r in zip(eps_grid, ratios)]
    return AuditReport.from_margins("ell_of_eps", {"eps_grid": list(eps_grid)}, margins, rows)


# ---------------------------------------------------------------------------
# cutoff decay
# ---------------------------------------------------------------------------

def smooth_cutoff(t):
    """chi = 1 on [0, 1/2], 0 on [1, inf), smooth in between."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out[t <= 0.5] = 1.0
    mid = (t > 0.5) & (t < 1.0)
    s = (t[mid] - 0.5) / 0.5
    a = np.exp(-1.0 / (1.0 - s))
    b = np.exp(-1.0 / s)
    out[mid] = a / (a + b)
    return out


def cutoff_norm(gamma: float, alpha: float, k: int, eps: float,
                chi: Callable = smooth_cutoff, support: float = 1.0) -> float:
    """|| chi(x/eps) x^alpha log^k x ||_{L^2_gamma(D)} for eps * support <= 1.

    With x = eps t: pi eps^(2 alpha + gamma + 1) int_0^support chi(t)^2 t^p (log eps + log t)^(2k) dt.
    """
    p = 2 * alpha + gamma
    hi = min(support, 1.0 / eps)
    rule = radial_rule(0.0, hi, 24, breaks=[0.5, 1.0])
    t = rule.x
    F = chi(t) ** 2 * t ** p * (math.log(eps) + np.log(t)) ** (2 * k)
    val = 2.0 * np.sum(rule.weights * F)
    return float(math.sqrt(max(math.pi * eps ** (p + 1) * val, 0.0)))


def audit_cutoff_decay(gamma: float, alpha: float, k: int = 0, chi: Callable = smooth_cutoff,
                       eps_grid: Sequence[float] = tuple(10.0 ** -np.arange(4, 13)),
                       tol: float = 0.05) -> AuditReport:
    """Fit log ||chi(x/eps) g|| - k log|log eps| against log eps; compare with alpha + (gamma+1)/2."""
    if not 2 * alpha + gamma > -1:
        raise ValueError("need 2 alpha + gamma > -1")
    if len(eps_grid) < 3:
        raise ValueError("eps grid too short for a meaningful fit")
    le = np.log(np.asarray(eps_grid, dtype=float))
    norms = np.array([cutoff_norm(gamma, alpha, k, e, chi) for e in eps_grid])
    if np.all(norms == 0.0):
        return AuditReport.from_margins("cutoff_decay", {"gamma": gamma, "alpha": alpha, "k": k},
                                        [tol], [{"eps": float(e), "norm": 0.0} for e in eps_grid])
    y = np.log(norms) - k * np.log(np.abs(le))
    slope = float(np.polyfit(le, y, 1)[0])
    target = alpha + (gamma + 1) / 2
    rows = [{"eps": float(e), "norm": float(n)} for e, n in zip(eps_grid, norms)]
    rows.append({"slope": slope, "target": target})
    return AuditReport.from_margins("cutoff_decay", {"gamma": gamma, "alpha": alpha, "k": k,
                                                     "tol": tol, "slope": slope, "target": target},
                                    [tol - abs(slope - target)], rows)


# ---------------------------------------------------------------------------
# C_{m;s,gamma} table
# ---------------------------------------------------------------------------

def bracket_m(m):
    return np.sqrt(1.0 + np.asarray(m, dtype=float) ** 2)


def cm_value(m: int, s: float, gamma: float, L: int = 20000):
    """C_{m;s,gamma} by direct summation over ell < L plus a power-law tail estimate.

    Returns (value, tail) with tail the estimated contribution of ell >= L.
    """
    m = abs(m)
    ell = np.arange(L, dtype=float)

    def term(l):
        return np.exp((1 - 2 * s) * np.log(m + 2 * l + 1 + gamma)
                      + gammaln(m + l + gamma + 1) - gammaln(m + l + 1)
                      + gammaln(l + gamma + 1) - gammaln(l + 1))

    t = term(ell)
    # local exponent near ell = L and the integral tail of the matching power law
    l1, l2 = L - 1.0, 0.5 * L
    p = math.log(term(l1) / term(l2)) / math.log(l1 / l2)
    if p >= -1:
        raise ArithmeticError("tail bound failure: summand does not decay fast enough")
    tail = float(term(float(L)) * (L - 0.5) / (-p - 1))
    pref = bracket_m(m) ** (2 * s - 2 * gamma - 2) / (math.pi * math.exp(2 * gammaln(gamma + 1)))
    return float(pref * (np.sum(t) + tail)), float(pref * tail)


def cm_prime(m: int, s: float, gamma: float) -> float:
    """<m>^(-2s+2gamma) sum_{n-2k=m, n<=3|m|} (n+1+gamma)^(2s) ||G_{n,k}||^2."""
    am = abs(m)
    tot = 0.0
    for l in range(am + 1):
        n = am + 2 * l
        k = l if m >= 0 else am + l
        tot += (n + 1 + gamma) ** (2 * s) * zernike_norm_sq(gamma, ZernikeIndex(n, k))
    return float(bracket_m(m) ** (-2 * s + 2 * gamma) * tot)


def audit_cm_table(s: float = 2.0, gamma: float = 0.0, m_max: int = 2000, burn_in: int = 50,
                   factor: float = 1.5, L: int = 20000) -> AuditReport:
    """Plateau audit: every C_m (m <= m_max) lies within [min/factor, factor*max] of the burn-in prefix."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("cm_table needs gamma in [0, 1)")
    if not s > 1 + gamma:
        raise ValueError("cm_table needs s > 1 + gamma")
    vals = np.empty(m_max + 1)
    tails = np.empty(m_max + 1)
    primes = np.empty(m_max + 1)
    for m in range(m_max + 1):
        vals[m], tails[m] = cm_value(m, s, gamma, L)
        primes[m] = cm_prime(m, s, gamma)
    b = min(burn_in, m_max + 1)
    lo, hi = vals[:b].min(), vals[:b].max()
    plo, phi_ = primes[:b].min(), primes[:b].max()
    margins = np.minimum(factor * hi - vals, vals - lo / factor) / hi
    margins = np.concatenate([margins, (factor * phi_ - primes) / phi_])
    rows = [{"m": m, "C_m": float(vals[m]), "tail": float(tails[m]), "C_prime_m": float(primes[m])}
            for m in range(m_max + 1)]
    return AuditReport.from_margins("cm_table", {"s": s, "gamma": gamma, "m_max": m_max,
                                                 "burn_in": b, "factor": factor}, margins, rows)


def cm_table(s: float, gamma: float, m_max: int) -> AuditReport:
    return audit_cm_table(s, gamma, m_max)


# ---------------------------------------------------------------------------
# density / divergence dichotomy
# ---------------------------------------------------------------------------

def density_terms(gamma: float, m: int, power: int, K: int) -> np.ndarray:
    """a_{k'} = (n'+1+gamma)^power ||G_{n',k'}||^2, n' = 2k'+|m|, k' = 0..K."""
    kp = np.arange(K + 1, dtype=float)
    am = abs(m)
    n = 2 * kp + am
    k = kp
    lg = (gammaln(n - k + 1) + 2 * gammaln(gamma + 1) + gammaln(k + 1)
          - gammaln(k + gamma + 1) - gammaln(n - k + gamma + 1))
    return (n + 1 + gamma) ** power * math.pi / (n + gamma + 1) * np.exp(lg)


DIVERGENCE_SLACK = 0.05


def flattening_sequence(a: Sequence[float], j: int):
    """c_k = 1 / (s_j a_k) for k < j (else 0), s_j = sum_{k<j} 1/a_k, in exact rational arithmetic.

    Returns (c, s_j) with sum c = 1 and sum a |c|^2 = 1 / s_j exactly.
    """
    af = [Fraction(float(v)) for v in a[:j]]
    sj = sum(1 / v for v in af)
    return [1 / (sj * v) for v in af], sj


def density_divergence(gamma: float, m: int = 0, power: int = 2, K: int = 2 ** 20,
                       j_range=(10, 20), flatten_j: int = 64) -> AuditReport:
    """Classify S_K = sum_{k'<=K} 1/a_{k'} as divergent-like or convergent-like.

    The dyadic increments S_{2^(j+1)} - S_{2^j} of a series with terms ~ k^-p behave like
    2^{j(1-p)}; a least-squares fit over j in j_range gives p_hat, and the series is
    classified divergent iff p_hat <= 1 + DIVERGENCE_SLACK.
    """
    if gamma < 0:
        raise ValueError("density_divergence needs gamma >= 0")
    if power not in (2, 4):
        raise ValueError("power must be 2 or 4")
    j0, j1 = j_range
    K = max(K, 2 ** (j1 + 1))
    inv = 1.0 / density_terms(gamma, m, power, K)
    S = np.cumsum(inv)
    js = np.arange(j0, j1 + 1)
    incr = np.array([np.sum(inv[2 ** j + 1: 2 ** (j + 1) + 1]) for j in js])
    slope = float(np.polyfit(js * math.log(2.0), np.log(incr), 1)[0])
    p_hat = 1.0 - slope
    divergent = p_hat <= 1.0 + DIVERGENCE_SLACK
    cauchy_tail = float(S[-1] - S[K // 2])
    c, sj = flattening_sequence(1.0 / inv, flatten_j)
    af = [Fraction(float(v)) for v in (1.0 / inv)[:flatten_j]]
    sum_c = sum(c)
    energy = sum(a_ * ci * ci for a_, ci in zip(af, c))
    exact = (sum_c == 1) and (energy == 1 / sj)
    rows = [{"j": int(j), "S": float(S[2 ** j]), "increment": float(i)} for j, i in zip(js, incr)]
    params = {"gamma": gamma, "m": m, "power": power, "K": K, "p_hat": p_hat,
              "divergent": bool(divergent), "cauchy_tail": cauchy_tail,
              "flattening_exact": bool(exact), "flattening_energy": float(energy)}
    # margin: distance of the classification from the threshold, signed by the expectation
    expected = power == 2 or gamma >= 1
    margin = (1.0 + DIVERGENCE_SLACK - p_hat) if expected else (p_hat - 1.0 - DIVERGENCE_SLACK)
    margins = [margin, 1.0 if exact else -1.0]
    return AuditReport.from_margins("density_divergence", params, margins, rows)


# ---------------------------------------------------------------------------
# coercivity at gamma = 0
# ---------------------------------------------------------------------------

def coercivity_constant(c0: float) -> float:
    return 0.25 * math.log1p(math.exp(c0))


def coercivity_gamma0(c0: float = 4.0, sample_count: int = 500, truncation: int = 32,
                      seed: int = 0, modes: Sequence[int] = (-3, -2, -1, 0, 1, 2, 3),
                      slack: float = 1e-9) -> AuditReport:
    """margin = (f, f)_{H^1} - (1 - 1/c) ||f||^2 over random elements s + h log x."""
    if c0 <= math.log(math.e ** 4 - 1.0):
        raise ValueError("coercivity audit requires c0 > log(e^4 - 1)")
    c = coercivity_constant(c0)
    rng = np.random.default_rng(seed)
    phi = PhiGamma.build(0.0, c0)
    b = default_b(phi)
    by_mode: Dict[int, List[ConormalElement]] = {}
    for _ in range(sample_count):
        m = int(rng.choice(modes))
        deg = max((truncation - abs(m)) // 2, 0)
        sm = rng.uniform(-1.0, 1.0, deg + 1)
        sg = rng.uniform(-1.0, 1.0, deg + 1)
        by_mode.setdefault(m, []).append(ConormalElement.from_coeffs(0.0, m, sm, sg, c0))
    margins, rows = [], []
    for m in sorted(by_mode):
        els = by_mode[m]
        G = h1_gram(0.0, b, els, c0=c0)
        for i, e in enumerate(els):
            nrm2 = l2_norm(0.0, e) ** 2
            mg = G[i, i].real - (1.0 - 1.0 / c) * nrm2
            margins.append(mg / max(nrm2, 1e-300))
            rows.append({"m": m, "form": float(G[i, i].real), "l2sq": float(nrm2), "margin": float(mg)})
    return AuditReport.from_margins("coercivity_gamma0", {"c0": c0, "c": c, "samples": sample_count,
                                                          "truncation": truncation, "seed": seed},
                                    margins, rows, slack)


AUDITS = {
    "trace_1d": lambda cfg: audit_trace_1d(cfg.get("gamma_1d", -0.5), samples=cfg.get("samples", 1000),
                                           seed=cfg.get("seed", 0)),
    "trace_log": lambda cfg: audit_trace_log(samples=cfg.get("samples", 1000), seed=cfg.get("seed", 0)),
    "ell_of_eps": lambda cfg: audit_ell(),
    "cutoff_decay": lambda cfg: audit_cutoff_decay(0.0, 1.0),
    "cm_table": lambda cfg: audit_cm_table(2.0, cfg.get("gamma_cm", 0.5), cfg.get("m_max", 2000)),
    "density_divergence": lambda cfg: density_divergence(cfg.get("gamma_density", 0.0), 0, 2),
    "coercivity_gamma0": lambda cfg: coercivity_gamma0(cfg.get("c0", 4.0), cfg.get("coercivity_samples", 500),
                                                       seed=cfg.get("seed", 0)),
}
