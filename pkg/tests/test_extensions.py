import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from keldysh_disk.basis import RegimeError, ZernikeIndex
from keldysh_disk.extensions import (
    FourierMultiplier, IotaMultiplier, KernelElement, KreinCollisionError, MaxElement,
    SpectralCollisionError, boundary_triple_maps, check_resolvent_set, decompose_max,
    dirichlet_eigenvalue, dirichlet_resolvent, dn_map_mode, dn_map_mode_ode,
    extended_dirichlet_trace, frobenius_series, iota_gamma, krein_pairing, krein_resolvent,
    max_inner, poisson_lift, regular_series, robin_denominator, robin_eigenvalue_scan,
    weyl_function,
)
from keldysh_disk.operator import ConormalElement
from keldysh_disk.spaces import (
    BoundaryFunction, SpectralElement, SpectralVector, boundary_norm, l2_pairing,
    minimal_domain_vector, neumann_constant, spectral_norm, trace_dirichlet, trace_neumann,
)

mpmath = pytest.importorskip("mpmath")


def dn_hypergeometric(gamma, lam, m, c0=4.0):
    """mu_m(lambda) from the hypergeometric form of the regular solution.

    u = rho^|m| 2F1(a, b; |m|+1; rho^2), a, b = (|m|+gamma+1 -/+ sqrt(lambda))/2; the connection
    formula at rho = 1 separates the x^0 and x^-gamma boundary terms.  At gamma = 0 the two
    log-pair coefficients are read off at tiny x in high precision.
    """
    mp = mpmath.mp
    with mpmath.workdps(90):
        g = mp.mpf(gamma)
        s = mp.sqrt(mp.mpc(lam))
        a, b, c = (abs(m) + g + 1 - s) / 2, (abs(m) + g + 1 + s) / 2, abs(m) + 1
        if gamma != 0:
            smooth = mp.gamma(-g) / (mp.gamma(c - a) * mp.gamma(c - b))
            sing = mp.gamma(g) / (mp.gamma(a) * mp.gamma(b))
            return complex(2 * g * smooth / sing) if gamma > 0 else complex(-2 * g * sing / smooth)
        x1, x2 = mp.mpf("1e-30"), mp.mpf("1e-32")
        u1, u2 = mp.hyp2f1(a, b, c, 1 - x1), mp.hyp2f1(a, b, c, 1 - x2)
        h0 = (u1 - u2) / (mp.log(x1) - mp.log(x2))
        s0 = u1 - h0 * mp.log(x1)
        return complex((-2 * s0 - 2 * c0 * h0) / h0)


# frozen reference values (hypergeometric oracle, 90 digits)
FROZEN_DN = [
    (0.5, 0.0, 0, -0.2284732905222318),
    (0.5, -1.0, 3, -3.1932804636594057),
    (0.25, 1 + 1j, 3, -0.8135340322120156 + 0.02269146997258818j),
    (0.0, 0.0, 0, -2.4548225555204377),
    (0.0, 0.0, 3, -12.0),
    (0.0, 1 + 1j, 16, -18.621443751840115 + 0.007812460868050204j),
]


# --- Dirichlet resolvent ---------------------------------------------------

def test_resolvent_examples():
    r = dirichlet_resolvent(0.0, 0.0, SpectralVector.unit(0.0, ZernikeIndex(0, 0)))
    assert r.entries[ZernikeIndex(0, 0)] == pytest.approx(1.0)
    r = dirichlet_resolvent(0.5, 0.0, SpectralVector.unit(0.5, ZernikeIndex(2, 1)))
    assert r.entries[ZernikeIndex(2, 1)] == pytest.approx(1 / 12.25, rel=1e-15)


def test_resolvent_composition_100_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        g = float(rng.choice([-0.5, 0.0, 0.5]))
        lam = complex(rng.uniform(-5, 5), rng.uniform(-2, 2))
        u = SpectralVector.random(g, 12, rng)
        back = dirichlet_resolvent(g, lam, u).apply_L() - dirichlet_resolvent(g, lam, u).scale(lam)
        assert back.max_abs_diff(u) < 1e-12


def test_resolvent_collision():
    with pytest.raises(SpectralCollisionError):
        dirichlet_resolvent(0.5, 12.25, SpectralVector.unit(0.5, ZernikeIndex(2, 1)))
    check_resolvent_set(0.5, 12.25 + 1e-6, 10)
    # on a single mode only the matching parity collides
    check_resolvent_set(0.5, 2.25, 10, m=1)


# --- series and kernel elements --------------------------------------------

def test_regular_series_is_hypergeometric():
    g, lam, m = 0.3, 2.0 + 0.5j, 2
    b = regular_series(g, lam, m)
    s = np.sqrt(lam)
    aa, bb = (abs(m) + g + 1 - s) / 2, (abs(m) + g + 1 + s) / 2
    z = 0.4
    val = np.sum(b * z ** np.arange(len(b)))
    assert val == pytest.approx(complex(mpmath.hyp2f1(aa, bb, abs(m) + 1, z)), rel=1e-13)


def test_frobenius_series_exponents():
    a = frobenius_series(0.5, 0.0, 1, -0.5)
    # a_1 = ((2e + c)^2 - lambda) / (4 (e+1)(e+1+gamma)) with c = |m|+gamma+1
    c = 1 + 0.5 + 1
    assert a[1] == pytest.approx(((2 * -0.5 + c) ** 2) / (4 * 0.5 * 1.0))


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
@pytest.mark.parametrize("m", [0, 2, 7])
def test_kernel_element_solves_equation(gamma, m):
    lam = 1.5 + 0.5j
    p = KernelElement(gamma, lam, m)
    # series certificate
    xs = np.linspace(0.02, 0.98, 25)
    assert np.max(np.abs(p.residual(xs))) < 1e-12
    # independent finite-difference check of (L - lambda) p = 0
    for rho in [0.2, 0.5, 0.7, 0.9]:
        h = 1e-5

        def d(r):
            return p.evaluate(np.array([1 - r * r]))[1][0]
        x = 1 - rho * rho
        val = p.evaluate(np.array([x]))[0][0]
        Lp = (-x * (d(rho + h) - d(rho - h)) / (2 * h) - (1 / rho - (3 + 2 * gamma) * rho) * d(rho)
              + (m * m / rho ** 2 + (gamma + 1) ** 2 - lam) * val)
        assert abs(Lp) < 1e-5 * (1 + abs(val) + abs(d(rho)))
    assert trace_dirichlet(p).get(m) == pytest.approx(1.0)
    assert trace_neumann(p).get(m) == pytest.approx(p.mu)


def test_kernel_element_continuous_across_match_point():
    for gamma in [-0.5, 0.0, 0.5]:
        p = KernelElement(gamma, 0.0, 30)
        xm = p.data.xm
        lo = p.evaluate(np.array([xm * (1 - 1e-12)]))
        hi = p.evaluate(np.array([xm]))
        assert lo[0][0] == pytest.approx(hi[0][0], rel=1e-9)
        assert lo[1][0] == pytest.approx(hi[1][0], rel=1e-9)


# --- DN map ----------------------------------------------------------------

@pytest.mark.parametrize("gamma,lam,m,ref", FROZEN_DN)
def test_dn_frozen_values(gamma, lam, m, ref):
    assert dn_map_mode_ode(gamma, lam, m) == pytest.approx(ref, rel=1e-12, abs=1e-13)
    assert dn_map_mode(gamma, lam, m).mu == pytest.approx(ref, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(gamma=st.sampled_from([-0.75, -0.25, 0.0, 0.25, 0.6]), m=st.integers(-12, 12),
       re=st.floats(-8, 0.5), im=st.floats(-3, 3))
def test_dn_ode_matches_hypergeometric(gamma, m, re, im):
    lam = complex(re, im)
    assert dn_map_mode_ode(gamma, lam, m) == pytest.approx(dn_hypergeometric(gamma, lam, m), rel=1e-10, abs=1e-10)


def test_dn_examples():
    assert dn_map_mode(0.5, 0.0, 0, f=0).mu == 0
    r = dn_map_mode(0.5, 0.0, 0)
    assert abs(r.mu - dn_map_mode_ode(0.5, 0.0, 0)) < 1e-5
    assert r.truncation_estimate < 1e-8
    for m in [1, 4, 9]:
        assert dn_map_mode(0.5, -1.0, -m).mu == pytest.approx(dn_map_mode(0.5, -1.0, m).mu, rel=1e-10)
    # the gamma -> -gamma transport
    assert dn_map_mode_ode(-0.5, -1.0, 3) == pytest.approx(dn_map_mode_ode(0.5, -1.0, 3), rel=1e-13)


def test_dn_linear_in_data():
    a = dn_map_mode(0.25, -1.0, 2, f=3.0 - 1j).mu
    assert a == pytest.approx((3.0 - 1j) * dn_map_mode(0.25, -1.0, 2).mu, rel=1e-14)


def test_dn_pole_at_eigenvalue():
    with pytest.raises(SpectralCollisionError):
        dn_map_mode_ode(0.5, 2.25, 0)
    with pytest.raises(SpectralCollisionError):
        dn_map_mode(0.5, 2.25, 0)
    with pytest.raises(RegimeError):
        dn_map_mode_ode(1.5, 0.0, 0)


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.75])
def test_dn_spectral_route_truncation_stable(gamma):
    for m in [0, 5]:
        a = dn_map_mode(gamma, 0.0, m, N=32).mu
        b = dn_map_mode(gamma, 0.0, m, N=64).mu
        assert abs(a - b) < 1e-7 * (1 + abs(b))


# --- Weyl function, multipliers, Poisson map -------------------------------

def test_weyl_real_below_spectrum_and_conjugation():
    for gamma in [-0.5, 0.0, 0.5]:
        M = weyl_function(gamma, -3.0, 6)
        assert all(abs(M(m).imag) < 1e-14 for m in range(-6, 7))
        lam = 0.7 + 1.3j
        Mp, Mc = weyl_function(gamma, lam, 6), weyl_function(gamma, np.conj(lam), 6)
        for m in range(-6, 7):
            assert Mc(m) == pytest.approx(np.conj(Mp(m)), rel=1e-12)


def test_weyl_herglotz():
    for gamma in [-0.75, -0.25, 0.0, 0.25, 0.75]:
        for lam in [1j, 1 + 1j, -4 + 0.1j]:
            M = weyl_function(gamma, lam, 8)
            assert all(M(m).imag / lam.imag > 0 for m in range(-8, 9))


def test_weyl_routes_agree():
    a = weyl_function(0.25, -1.0, 5)
    b = weyl_function(0.25, -1.0, 5, route="spectral")
    for m in range(-5, 6):
        assert a(m) == pytest.approx(b(m), rel=1e-8)


def test_multipliers():
    B = FourierMultiplier({0: 1.0, 2: 3.0})
    assert B.selfadjoint and B(5) == 0
    assert not FourierMultiplier({1: 1j}).selfadjoint
    assert FourierMultiplier.constant(2.5)(-7) == 2.5
    f = BoundaryFunction({0: 1.0, 2: 2.0, 3: 1.0})
    assert B.apply(f).coeffs == {0: 1.0, 2: 6.0, 3: 0.0}
    iota = IotaMultiplier(0.75)
    rng = np.random.default_rng(0)
    g = BoundaryFunction({m: complex(*rng.normal(size=2)) for m in range(-5, 6)})
    assert boundary_norm(iota.apply(g), kind="Hs", s=0) == pytest.approx(boundary_norm(g, kind="Hs", s=0.75))
    assert iota.inverse(iota.apply(g)).max_abs_diff(g) < 1e-14
    assert iota_gamma(0.5, 3) == pytest.approx(10 ** 0.25)


def test_poisson_lift():
    assert poisson_lift(0.5, 0.0, BoundaryFunction()) == []
    for gamma in [-0.5, 0.0, 0.5]:
        f = BoundaryFunction({-2: 1.0, 0: 0.5j, 3: -1.0})
        P = poisson_lift(gamma, -1.0, f)
        tD, tN = trace_dirichlet(P), trace_neumann(P)
        for m in f.modes:
            w = iota_gamma(gamma, m)
            assert tD.get(m) == pytest.approx(f.get(m) / w, abs=1e-10)
            assert tN.get(m) == pytest.approx(dn_map_mode(gamma, -1.0, m).mu * f.get(m) / w, rel=1e-7)


# --- Krein resolvent -------------------------------------------------------

def _rhs(gamma, seed=3, N=24, M=6):
    return SpectralVector.random(gamma, N, np.random.default_rng(seed), modes=range(-M, M + 1), decay=1.0)


def _norm(u):
    return math.sqrt(sum(abs(v) ** 2 for v in u.entries.values()))


def test_krein_B_zero_is_dirichlet():
    rhs = _rhs(0.5)
    sol = krein_resolvent(0.5, 0.0, FourierMultiplier.constant(0.0), rhs)
    assert sol.kernel == []
    assert sol.spectral.max_abs_diff(dirichlet_resolvent(0.5, 0.0, rhs)) == 0.0


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
def test_krein_certificates(gamma, beta):
    rhs = _rhs(gamma)
    sol = krein_resolvent(gamma, 0.0, FourierMultiplier.constant(beta), rhs)
    assert sol.operator_residual < 1e-6 * _norm(rhs)
    assert sol.boundary_residual < 1e-6 * _norm(rhs)
    assert sol.pairing_crosscheck < 1e-8 * _norm(rhs)


def test_krein_boundary_condition_from_traces():
    # iota tau^D u = B iota' tau^N u, read off the traces of the assembled solution u = u_D + sum c_m p_m
    from keldysh_disk.spaces import trace_neumann_spectral
    g, beta = 0.5, 1.0
    rhs = _rhs(g)
    sol = krein_resolvent(g, 0.0, FourierMultiplier.constant(beta), rhs)
    tN_uD = trace_neumann_spectral(sol.spectral)
    assert len(sol.kernel) == len(rhs.modes)
    for p in sol.kernel:
        w = iota_gamma(g, p.m)
        tD = trace_dirichlet(p).get(p.m)            # u_D has no Dirichlet trace
        tN = tN_uD.get(p.m) + trace_neumann(p).get(p.m)
        assert w * tD == pytest.approx(beta * tN / w, rel=1e-10)


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
def test_krein_symmetry(gamma):
    B = FourierMultiplier({m: 0.5 + 0.1 * abs(m) for m in range(-4, 5)}, list(range(-4, 5)))
    u, v = _rhs(gamma, 1, 16, 4), _rhs(gamma, 2, 16, 4)
    su = krein_resolvent(gamma, -0.5, B, u)
    sv = krein_resolvent(gamma, -0.5, B, v)
    assert abs(krein_pairing(gamma, su, v) - np.conj(krein_pairing(gamma, sv, u))) < 1e-8


def test_robin_eigenvalue_scan():
    lam = robin_eigenvalue_scan(0.5, 0, 1.0, 0)
    assert 2.25 < lam < 12.25
    assert lam == pytest.approx(7.4038, abs=1e-3)
    # independent: the hypergeometric DN value makes the denominator vanish
    assert iota_gamma(0.5, 0) ** 2 - 1.0 * dn_hypergeometric(0.5, lam, 0).real == pytest.approx(0, abs=1e-9)
    assert abs(robin_denominator(0.5, lam, 0, 1.0)) < 1e-9
    rhs = SpectralVector.unit(0.5, ZernikeIndex(0, 0))
    with pytest.raises(KreinCollisionError):
        krein_resolvent(0.5, lam, FourierMultiplier.constant(1.0), rhs)


# --- maximal domain and boundary triple ------------------------------------

def _random_max(rng, gamma, N=8, modes=range(-2, 3)):
    u = SpectralVector.random(gamma, N, rng, modes=modes, decay=1.0)
    elems = [ConormalElement.from_coeffs(gamma, m, rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)) for m in modes]
    return MaxElement(u, elems)


def test_decompose_pure_spectral():
    u = SpectralVector.random(0.5, 6, np.random.default_rng(0))
    sp = decompose_max(0.5, 0.3, MaxElement(u, []))
    assert sp.f_lambda == []
    assert sp.f_D.max_abs_diff(u) == 0.0


def test_decompose_kernel_element():
    g, lam = 0.5, 0.3
    P = poisson_lift(g, lam, BoundaryFunction({1: 1.0}))
    # a kernel element written as a conormal remainder-free piece: its Dirichlet part vanishes
    p = P[0]
    sp = decompose_max(g, lam, MaxElement(SpectralVector(g, {}, 10), []))
    assert sp.f_D.entries == {}
    assert p.residual(np.linspace(0.05, 0.95, 9)).max() < 1e-12


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
def test_decompose_mixed(gamma):
    lam = 0.3
    rng = np.random.default_rng(5)
    u = SpectralVector.random(gamma, 6, rng, modes=[1], decay=1.0)
    a = ConormalElement.from_coeffs(gamma, 1, [0.3, -0.2], [1.0, 0.5])
    f = MaxElement(u, [a])
    x = np.linspace(0.05, 0.95, 7)
    errs = []
    for N in (20, 40, 80):
        sp = decompose_max(gamma, lam, f, N=N)
        uu, rest = sp.f_D_exact
        fD = SpectralElement(uu, 1).evaluate(x)[0] + sum(r.evaluate(x)[0] for r in rest)
        flam = sum(p.evaluate(x)[0] for p in sp.f_lambda)
        orig = SpectralElement(u, 1).evaluate(x)[0] + a.evaluate(x)[0]
        assert np.max(np.abs(fD + flam - orig)) < 1e-10
        assert sp.certificate < 1e-10
        assert all(trace_dirichlet(r).get(1) == pytest.approx(0, abs=1e-14) for r in rest)
        errs.append(np.max(np.abs(SpectralElement(sp.f_D, 1).evaluate(x)[0] - fD)))
    assert errs[2] < errs[0]


def test_boundary_triple_examples():
    for gamma in [-0.5, 0.0, 0.5]:
        u = minimal_domain_vector(gamma, 8, np.random.default_rng(2))
        G0, G1 = boundary_triple_maps(gamma, 0.0, MaxElement(u, []))
        assert max([abs(v) for v in G0.coeffs.values()] + [0]) == 0
        assert max(abs(v) for v in G1.coeffs.values()) < 1e-13
        idx = ZernikeIndex(5, 1)
        G = SpectralVector.unit(gamma, idx, spectral_norm(gamma, idx))    # G_{n,k} itself
        G0, G1 = boundary_triple_maps(gamma, 0.0, MaxElement(G, []))
        assert G0.get(idx.m) == 0
        assert G1.get(idx.m) == pytest.approx(neumann_constant(gamma) / iota_gamma(gamma, idx.m), rel=1e-13)


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
def test_extended_trace_pairing_matches_direct(gamma):
    rng = np.random.default_rng(9)
    f = _random_max(rng, gamma)
    direct = trace_dirichlet(f.elems)
    paired = extended_dirichlet_trace(gamma, f)
    assert paired.max_abs_diff(direct) < 1e-10


def _scale(gamma, f):
    return 1 + abs(max_inner(gamma, f, f)) ** 0.5 + abs(max_inner(gamma, f, f, True, True)) ** 0.5


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
def test_abstract_green_identity(gamma):
    rng = np.random.default_rng(13)
    for _ in range(30):
        f, g = _random_max(rng, gamma), _random_max(rng, gamma)
        lhs = max_inner(gamma, f, g, Lf=True) - max_inner(gamma, f, g, Lg=True)
        f0, f1 = boundary_triple_maps(gamma, 0.0, f)
        g0, g1 = boundary_triple_maps(gamma, 0.0, g)
        rhs = l2_pairing(f1, g0) - l2_pairing(f0, g1)
        assert abs(lhs - rhs) < 1e-7 * _scale(gamma, f) * _scale(gamma, g)


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
def test_second_green_on_w2_with_dual_pairing(gamma):
    # <tau^N f, tau^D g>_{(gamma)', (gamma)} through the iota weights, traces via the pairing route
    rng = np.random.default_rng(17)
    for _ in range(10):
        f, g = _random_max(rng, gamma), _random_max(rng, gamma)
        lhs = max_inner(gamma, f, g, Lf=True) - max_inner(gamma, f, g, Lg=True)
        tDf, tDg = extended_dirichlet_trace(gamma, f), extended_dirichlet_trace(gamma, g)
        from keldysh_disk.spaces import trace_neumann_spectral
        tNf = trace_neumann_spectral(f.u) + trace_neumann(f.elems)
        tNg = trace_neumann_spectral(g.u) + trace_neumann(g.elems)

        def dual(a, b):
            return 2 * np.pi * sum((a.get(m) / iota_gamma(gamma, m)) * np.conj(b.get(m) * iota_gamma(gamma, m))
                                   for m in set(a.modes) | set(b.modes))
        rhs = dual(tNf, tDg) - np.conj(dual(tNg, tDf))
        assert abs(lhs - rhs) < 1e-7 * _scale(gamma, f) * _scale(gamma, g)
