import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from keldysh_disk.basis import (
    PhiGamma, RadialProfile, WeightKind, ZernikeIndex, quad_rule, radial_rule,
    zernike_norm_sq, zernike_profile,
)
from keldysh_disk.operator import (
    ConormalElement, MalformedElementError, ModeMismatchError, PhiElement, alpha_form, apply_L,
    default_b, green_residual_preR, h1_form, h1_gram, inner_product, lagrange_scale,
    multiply_weight, wronskian_at_x, wronskian_bracket,
)
from keldysh_disk.spaces import l2_pairing, trace_dirichlet, trace_neumann

GAMMAS = [-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75]


def fd_L(gamma, elem, rho, h=1e-5):
    """L_gamma elem at rho by central differences of the rho-derivative."""
    def d(r):
        return elem.evaluate(np.array([1 - r * r]))[1][0]

    def v(r):
        return elem.evaluate(np.array([1 - r * r]))[0][0]
    x = 1 - rho * rho
    d2 = (d(rho + h) - d(rho - h)) / (2 * h)
    return (-x * d2 - (1 / rho - (3 + 2 * gamma) * rho) * d(rho)
            + (elem.m ** 2 / rho ** 2 + (gamma + 1) ** 2) * v(rho))


def random_element(rng, gamma, m, deg=3):
    return ConormalElement.from_coeffs(gamma, m, rng.uniform(-1, 1, deg), rng.uniform(-1, 1, deg))


# --- exact operator algebra ------------------------------------------------

@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.3, 0.9])
def test_monomial_alpha_equal_n(gamma):
    f = ConormalElement.from_coeffs(gamma, 2, [1.0])
    Lf = apply_L(gamma, f)
    assert Lf.smooth.coeffs == pytest.approx([(3 + gamma) ** 2])
    assert Lf.singular.is_zero()


def test_indicial_power_fd():
    # x^{1/4} is not conormal: check the x-form rule pointwise by finite differences
    gamma, s = 0.5, 0.25

    class Power:
        m = 0

        def evaluate(self, x):
            rho = np.sqrt(1 - x)
            return x ** s, -2 * rho * s * x ** (s - 1)
    for rho in [0.2, 0.5, 0.8]:
        x = 1 - rho ** 2
        exact = (2 * s + gamma + 1) ** 2 * x ** s - 4 * s * (gamma + s) * x ** (s - 1)
        assert fd_L(gamma, Power(), rho) == pytest.approx(exact, rel=1e-6)


def test_zernike_eigen_relation():
    gamma = 0.3
    p = zernike_profile(gamma, ZernikeIndex(3, 1))
    f = ConormalElement(gamma, p.m, p, RadialProfile.zero(p.m))
    Lf = apply_L(gamma, f)
    assert np.allclose(Lf.smooth.coeffs, 4.3 ** 2 * p.coeffs, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("gamma", GAMMAS)
def test_apply_L_matches_finite_differences(gamma):
    rng = np.random.default_rng(7)
    for m in [0, 1, -3]:
        f = random_element(rng, gamma, m)
        Lf = apply_L(gamma, f)
        for rho in [0.3, 0.6, 0.85]:
            x = np.array([1 - rho ** 2])
            exact = Lf.evaluate(x)[0][0]
            assert fd_L(gamma, f, rho) == pytest.approx(exact, rel=1e-5, abs=1e-5)


def test_log_rule_fd():
    h = ConormalElement.from_coeffs(0.0, 1, [0.0], [0.7, -0.2, 1.1])
    Lh = apply_L(0.0, h)
    for rho in [0.4, 0.7]:
        assert fd_L(0.0, h, rho) == pytest.approx(Lh.evaluate(np.array([1 - rho ** 2]))[0][0], rel=1e-6)


@pytest.mark.parametrize("gamma", [-0.75, -0.5, -0.25, 0.25, 0.5, 0.75])
def test_intertwining_200_random(gamma):
    rng = np.random.default_rng(2024)
    for _ in range(200):
        m = int(rng.integers(-6, 7))
        f = ConormalElement.from_coeffs(-gamma, m, rng.uniform(-1, 1, int(rng.integers(1, 7))))
        lhs = apply_L(gamma, multiply_weight(gamma, f))
        rhs = multiply_weight(gamma, apply_L(-gamma, f))
        assert lhs.smooth.is_zero()
        assert np.array_equal(lhs.singular.coeffs, rhs.singular.coeffs)


@settings(max_examples=60, deadline=None)
@given(gamma=st.sampled_from(GAMMAS), m=st.integers(-5, 5),
       a=st.lists(st.floats(-2, 2), min_size=1, max_size=5),
       b=st.lists(st.floats(-2, 2), min_size=1, max_size=5), t=st.floats(-3, 3))
def test_apply_L_linear(gamma, m, a, b, t):
    f = ConormalElement.from_coeffs(gamma, m, a, b)
    g = ConormalElement.from_coeffs(gamma, m, b, a)
    lhs = apply_L(gamma, f + g.scale(t))
    rhs = apply_L(gamma, f) + apply_L(gamma, g).scale(t)
    assert lhs.allclose(rhs, rtol=1e-12, atol=1e-9)


def test_malformed_inputs():
    with pytest.raises(MalformedElementError):
        ConormalElement.from_coeffs(0.2, 0, [1.0, float("nan")])
    with pytest.raises(ModeMismatchError):
        ConormalElement(0.2, 1, RadialProfile(2, [1.0]), RadialProfile(1, [0.0]))
    with pytest.raises(ModeMismatchError):
        ConormalElement.from_coeffs(0.2, 1, [1.0]) + ConormalElement.from_coeffs(0.2, 2, [1.0])
    with pytest.raises(Exception):
        ConormalElement.from_coeffs(1.2, 0, [1.0])


# --- forms -----------------------------------------------------------------

def test_alpha_form_examples():
    one = ConormalElement.from_coeffs(0.0, 0, [1.0])
    assert alpha_form(0.0, one, one).real == pytest.approx(math.pi, rel=1e-13)
    rho = ConormalElement.from_coeffs(0.0, 1, [1.0])
    assert alpha_form(0.0, rho, rho).real == pytest.approx(2 * math.pi, rel=1e-12)
    assert inner_product(0.0, apply_L(0.0, rho), rho).real == pytest.approx(2 * math.pi, rel=1e-12)


def test_alpha_form_singular_negative_gamma():
    f = ConormalElement.from_coeffs(-0.5, 0, [0.0], [1.0])
    a = alpha_form(-0.5, f, f, radial_rule(0, 1, 16)).real
    b = alpha_form(-0.5, f, f, radial_rule(0, 1, 32, panels=16)).real
    assert np.isfinite(a) and a == pytest.approx(b, rel=1e-10)
    # closed form: f' = -rho x^{-1/2}, so alpha = 2 pi (int (1-x) x^{-1/2} dx/2 + (1/4) int x^{1/2} dx/2)
    assert a == pytest.approx(2 * math.pi * (2 / 3 + 1 / 12), rel=1e-10)


def test_alpha_form_rejects_singular_for_nonnegative_gamma():
    f = ConormalElement.from_coeffs(0.5, 0, [0.0], [1.0])
    with pytest.raises(ValueError):
        alpha_form(0.5, f, f)


def test_h1_form_reduces_to_alpha_form_negative_gamma():
    rng = np.random.default_rng(1)
    phi = PhiGamma.build(-0.5)
    for m in [0, 2]:
        f, g = random_element(rng, -0.5, m), random_element(rng, -0.5, m)
        t = h1_form(-0.5, default_b(phi), f, g).value
        a = alpha_form(-0.5, f, g)
        assert t == pytest.approx(a, rel=1e-10)


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5, 0.75])
def test_h1_form_b_independent(gamma):
    phi = PhiGamma.build(gamma)
    rng = np.random.default_rng(3)
    if gamma == 0.5:
        f = ConormalElement.from_coeffs(0.5, 0, [0.0], [1.0])
        elems = [(f, f)]
    else:
        elems = [(random_element(rng, gamma, m), random_element(rng, gamma, m)) for m in (0, 1, 4)]
    for f, g in elems:
        v1 = h1_form(gamma, default_b(phi), f, g).value
        v2 = h1_form(gamma, 0.99, f, g).value
        assert np.isfinite(v1)
        assert abs(v1 - v2) < 1e-8 * max(1.0, abs(v1))


def test_h1_form_rejects_bad_b():
    phi = PhiGamma.build(0.0)
    f = ConormalElement.from_coeffs(0.0, 0, [1.0])
    with pytest.raises(ValueError):
        h1_form(0.0, 0.5 * phi.b_gamma, f, f)
    with pytest.raises(ValueError):
        h1_form(0.0, 1.0, f, f)


@pytest.mark.parametrize("gamma", [0.0, 0.25, 0.6])
def test_h1_form_on_eigenfunctions(gamma):
    phi = PhiGamma.build(gamma)
    for idx in [ZernikeIndex(0, 0), ZernikeIndex(3, 1), ZernikeIndex(4, 4)]:
        p = zernike_profile(gamma, idx)
        f = ConormalElement(gamma, idx.m, p, RadialProfile.zero(idx.m))
        t = h1_form(gamma, default_b(phi), f, f).value.real
        ev = (idx.n + 1 + gamma) ** 2 * zernike_norm_sq(gamma, idx)
        # Green: t = <Lf, f> - <tau^N f, tau^D f>, and tau^D f = 0 for smooth f when gamma >= 0
        assert t == pytest.approx(ev, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(gamma=st.sampled_from(GAMMAS), m=st.integers(-4, 4), seed=st.integers(0, 10 ** 6))
def test_h1_form_hermitian(gamma, m, seed):
    rng = np.random.default_rng(seed)
    f = ConormalElement.from_coeffs(gamma, m, rng.uniform(-1, 1, 3) + 1j * rng.uniform(-1, 1, 3),
                                    rng.uniform(-1, 1, 2))
    g = random_element(rng, gamma, m)
    b = default_b(PhiGamma.build(gamma))
    assert abs(h1_form(gamma, b, f, g).value - np.conj(h1_form(gamma, b, g, f).value)) < 1e-10 * (
        1 + abs(h1_form(gamma, b, f, g).value))


@pytest.mark.parametrize("gamma", [-0.9, -0.5, -0.1, 0.0, 0.1, 0.5, 0.9])
def test_gram_positive_definite(gamma):
    rng = np.random.default_rng(11)
    phi = PhiGamma.build(gamma)
    # 30 random elements spread over 6 modes; the Gram matrix is block diagonal
    for m in range(-2, 4):
        elems = [random_element(rng, gamma, m) for _ in range(5)]
        G = h1_gram(gamma, default_b(phi), elems)
        assert np.allclose(G, G.conj().T, atol=1e-9 * np.max(np.abs(G)))
        assert np.min(np.linalg.eigvalsh(0.5 * (G + G.conj().T))) > 0


# --- brackets and Green identities -----------------------------------------

def test_wronskian_examples():
    f = ConormalElement.from_coeffs(0.5, 1, [1.0, 2.0], [0.3])
    assert wronskian_bracket(0.5, f, f, 0.7) == 0
    phi = PhiElement(PhiGamma.build(0.5))
    one = ConormalElement.from_coeffs(0.5, 0, [1.0])
    assert wronskian_at_x(0.5, one, phi, 1e-10).real == pytest.approx(1.0, abs=1e-6)
    assert trace_neumann(one).get(0) == pytest.approx(1.0)
    g = ConormalElement.from_coeffs(-0.5, 0, [0.0], [1.0])     # x^{1/2}
    one_n = ConormalElement.from_coeffs(-0.5, 0, [1.0])
    assert wronskian_at_x(-0.5, g, one_n, 1e-12).real == pytest.approx(1.0, abs=1e-6)
    assert trace_neumann(g).get(0) == pytest.approx(1.0)
    with pytest.raises(ModeMismatchError):
        wronskian_bracket(0.5, f, one, 0.5)
    with pytest.raises(ValueError):
        wronskian_bracket(0.5, f, f, 1.0)


def test_wronskian_limit_is_trace_pairing():
    # W(f, g) -> tau^N f tau^D g - tau^D f tau^N g  as x -> 0 (W(1, phi) = 2 gamma above)
    rng = np.random.default_rng(5)
    for gamma in [-0.5, 0.0, 0.5]:
        f, g = random_element(rng, gamma, 1), random_element(rng, gamma, 1)
        lim = (trace_neumann(f).get(1) * trace_dirichlet(g).get(1)
               - trace_dirichlet(f).get(1) * trace_neumann(g).get(1))
        tol = 1e-3 if gamma == 0 else 1e-5
        assert wronskian_at_x(gamma, f, g, 1e-12) == pytest.approx(lim, abs=tol * (1 + abs(lim)))


def test_pre_green_examples():
    f = ConormalElement.from_coeffs(0.0, 0, [0.0, 1.0])
    zero = ConormalElement.from_coeffs(0.0, 0, [0.0])
    assert green_residual_preR(0.0, f, zero, 0.9) == 0.0
    assert green_residual_preR(0.0, f, f, 0.9) < 1e-10
    f = ConormalElement.from_coeffs(0.3, 0, [0.0], [1.0])
    one = ConormalElement.from_coeffs(0.3, 0, [1.0])
    assert green_residual_preR(0.3, f, one, 0.99) < 1e-8
    r2 = green_residual_preR(0.3, f, one, 0.99, rule=radial_rule(1 - 0.99 ** 2, 1.0, 40))
    assert r2 < 1e-8


@pytest.mark.parametrize("gamma", GAMMAS)
@pytest.mark.parametrize("R", [0.9, 0.99])
def test_pre_green_random(gamma, R):
    rng = np.random.default_rng(17)
    for _ in range(10):
        m = int(rng.integers(-3, 4))
        f, g = random_element(rng, gamma, m), random_element(rng, gamma, m)
        scale = lagrange_scale(gamma, f) * lagrange_scale(gamma, g)
        assert green_residual_preR(gamma, f, g, R, which="G1") < 1e-8 * scale
        assert green_residual_preR(gamma, f, g, R, which="G2") < 1e-8 * scale


@pytest.mark.parametrize("gamma", [-0.5, 0.0, 0.5])
def test_green_identities_on_conormal(gamma):
    rng = np.random.default_rng(99)
    b = default_b(PhiGamma.build(gamma))
    for _ in range(100):
        m = int(rng.integers(-3, 4))
        f, g = random_element(rng, gamma, m), random_element(rng, gamma, m)
        scale = lagrange_scale(gamma, f) * lagrange_scale(gamma, g)
        Lfg = inner_product(gamma, apply_L(gamma, f), g)
        t = h1_form(gamma, b, f, g).value
        r1 = abs(Lfg - t - l2_pairing(trace_neumann(f), trace_dirichlet(g)))
        assert r1 < 1e-8 * scale
        skew = Lfg - inner_product(gamma, f, apply_L(gamma, g))
        bd = (l2_pairing(trace_neumann(f), trace_dirichlet(g))
              - l2_pairing(trace_dirichlet(f), trace_neumann(g)))
        assert abs(skew - bd) < 1e-8 * scale


def test_leading_coefficient_convention():
    # first-order coefficient (3 + 2 gamma) rho: rho^2 on mode 0 maps to (3+gamma)^2 rho^2 - 4
    for gamma in [-0.5, 0.0, 0.5]:
        f = ConormalElement.from_coeffs(gamma, 0, [0.0, 1.0])
        Lf = apply_L(gamma, f)
        assert Lf.smooth.coeffs == pytest.approx([-4.0, (3 + gamma) ** 2])
        # cross-check in x: rho^2 = 1 - x, L(x) = (3+gamma)^2 x - 4(1+gamma) on mode 0
        x = np.array([1e-3, 0.3, 0.8])
        via_x = (gamma + 1) ** 2 - ((3 + gamma) ** 2 * x - 4 * (1 + gamma))
        assert Lf.evaluate(x)[0] == pytest.approx(via_x, rel=1e-14)
