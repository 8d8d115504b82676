import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from pspin_landscape.errors import DomainError, ResourceError
from pspin_landscape.goe import (GoeSpec, det_second_moment_check, hermite_bundle,
                                 hermite_phi, hermite_phi_float, j_n_quadrature,
                                 log_hermite_integral, log_rho, log_rho_asymptotic,
                                 log_rho_exact, log_shifted_det_mean, mc_shifted_det,
                                 rho_exact, sample_goe_spectrum, shifted_det_mean)
from pspin_landscape.model import phi
from pspin_landscape.scaled import ScaledValue

# folded Gaussian E|mu + Z|, Z ~ N(0, 1/2); frozen from scripts/oracles.py
FOLDED_AT_0 = 0.5641895835
FOLDED_AT_1 = 1.0502545417


def folded_mean(mu, var=0.5):
    s = math.sqrt(var)
    return s * math.sqrt(2 / math.pi) * math.exp(-mu * mu / (2 * var)) + mu * (2 * stats.norm.cdf(mu / s) - 1)


# ---------------------------------------------------------------- Hermite functions

def test_hermite_examples():
    assert hermite_phi(0, 0.0).to_float() == pytest.approx(math.pi ** -0.25, abs=1e-15)
    assert hermite_phi(1, 0.0).to_float() == 0.0
    assert hermite_phi(2, 0.0).to_float() == pytest.approx(-2 / math.sqrt(8 * math.sqrt(math.pi)), abs=1e-15)
    assert hermite_phi(2, 0.0).to_float() == pytest.approx(-0.5311259, abs=1e-7)


@pytest.mark.parametrize("n", [0, 1, 3, 10, 40])
def test_hermite_matches_scipy(n):
    x = np.linspace(-6, 6, 41)
    ref = special.eval_hermite(n, x) * np.exp(-x * x / 2) / math.sqrt(2.0 ** n * math.factorial(n) * math.sqrt(math.pi))
    assert np.allclose(hermite_phi_float(n, x), ref, rtol=1e-10, atol=1e-14)


@given(st.integers(0, 2001), st.floats(-80, 80))
def test_hermite_parity(n, x):
    a, b = hermite_phi(n, x), hermite_phi(n, -x)
    assert a == (b if n % 2 == 0 else -b)


@given(st.integers(1, 2000), st.floats(-70, 70))
def test_hermite_recurrence_residual(n, x):
    b = hermite_bundle(n, x)
    rhs = (b.cur * ScaledValue.from_float(x * math.sqrt(2.0 / (n + 1)))
           + b.prev * ScaledValue.from_float(-math.sqrt(n / (n + 1.0))))
    diff = b.next + (-rhs)
    scale = max(v.log2() for v in (b.next, b.cur, b.prev) if v.sign != 0)
    if diff.sign != 0:
        assert diff.log2() <= scale + math.log2(1e-12)


def test_hermite_far_tail_stays_representable():
    v = hermite_phi(2000, 200.0)
    assert v.sign == 1
    assert v.log() < -1000
    assert hermite_phi_float(2000, 200.0) == 0.0


def test_hermite_degree_limit():
    with pytest.raises(ResourceError):
        hermite_phi(2002, 0.0)


@pytest.mark.parametrize("n", [0, 1, 5, 20, 100])
def test_hermite_orthonormality(n):
    lim = math.sqrt(2 * n + 1) + 12
    val, _ = integrate.quad(lambda t: float(hermite_phi_float(n, t)) ** 2, -lim, lim, limit=400,
                            epsabs=1e-13, epsrel=1e-12)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_hermite_cross_orthogonality():
    val, _ = integrate.quad(lambda t: float(hermite_phi_float(7, t) * hermite_phi_float(9, t)), -12, 12, limit=200)
    assert abs(val) < 1e-10


@pytest.mark.parametrize("n", [0, 2, 4, 10, 30])
def test_hermite_integral_closed_form(n):
    lim = math.sqrt(2 * n + 1) + 12
    val, _ = integrate.quad(lambda t: float(hermite_phi_float(n, t)), -lim, lim, limit=400, epsabs=1e-13)
    assert val > 0
    assert val == pytest.approx(math.exp(log_hermite_integral(n)), rel=1e-9)
    assert log_hermite_integral(n + 1) == -math.inf


# ---------------------------------------------------------------- density

def test_density_examples():
    assert rho_exact(1, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-14)
    assert rho_exact(2, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-14)


def test_single_eigenvalue_is_gaussian():
    x = np.linspace(-8, 8, 33)
    assert np.allclose(rho_exact(1, x), stats.norm.pdf(x), rtol=1e-12, atol=0)


def test_two_by_two_density():
    # GOE_2(1/2) eigenvalues have joint density |x-y| exp(-x^2-y^2) / sqrt(2 pi)
    for x in (0.0, 0.3, 1.1, 2.5):
        val, _ = integrate.quad(lambda y: abs(x - y) * math.exp(-(x * x + y * y)), -np.inf, x)
        val2, _ = integrate.quad(lambda y: abs(x - y) * math.exp(-(x * x + y * y)), x, np.inf)
        assert rho_exact(2, x) == pytest.approx((val + val2) / math.sqrt(2 * math.pi), rel=1e-10)


@pytest.mark.parametrize("N", [1, 2, 5, 10, 50, 200])
def test_density_normalization(N):
    total = math.fsum(integrate.quad(lambda t: float(rho_exact(N, t)), a, a + 0.05, epsabs=1e-14)[0]
                      for a in np.arange(-6, 6, 0.05))
    assert total == pytest.approx(1.0, abs=1e-6)


@given(st.integers(1, 400), st.floats(-5, 5))
def test_density_even_and_nonnegative(N, x):
    a, b = log_rho_exact(N, x), log_rho_exact(N, -x)
    assert a == b
    assert rho_exact(N, x) >= 0


@pytest.mark.parametrize("N,x", [(3, 0.2), (5, 0.9), (7, 1.7), (20, 0.4), (21, 1.3), (51, 2.0), (64, 0.0)])
def test_j_n_quadrature_against_direct_tail(N, x):
    s = math.sqrt(N) * x
    full = math.exp(log_hermite_integral(N)) if N % 2 == 0 else 0.0
    tail, _ = integrate.quad(lambda t: float(hermite_phi_float(N, t)), s, s + 60, limit=400, epsabs=1e-14)
    assert j_n_quadrature(N, x) == pytest.approx(0.5 * full - tail, abs=1e-10)


@pytest.mark.parametrize("N", [3, 9, 25])
def test_j_n_is_even_for_odd_n(N):
    for x in (0.1, 0.8, 1.9):
        assert j_n_quadrature(N, -x) == pytest.approx(j_n_quadrature(N, x), abs=1e-12)


@pytest.mark.parametrize("N", [2, 3, 4, 7, 10])
def test_density_agrees_with_direct_sum(N):
    # kernel sum of squared Hermite functions plus the correction term,
    # evaluated from the definition with numerical quadrature for J_N
    for x in (0.0, 0.35, 1.2, 2.1):
        s = math.sqrt(N) * x
        k = sum(float(hermite_phi_float(j, s)) ** 2 for j in range(N))
        b = math.sqrt(N / 2.0) * float(hermite_phi_float(N - 1, s)) * j_n_quadrature(N, x)
        if N % 2:
            b += float(hermite_phi_float(N - 1, s)) / math.exp(log_hermite_integral(N - 1))
        assert rho_exact(N, x) == pytest.approx((k + b) / math.sqrt(N), rel=1e-9, abs=1e-14)


def test_density_near_semicircle_at_large_n():
    # the normalized semicircle sqrt(2-x^2)/pi integrates to one
    assert rho_exact(200, 0.0) == pytest.approx(math.sqrt(2) / math.pi, rel=0.02)


def test_density_large_n_far_tail_is_finite():
    v = log_rho_exact(2000, 6.0)
    assert np.isfinite(v) and v < -10000


def test_exact_limit():
    with pytest.raises(ResourceError):
        log_rho_exact(2001, 0.0)


# ---------------------------------------------------------------- asymptotic density

def test_asymptotic_matches_exact():
    a, e = log_rho_asymptotic(100, 1.6), log_rho_exact(100, 1.6)
    assert abs(math.expm1(a - e)) <= 0.05


def test_asymptotic_upper_sandwich():
    x, N, eps = math.sqrt(2) * 1.05, 400, 0.05
    assert log_rho_asymptotic(N, x) <= N * phi(x) * (1 - eps) + N * eps


@given(st.floats(1.5, 10))
def test_asymptotic_even(x):
    assert log_rho_asymptotic(50, x) == log_rho_asymptotic(50, -x)


def test_asymptotic_refuses_bulk():
    with pytest.raises(DomainError):
        log_rho_asymptotic(100, 1.45)


def test_mode_dispatch():
    x = np.array([0.0, 1.0, 1.8, -3.0])
    out = log_rho(60, x, "asymptotic")
    assert out[0] == log_rho_exact(60, 0.0) and out[1] == log_rho_exact(60, 1.0)
    assert out[2] == log_rho_asymptotic(60, 1.8)


def test_sandwich_on_grid():
    N, eps = 200, 0.05
    x = np.arange(-4, 4.0001, 0.05)
    lr = log_rho_exact(N, x)
    p = phi(x)
    assert np.all(lr <= N * p * (1 - eps) + N * eps)
    assert np.all(lr >= N * p * (1 + eps) - N * eps)


# ---------------------------------------------------------------- shifted determinant

def test_shifted_det_examples():
    assert shifted_det_mean(2, 0.0) == pytest.approx(FOLDED_AT_0, abs=1e-9)
    assert shifted_det_mean(2, 1.0) == pytest.approx(FOLDED_AT_1, abs=1e-9)
    for mu in (0.0, 0.4, 1.0, 2.7):
        assert shifted_det_mean(2, mu) == pytest.approx(folded_mean(mu), rel=1e-12)


@given(st.integers(2, 300), st.floats(-4, 4))
def test_shifted_det_even(N, x):
    assert log_shifted_det_mean(N, x) == log_shifted_det_mean(N, -x)


def test_shifted_det_one_by_one_at_large_shift():
    # dimension one: E|x + g| -> |x| for large x
    assert shifted_det_mean(2, 12.0) == pytest.approx(12.0, rel=1e-12)


@pytest.mark.parametrize("N", [2, 4, 8])
@pytest.mark.parametrize("x", [0.0, 0.5, 1.5, 2.5])
def test_shifted_det_against_monte_carlo(N, x):
    mean, se = mc_shifted_det(N, x, 40_000, seed=11)
    assert abs(mean - shifted_det_mean(N, x)) <= 3 * se


def test_monte_carlo_examples():
    mean, se = mc_shifted_det(2, 0.0, 100_000, seed=3)
    assert abs(mean - FOLDED_AT_0) <= 3 * se
    mean, se = mc_shifted_det(8, 1.5, 100_000, seed=3)
    assert abs(mean - shifted_det_mean(8, 1.5)) <= 3 * se
    assert mc_shifted_det(5, 0.7, 1000, seed=9) == mc_shifted_det(5, 0.7, 1000, seed=9)


def test_monte_carlo_limits():
    with pytest.raises(ResourceError):
        mc_shifted_det(61, 0.0, 10, 0)


def test_det_second_moment():
    assert det_second_moment_check(40, 2.0, 10_000, seed=1) <= math.exp(0.2 * 40)
    assert det_second_moment_check(10, 3.0, 5_000, seed=1) >= 1.0


# ---------------------------------------------------------------- sampling

def test_spectrum_determinism_and_order():
    spec = GoeSpec(30, 1 / 30)
    a = sample_goe_spectrum(spec, seed=5, index=2)
    assert np.array_equal(a, sample_goe_spectrum(spec, seed=5, index=2))
    assert not np.array_equal(a, sample_goe_spectrum(spec, seed=5, index=3))
    assert np.all(np.diff(a) <= 0)


def test_scalar_goe_is_standard_normal():
    spec = GoeSpec(1, 1.0)
    v = np.array([sample_goe_spectrum(spec, seed=17, index=i)[0] for i in range(10_000)])
    assert abs(v.mean()) < 0.05
    assert 0.95 <= v.var() <= 1.05


def test_semicircle_histogram():
    N = 500
    spec = GoeSpec(N, 1 / N)
    ev = np.concatenate([sample_goe_spectrum(spec, seed=23, index=i) for i in range(100)])
    edges = np.linspace(-1.6, 1.6, 51)
    hist, _ = np.histogram(ev, bins=edges, density=True)
    cdf = lambda x: np.where(np.abs(x) >= math.sqrt(2), np.sign(x) * 0.5,
                             (x * np.sqrt(np.clip(2 - x * x, 0, None)) / 2
                              + np.arcsin(np.clip(x / math.sqrt(2), -1, 1))) / math.pi)
    expected = np.diff(cdf(edges)) / np.diff(edges)
    assert np.max(np.abs(hist - expected)) <= 0.02


def test_largest_eigenvalue_concentrates():
    spec = GoeSpec(200, 1 / 200)
    top = np.array([sample_goe_spectrum(spec, seed=29, index=i)[0] for i in range(200)])
    assert np.mean(np.abs(top - math.sqrt(2)) > 0.2) <= 0.01


def test_spec_validation():
    with pytest.raises(DomainError):
        GoeSpec(0, 1.0)
    with pytest.raises(DomainError):
        GoeSpec(3, 0.0)
