import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from pspin_landscape.errors import DomainError, RegimeError
from pspin_landscape.model import (MixedModel, Regime, SystemCoefficients,
                                   annealed_rate, big_f, classify,
                                   classify_and_maximize, grid_maximize,
                                   hessian_f, hessian_f_at_max, phi,
                                   rate_from_fmax, solve_system_numeric,
                                   tail_bound_constants, threshold_hc,
                                   tilde_f, trivial_predictions)

PURE3 = MixedModel.parse("3:1")

# subnormal fields only exercise float underflow
fields = st.one_of(st.just(0.0), st.floats(1e-6, 6.0))

mixtures = st.lists(
    st.tuples(st.integers(1, 8), st.floats(0.05, 3.0)), min_size=1, max_size=4,
    unique_by=lambda t: t[0],
).filter(lambda c: any(p >= 2 for p, _ in c)).map(lambda c: MixedModel(tuple(c)))


def _trivial_h(m, frac):
    gap = max(m.xi1pp - m.xi1p, 0.0)
    return math.sqrt(gap) + 0.05 + 5.0 * frac


# ---------------------------------------------------------------- mixture

def test_derived_constants():
    m = MixedModel.parse("1:0.5,3:2")
    assert (m.xi1, m.xi1p, m.xi1pp) == (2.5, 6.5, 12.0)


@pytest.mark.parametrize("text", ["1:1", "", "3:-1", "3", "0:1", "2:1,2:3", "40:1"])
def test_invalid_mixtures_rejected(text):
    with pytest.raises(DomainError):
        MixedModel.parse(text)


@given(mixtures)
def test_literal_round_trip(m):
    assert MixedModel.parse(str(m)) == m


def test_zero_coefficients_are_dropped():
    assert MixedModel.parse("1:0,3:1") == PURE3


# ---------------------------------------------------------------- threshold

def test_threshold_values():
    assert threshold_hc(PURE3) == pytest.approx(math.sqrt(3.0), abs=1e-15)
    assert threshold_hc(MixedModel.parse("2:1")) == 0.0
    assert threshold_hc(MixedModel.parse("1:1,2:1")) is None


# ---------------------------------------------------------------- phi

def test_phi_values():
    assert phi(math.sqrt(2.0)) == pytest.approx(0.0, abs=1e-7)
    assert phi(1.0) == 0.0 and phi(1.0, 1) == 0.0
    assert phi(2.0) == pytest.approx(-math.sqrt(2.0) + math.log(1 + math.sqrt(2.0)), abs=1e-15)
    assert phi(2.0) == pytest.approx(-0.5328399, abs=1e-7)


@given(st.floats(-50, 50))
def test_phi_bounds_and_symmetry(x):
    v = phi(x)
    assert v <= 0.0
    assert v >= -x * x / 2 - 1e-12
    assert phi(-x) == v


@given(st.floats(-20, 20).filter(lambda x: abs(abs(x) - math.sqrt(2)) > 1e-3))
def test_phi_derivatives_match_finite_differences(x):
    e = 1e-6
    assert (phi(x + e) - phi(x - e)) / (2 * e) == pytest.approx(phi(x, 1), abs=1e-6)
    if abs(abs(x) - math.sqrt(2)) > 0.05:
        e = 1e-5
        fd2 = (phi(x + e, 1) - phi(x - e, 1)) / (2 * e)
        assert fd2 == pytest.approx(phi(x, 2), rel=1e-5, abs=1e-6)


# ---------------------------------------------------------------- F and its tilde form

def test_f_vanishes_at_origin():
    for lit in ("3:1", "2:1", "1:0.4,4:1"):
        for h in (0.0, 0.7, 3.0):
            assert big_f(MixedModel.parse(lit), h, 0.0, 0.0) == 0.0


def test_f_rejects_boundary_overlap():
    with pytest.raises(DomainError):
        big_f(PURE3, 1.0, 0.0, 1.0)


@given(mixtures, fields, st.floats(-8, 8), st.floats(-0.99, 0.99))
def test_tilde_form_agrees(m, h, x, g):
    eta = (x + h * g) / math.sqrt(2 * m.xi1pp)
    assert tilde_f(m, h, eta, g) == pytest.approx(big_f(m, h, x, g), abs=1e-10)


@given(mixtures, fields, st.floats(-5, 5), st.floats(-0.99, 0.99))
def test_tilde_form_is_symmetric(m, h, eta, g):
    assert tilde_f(m, h, eta, g) == pytest.approx(tilde_f(m, h, -eta, -g), abs=1e-12)


def test_tail_bound_holds_on_grid():
    for lit, h in (("3:1", 2.0), ("3:1", 1.0), ("1:0.3,2:1,4:0.5", 0.8)):
        m = MixedModel.parse(lit)
        c1, c2 = tail_bound_constants(m, h)
        xs = np.linspace(-10, 10, 400)
        gs = np.linspace(-0.999, 0.999, 400)
        X, G = np.meshgrid(xs, gs, indexing="ij")
        bound = 0.5 * np.log1p(-G * G) + c1 - c2 * X * X
        assert np.all(big_f(m, h, X, G) <= bound + 1e-12)


# ---------------------------------------------------------------- regimes

def test_system_coefficient_identities():
    for lit, h in (("3:1", 2.0), ("1:0.5,3:1", 0.4), ("2:1,5:0.1", 1.3)):
        c = SystemCoefficients.of(MixedModel.parse(lit), h)
        m = MixedModel.parse(lit)
        assert -1 < c.B < 1
        assert c.R == pytest.approx(2 * m.xi1p / h ** 2, rel=1e-13)
        assert c.C * c.R - c.B == pytest.approx(1.0, abs=1e-13)
    assert SystemCoefficients.of(PURE3, 1.5).H == pytest.approx(1.5)


@given(mixtures, fields)
def test_exactly_one_regime(m, h):
    r = classify(m, h)
    a, gap = m.ratio, m.xi1pp - m.xi1p
    flags = {
        Regime.TRIVIAL: h * h > gap,
        Regime.NONTRIVIAL_UPPER: a < 1 and a * gap < h * h <= gap,
        Regime.NONTRIVIAL_LOWER: a < 1 and h * h <= a * gap,
        Regime.DEGENERATE_LINE: a == 1 and h == 0,
    }
    assert sum(flags.values()) == 1
    assert flags[r]


def test_maximizer_trivial():
    r = classify_and_maximize(PURE3, 2.0)
    assert r.regime is Regime.TRIVIAL and r.unique
    assert r.maximizer_x == pytest.approx(9 / math.sqrt(7), abs=1e-14)
    assert r.maximizer_x == pytest.approx(3.4016803, abs=1e-7)
    assert r.maximizer_gamma == pytest.approx(0.7559289, abs=1e-7)
    assert r.maximizer_eta == pytest.approx(13 / math.sqrt(84), abs=1e-14)
    assert r.f_max == pytest.approx(4 / 6 - 0.5 * math.log(2), abs=1e-14)
    assert r.f_max == pytest.approx(0.3200931, abs=1e-7)


def test_maximizer_upper():
    r = classify_and_maximize(PURE3, 1.5)
    assert r.regime is Regime.NONTRIVIAL_UPPER
    assert r.maximizer_gamma == pytest.approx(1 / math.sqrt(3), abs=1e-14)
    assert r.maximizer_x == pytest.approx(2.5980762, abs=1e-7)
    assert r.maximizer_eta == pytest.approx(1.0, abs=1e-14)
    assert r.f_max == pytest.approx(0.5 * (1.5 - 1 - math.log(1.5)), abs=1e-14)
    assert r.f_max == pytest.approx(0.0472674, abs=1e-7)


def test_maximizer_lower_and_degenerate():
    r = classify_and_maximize(PURE3, 1.0)
    assert r.regime is Regime.NONTRIVIAL_LOWER and r.f_max == 0.0
    assert (r.maximizer_x, r.maximizer_gamma) == (0.0, 0.0)
    d = classify_and_maximize(MixedModel.parse("2:1"), 0.0)
    assert d.regime is Regime.DEGENERATE_LINE and d.f_max == 0.0 and not d.unique
    assert d.maximizer_x is None


def test_threshold_is_tagged_upper():
    assert classify(PURE3, math.sqrt(3.0)) is Regime.NONTRIVIAL_UPPER


def test_negative_field_rejected():
    with pytest.raises(DomainError):
        classify_and_maximize(PURE3, -0.1)


@given(mixtures, fields)
def test_fmax_matches_f_at_maximizer(m, h):
    r = classify_and_maximize(m, h)
    assert r.f_max >= 0
    if r.maximizer_x is not None:
        assert big_f(m, h, r.maximizer_x, r.maximizer_gamma) == pytest.approx(r.f_max, rel=1e-7, abs=1e-10)
    if r.regime is Regime.TRIVIAL:
        assert r.maximizer_eta >= math.sqrt(2) - 1e-15


@given(mixtures, st.floats(0, 1))
def test_eta_star_identity(m, frac):
    h = _trivial_h(m, frac)
    r = classify_and_maximize(m, h)
    xp, xpp = m.xi1p, m.xi1pp
    closed = (xp + h * h - xpp) ** 2 / (2 * xpp * (xp + h * h))
    assert r.maximizer_eta ** 2 - 2 == pytest.approx(closed, abs=1e-12)


@pytest.mark.parametrize("lit,h", [("3:1", 2.0), ("3:1", 1.5), ("3:1", 1.0), ("2:1", 0.0),
                                   ("1:0.5,2:1,4:1", 0.9), ("1:2,3:1", 0.5)])
def test_grid_never_beats_closed_form(lit, h):
    m = MixedModel.parse(lit)
    r = classify_and_maximize(m, h)
    gm = grid_maximize(m, h)
    assert gm.grid_value <= r.f_max + 1e-12
    assert gm.polished_value <= r.f_max + 1e-9


# ---------------------------------------------------------------- rates

def test_rate_values():
    assert annealed_rate(PURE3, 0.0) == pytest.approx(0.5 * math.log(2), abs=1e-15)
    assert annealed_rate(PURE3, 1.5) == pytest.approx(0.5 * (0.75 - 1 - math.log(0.75)), abs=1e-15)
    assert annealed_rate(PURE3, 1.5) == pytest.approx(0.0188410, abs=1e-7)
    assert annealed_rate(PURE3, 2.0) == 0.0


@given(mixtures, fields)
def test_rate_equals_prefactor_plus_fmax(m, h):
    assert annealed_rate(m, h) == pytest.approx(rate_from_fmax(m, h), abs=1e-12)


@settings(suppress_health_check=[HealthCheck.filter_too_much])
@given(mixtures)
def test_rate_is_continuous_at_boundaries(m):
    hc = threshold_hc(m)
    assume(hc is not None and hc > 0)
    for hb in (math.sqrt(m.ratio) * hc, hc):
        lo, hi = annealed_rate(m, hb * (1 - 1e-12)), annealed_rate(m, hb * (1 + 1e-12))
        assert abs(lo - hi) <= 1e-9
    assert abs(annealed_rate(m, hc)) <= 1e-12


# ---------------------------------------------------------------- predictions

def test_predictions_values():
    p = trivial_predictions(PURE3, 2.0)
    assert p.gs_energy == pytest.approx(math.sqrt(7), abs=1e-14)
    assert p.overlap == pytest.approx(0.7559289, abs=1e-7)
    assert p.radial_h == pytest.approx(13 / math.sqrt(7), abs=1e-14)
    assert p.lambda_max == pytest.approx(-0.0145587, abs=1e-7)
    assert trivial_predictions(PURE3, math.sqrt(3)).lambda_max == pytest.approx(0.0, abs=1e-12)
    assert trivial_predictions(PURE3, 10.0).overlap == pytest.approx(10 / math.sqrt(103), abs=1e-14)


def test_predictions_need_trivial_regime():
    with pytest.raises(RegimeError):
        trivial_predictions(PURE3, 1.5)


@given(mixtures, st.floats(0, 1))
def test_prediction_identities(m, frac):
    h = _trivial_h(m, frac)
    p = trivial_predictions(m, h)
    xp, xpp = m.xi1p, m.xi1pp
    assert p.radial_h == pytest.approx(p.radial_noh + h * p.overlap, abs=1e-12)
    assert p.gs_energy == pytest.approx(xp * p.radial_noh / (xp + xpp) + h * p.overlap, abs=1e-12)
    assert p.lambda_max <= 1e-12


# ---------------------------------------------------------------- Hessian of F

def test_hessian_at_maximizer_values():
    H, det = hessian_f_at_max(PURE3, 2.0)
    assert det == pytest.approx(686 / 81, rel=1e-14)
    assert H[0, 0] == pytest.approx(-10 / 9, rel=1e-12)
    assert np.linalg.det(H) == pytest.approx(det, rel=1e-10)


@given(mixtures, st.floats(0, 1))
def test_hessian_determinant_closed_form(m, frac):
    h = _trivial_h(m, frac)
    H, det = hessian_f_at_max(m, h)
    assert np.linalg.det(H) == pytest.approx(det, rel=1e-8)


def test_hessian_matches_finite_differences():
    # away from the spectral edge so fourth derivatives stay moderate
    rep = classify_and_maximize(PURE3, 3.0)
    x, g, e = rep.maximizer_x, rep.maximizer_gamma, 1e-4
    f = lambda a, b: big_f(PURE3, 3.0, a, b)
    fxx = (f(x + e, g) - 2 * f(x, g) + f(x - e, g)) / e ** 2
    fgg = (f(x, g + e) - 2 * f(x, g) + f(x, g - e)) / e ** 2
    fxg = (f(x + e, g + e) - f(x + e, g - e) - f(x - e, g + e) + f(x - e, g - e)) / (4 * e * e)
    H = hessian_f(PURE3, 3.0, x, g)
    assert H[0, 0] == pytest.approx(fxx, rel=1e-5)
    assert H[1, 1] == pytest.approx(fgg, rel=1e-5)
    assert H[0, 1] == pytest.approx(fxg, rel=1e-5)


def test_hessian_needs_trivial_regime():
    with pytest.raises(RegimeError):
        hessian_f_at_max(PURE3, 1.0)


# ---------------------------------------------------------------- critical points of F

def _pairs(roots):
    return sorted((round(r.eta, 9), round(r.gamma, 9)) for r in roots)


def test_system_roots_catalogue():
    assert _pairs(solve_system_numeric(PURE3, 2.0)) == [(0.0, 0.0), (round(13 / math.sqrt(84), 9), round(2 / math.sqrt(7), 9))]
    assert _pairs(solve_system_numeric(PURE3, 1.5)) == [(0.0, 0.0), (1.0, round(1 / math.sqrt(3), 9))]
    assert _pairs(solve_system_numeric(PURE3, 1.0)) == [(0.0, 0.0)]


@given(mixtures, fields)
def test_system_roots_match_closed_forms(m, h):
    r = classify_and_maximize(m, h)
    roots = solve_system_numeric(m, h)
    for root in roots:
        edge = math.sqrt(max(root.eta ** 2 - 2.0, 0.0))
        assert root.residual <= 1e-10 + (1e-14 / edge if edge > 0 else 0.0)
    if r.regime in (Regime.TRIVIAL, Regime.NONTRIVIAL_UPPER) and r.maximizer_gamma > 0:
        assert any(abs(q.eta - r.maximizer_eta) < 1e-8 and abs(q.gamma - r.maximizer_gamma) < 1e-8
                   for q in roots)
    if r.regime is Regime.NONTRIVIAL_LOWER and h > 0:
        assert _pairs(roots) == [(0.0, 0.0)]
