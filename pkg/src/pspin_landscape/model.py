"""Mixture, field strength and the closed-form variational quantities.

A mixed p-spin model is described by a finite list of nonnegative
coefficients ``a_p`` with ``xi(t) = sum_p a_p t^p``.  Almost everything
at model level depends only on ``xi(1)``, ``xi'(1)`` and ``xi''(1)``,
exposed as :attr:`MixedModel.xi1`, :attr:`MixedModel.xi1p` and
:attr:`MixedModel.xi1pp`.

The two-variable function ``F(x, gamma)`` controls the exponential
growth of the expected number of critical points whose radial derivative
per site is ``x`` and whose overlap with the field direction is
``gamma``.  Its maximum, located in closed form here, decides whether
the landscape is trivial (one maximum, one minimum) or complex.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import DomainError, RegimeError

MAX_DEGREE = 32
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MixedModel:
    """Finite mixture ``xi(t) = sum_p a_p t^p``.

    Attributes:
        coeffs: Sorted ``(p, a_p)`` pairs with ``a_p > 0``.  Zero
            coefficients are dropped on construction.
    """

    coeffs: tuple[tuple[int, float], ...]
    xi1: float = field(init=False)
    xi1p: float = field(init=False)
    xi1pp: float = field(init=False)

    def __post_init__(self):
        clean = {}
        for p, a in self.coeffs:
            if int(p) != p or p < 1:
                raise DomainError(f"degree {p!r} must be a positive integer")
            if p > MAX_DEGREE:
                raise DomainError(f"degree {p} exceeds the supported maximum {MAX_DEGREE}")
            a = float(a)
            if not math.isfinite(a) or a < 0:
                raise DomainError(f"coefficient a_{p} = {a!r} must be finite and nonnegative")
            if int(p) in clean:
                raise DomainError(f"degree {p} given twice")
            clean[int(p)] = a
        kept = tuple(sorted((p, a) for p, a in clean.items() if a > 0))
        if not any(p >= 2 for p, _ in kept):
            raise DomainError("need a_p > 0 for at least one p >= 2")
        object.__setattr__(self, "coeffs", kept)
        object.__setattr__(self, "xi1", math.fsum(a for _, a in kept))
        object.__setattr__(self, "xi1p", math.fsum(p * a for p, a in kept))
        object.__setattr__(self, "xi1pp", math.fsum(p * (p - 1) * a for p, a in kept))

    @classmethod
    def from_dict(cls, coeffs: dict[int, float]) -> "MixedModel":
        return cls(tuple(coeffs.items()))

    @classmethod
    def pure(cls, p: int, a: float = 1.0) -> "MixedModel":
        return cls(((p, a),))

    @classmethod
    def parse(cls, text: str) -> "MixedModel":
        """Parse a mixture literal such as ``"3:1"`` or ``"1:0.5,3:1"``."""
        pairs = []
        for item in text.replace(" ", "").split(","):
            if not item:
                continue
            try:
                p, a = item.split(":")
                pairs.append((int(p), float(a)))
            except ValueError as exc:
                raise DomainError(f"bad mixture term {item!r}; expected p:a_p") from exc
        if not pairs:
            raise DomainError("empty mixture literal")
        return cls(tuple(pairs))

    def __str__(self) -> str:
        return ",".join(f"{p}:{_fmt_coeff(a)}" for p, a in self.coeffs)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.coeffs)

    @property
    def max_degree(self) -> int:
        return self.coeffs[-1][0]

    @property
    def is_pure(self) -> bool:
        """A single degree ``p >= 2``; the energy is then fixed by ``x``."""
        return len(self.coeffs) == 1

    @property
    def ratio(self) -> float:
        """``xi'(1) / xi''(1)``."""
        return self.xi1p / self.xi1pp

    def xi(self, t, derivative: int = 0):
        """``xi`` or one of its derivatives at ``t`` (array friendly)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p, a in self.coeffs:
            if derivative > p:
                continue
            fall = math.perm(p, derivative)
            out = out + a * fall * t ** (p - derivative)
        return out


def _fmt_coeff(a: float) -> str:
    r = repr(float(a))
    return r[:-2] if r.endswith(".0") else r


class Regime(str, enum.Enum):
    """Field-strength regime; ``a = xi'/xi''`` and ``h_c^2 = xi'' - xi'``.

    TRIVIAL:          h^2 > xi'' - xi'
    NONTRIVIAL_UPPER: a < 1 and sqrt(a) h_c < h <= h_c
    NONTRIVIAL_LOWER: a < 1 and h <= sqrt(a) h_c
    DEGENERATE_LINE:  a = 1 and h = 0
    """

    TRIVIAL = "Trivial"
    NONTRIVIAL_UPPER = "NontrivialUpper"
    NONTRIVIAL_LOWER = "NontrivialLower"
    DEGENERATE_LINE = "DegenerateLine"


def _check_h(h: float):
    if not (h >= 0 and math.isfinite(h)):
        raise DomainError(f"field strength h = {h!r} must be finite and nonnegative")


def threshold_hc(model: MixedModel) -> Optional[float]:
    """Critical field ``sqrt(xi'' - xi')``, or ``None`` when ``xi'' < xi'``."""
    gap = model.xi1pp - model.xi1p
    if gap < 0:
        return None
    return math.sqrt(gap)


def classify(model: MixedModel, h: float) -> Regime:
    _check_h(h)
    gap = model.xi1pp - model.xi1p
    if h * h > gap:
        return Regime.TRIVIAL
    if model.xi1p == model.xi1pp:
        return Regime.DEGENERATE_LINE
    # h <= h_c and a < 1 here; compare h^2 with a h_c^2
    if h * h > model.ratio * gap:
        return Regime.NONTRIVIAL_UPPER
    return Regime.NONTRIVIAL_LOWER


def phi(x, order: int = 0):
    """Large-deviation rate of a GOE eigenvalue at ``x`` and its derivatives.

    ``order`` 0 gives ``-|x| sqrt(x^2-2)/2 + arccosh(|x|/sqrt 2)``, order 1
    its derivative ``-sgn(x) sqrt(x^2-2)``, order 2 ``-|x|/sqrt(x^2-2)``;
    all vanish on ``[-sqrt 2, sqrt 2]``.  Order 2 is infinite at the edge.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out_bulk = ax >= SQRT2
    root = np.sqrt(np.where(out_bulk, ax * ax - 2.0, 0.0))
    if order == 0:
        val = -0.5 * ax * root + np.arccosh(np.maximum(ax / SQRT2, 1.0))
    elif order == 1:
        val = -np.sign(x) * root
    elif order == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -ax / root
    else:
        raise DomainError("order must be 0, 1 or 2")
    val = np.where(out_bulk, val, 0.0)
    return val if val.ndim else float(val)


def _check_gamma(gamma):
    if np.any(np.abs(np.asarray(gamma)) >= 1):
        raise DomainError("overlap gamma must lie strictly inside (-1, 1)")


def eta_of(model: MixedModel, h: float, x, gamma):
    """Scaled shifted-spectrum location ``(x + h gamma) / sqrt(2 xi'')``."""
    return (np.asarray(x) + h * np.asarray(gamma)) / math.sqrt(2.0 * model.xi1pp)


def g_function(model: MixedModel, h: float, x, gamma):
    """Gaussian part of the Kac-Rice exponent (``F`` without ``Phi``)."""
    _check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    xp, xpp = model.xi1p, model.xi1pp
    val = (0.5 * np.log1p(-gamma * gamma) + h * h * gamma * gamma / (2.0 * xp)
           - x * x / (2.0 * (xp + xpp)) + (x + h * gamma) ** 2 / (4.0 * xpp))
    return val if val.ndim else float(val)


def big_f(model: MixedModel, h: float, x, gamma):
    """Exponential growth rate ``F(x, gamma) = G(x, gamma) + Phi(eta)``."""
    val = g_function(model, h, x, gamma) + phi(eta_of(model, h, x, gamma))
    return val


@dataclass(frozen=True)
class SystemCoefficients:
    """Coefficients of the critical-point system of ``F`` in ``(eta, gamma)``."""

    h_tilde: float
    a: float
    A: float
    B: float
    C: float
    R: float
    H: Optional[float]

    @classmethod
    def of(cls, model: MixedModel, h: float) -> "SystemCoefficients":
        _check_h(h)
        ht = h / math.sqrt(2.0 * model.xi1pp)
        a = model.ratio
        A = 2.0 * ht / (1.0 + a)
        B = (1.0 - a) / (1.0 + a)
        C = 2.0 * ht * ht / ((1.0 + a) * a)
        R = (1.0 - B * B) / (A * A) if A * A > 0 else math.inf
        gap = model.xi1pp - model.xi1p
        H = model.xi1pp * h * h / (model.xi1p * gap) if gap > 0 else None
        return cls(ht, a, A, B, C, R, H)


def tilde_f(model: MixedModel, h: float, eta, gamma):
    """``F`` expressed in ``(eta, gamma)``; equals ``F(x, gamma)`` at matching points."""
    _check_gamma(gamma)
    c = SystemCoefficients.of(model, h)
    eta = np.asarray(eta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    ht, a = c.h_tilde, c.a
    val = (0.5 * np.log1p(-gamma * gamma) + ht * ht * gamma * gamma / a
           - (eta - ht * gamma) ** 2 / (1.0 + a) + 0.5 * eta * eta + phi(eta))
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class MaximizerReport:
    """Positive-branch maximizer of ``F``; ``(-x, -gamma)`` is the mirror.

    Coordinates are ``None`` on the degenerate line, where the maximum is
    attained on a whole segment.
    """

    regime: Regime
    maximizer_x: Optional[float]
    maximizer_gamma: Optional[float]
    maximizer_eta: Optional[float]
    f_max: float
    unique: bool


def classify_and_maximize(model: MixedModel, h: float) -> MaximizerReport:
    regime = classify(model, h)
    xp, xpp = model.xi1p, model.xi1pp
    if regime is Regime.TRIVIAL:
        s = math.sqrt(xp + h * h)
        x = (xp + xpp) / s
        g = h / s
        eta = (xp + xpp + h * h) / math.sqrt(2.0 * xpp * (xp + h * h))
        f = h * h / (2.0 * xp) - 0.5 * math.log(xpp / xp)
        return MaximizerReport(regime, x, g, eta, f, True)
    if regime is Regime.NONTRIVIAL_UPPER:
        gap = xpp - xp
        g = math.sqrt((xpp * h * h - xp * gap) / xpp) / h
        eta = h * g * math.sqrt(2.0 * xpp) / gap
        x = h * g * (xp + xpp) / gap
        H = xpp * h * h / (xp * gap)
        f = 0.5 * (H - 1.0 - math.log(H))
        return MaximizerReport(regime, x, g, eta, f, True)
    if regime is Regime.NONTRIVIAL_LOWER:
        return MaximizerReport(regime, 0.0, 0.0, 0.0, 0.0, True)
    return MaximizerReport(regime, None, None, None, 0.0, False)


def annealed_rate(model: MixedModel, h: float) -> float:
    """Exponential growth rate of the expected number of critical points."""
    regime = classify(model, h)
    xp, xpp = model.xi1p, model.xi1pp
    if regime is Regime.TRIVIAL:
        return 0.0
    if regime is Regime.NONTRIVIAL_UPPER:
        r = h * h / (xpp - xp)
        return 0.5 * (r - 1.0 - math.log(r))
    return 0.5 * math.log(xpp / xp) - h * h / (2.0 * xp)


def rate_from_fmax(model: MixedModel, h: float) -> float:
    """The same rate assembled as prefactor exponent plus ``max F``."""
    rep = classify_and_maximize(model, h)
    return 0.5 * math.log(model.xi1pp / model.xi1p) - h * h / (2.0 * model.xi1p) + rep.f_max


@dataclass(frozen=True)
class TrivialPredictions:
    """Large-N limits at the global maximum above threshold (per site)."""

    gs_energy: float
    overlap: float
    radial_h: float
    radial_noh: float
    lambda_max: float


def trivial_predictions(model: MixedModel, h: float, boundary_tol: float = 1e-12) -> TrivialPredictions:
    """Ground-state energy, overlap, radial derivatives and top Hessian eigenvalue.

    The threshold itself (``h^2 = xi'' - xi'``) is accepted up to a
    relative ``boundary_tol`` so that the flat-edge limit can be evaluated.
    """
    _check_h(h)
    xp, xpp = model.xi1p, model.xi1pp
    gap = xpp - xp
    if h * h <= gap - boundary_tol * max(1.0, xpp):
        raise RegimeError(f"h = {h} is below the triviality threshold")
    s = math.sqrt(xp + h * h)
    radial_h = (xp + xpp + h * h) / s
    return TrivialPredictions(
        gs_energy=s,
        overlap=h / s,
        radial_h=radial_h,
        radial_noh=(xp + xpp) / s,
        lambda_max=2.0 * math.sqrt(xpp) - radial_h,
    )


def hessian_f(model: MixedModel, h: float, x: float, gamma: float) -> np.ndarray:
    """Analytic ``2x2`` Hessian of ``F`` in ``(x, gamma)`` off the spectral edge."""
    _check_gamma(gamma)
    xp, xpp = model.xi1p, model.xi1pp
    eta = float(eta_of(model, h, x, gamma))
    if abs(abs(eta) - SQRT2) < 1e-14:
        raise DomainError("F is not twice differentiable at the spectral edge")
    d2phi = float(phi(eta, 2))
    g2 = gamma * gamma
    fxx = ((xp - xpp) / (xp + xpp) + d2phi) / (2.0 * xpp)
    fgg = -(1.0 + g2) / (1.0 - g2) ** 2 + h * h / (2.0 * xpp) * (1.0 + 2.0 * xpp / xp + d2phi)
    fxg = h / (2.0 * xpp) * (1.0 + d2phi)
    return np.array([[fxx, fxg], [fxg, fgg]])


def hessian_det_closed_form(model: MixedModel, h: float) -> float:
    xp, xpp = model.xi1p, model.xi1pp
    return 2.0 * (xp + h * h) ** 3 / ((h * h + xp - xpp) * xp * xp * (xp + xpp))


def hessian_f_at_max(model: MixedModel, h: float) -> tuple[np.ndarray, float]:
    """Hessian of ``F`` at the trivial-regime maximizer and its closed-form determinant."""
    rep = classify_and_maximize(model, h)
    if rep.regime is not Regime.TRIVIAL:
        raise RegimeError("Hessian at the maximizer is provided in the trivial regime only")
    return hessian_f(model, h, rep.maximizer_x, rep.maximizer_gamma), hessian_det_closed_form(model, h)


# ----------------------------------------------------------------------------
# critical points of F in (eta, gamma) coordinates
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemRoot:
    eta: float
    gamma: float
    branch: str
    residual: float


def system_residuals(c: SystemCoefficients, eta: float, gamma: float) -> tuple[float, float]:
    """Residuals of ``dF/deta = 0`` and ``dF/dgamma = 0`` (up to positive factors)."""
    edge = math.sqrt(eta * eta - 2.0) if abs(eta) >= SQRT2 else 0.0
    edge = math.copysign(edge, eta)
    r1 = c.A * gamma - c.B * eta - edge
    r2 = c.C * gamma + c.A * eta - gamma / (1.0 - gamma * gamma)
    return r1, r2


def _bracket_roots(fun, lo, hi, n=512):
    grid = np.linspace(lo, hi, n + 1)
    vals = np.array([fun(u) for u in grid])
    roots = []
    for i in range(n):
        if vals[i] == 0.0:
            roots.append(grid[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(optimize.brentq(fun, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    return roots


def solve_system_numeric(model: MixedModel, h: float, tol: float = 1e-10) -> list[SystemRoot]:
    """All critical points of ``F`` in ``eta >= 0``, ``0 <= gamma < 1``.

    Two branches are searched.  Outside the bulk (``eta >= sqrt 2``) the
    first equation is squared and combined with the second into one scalar
    equation in ``u = gamma^2``; its roots in ``(0, 1)`` are bracketed by a
    sign scan, refined by Brent and Newton, then checked against the
    unsquared equations to discard spurious roots.  Inside the bulk the
    first equation is linear, ``eta = (A/B) gamma``.  The origin is always
    a critical point.

    Raises:
        ToleranceError: never; failing candidates are dropped and the
        residual of every accepted root is at most ``tol``.
    """
    c = SystemCoefficients.of(model, h)
    found: list[SystemRoot] = [SystemRoot(0.0, 0.0, "origin", 0.0)]

    def accept(eta, gamma, branch):
        if not (eta >= 0 and 0 <= gamma < 1):
            return
        r1, r2 = system_residuals(c, eta, gamma)
        # sqrt(eta^2 - 2) amplifies rounding in eta near the spectral edge
        edge = math.sqrt(max(eta * eta - 2.0, 0.0))
        slack = 4.0 * np.finfo(float).eps * eta * eta / edge if edge > 0 else 0.0
        if abs(r1) > tol + slack or abs(r2) > tol:
            return
        res = max(abs(r1), abs(r2))
        for f in found:
            if abs(f.eta - eta) < 1e-9 and abs(f.gamma - gamma) < 1e-9:
                return
        found.append(SystemRoot(eta, gamma, branch, res))

    if math.isfinite(c.R):
        R = c.R

        # divided through by R^2 so large R does not overflow
        def squared(u):
            return (u / R + 2.0) / R * (1.0 - u) ** 2 - u * (1.0 + (u - 1.0) / R) ** 2

        def dsquared(u):
            q = 1.0 + (u - 1.0) / R
            return ((1.0 - u) ** 2 / R / R - 2.0 * (u / R + 2.0) / R * (1.0 - u)
                    - q * q - 2.0 * u * q / R)

        for u in _bracket_roots(squared, 0.0, 1.0):
            for _ in range(3):
                d = dsquared(u)
                if d == 0:
                    break
                u = min(max(u - squared(u) / d, 0.0), 1.0 - 1e-16)
            if not 0 < u < 1:
                continue
            g = math.sqrt(u)
            # unsquared form: sqrt(1 + 2R/g^2) = R/(1-g^2) - 1
            if abs(math.sqrt(1.0 + 2.0 * R / u) - (R / (1.0 - u) - 1.0)) > 1e-8 * (1 + R):
                continue
            eta = (-(c.B / c.A) * g + math.sqrt(2.0 * R + u) / c.A) / R
            # the maximizer can sit within rounding of the edge
            if eta >= SQRT2 * (1.0 - 1e-9):
                accept(eta, g, "outside-bulk")
    elif c.B < 0:
        accept(math.sqrt(2.0 / (1.0 - c.B * c.B)), 0.0, "outside-bulk")

    if c.B != 0 and h > 0:
        k = c.C + c.A * c.A / c.B
        if k > 1:
            g = math.sqrt(1.0 - 1.0 / k)
            eta = c.A / c.B * g
            if eta <= SQRT2:
                accept(eta, g, "bulk")
    return found


# ----------------------------------------------------------------------------
# grid diagnostics
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class GridMaximum:
    grid_x: float
    grid_gamma: float
    grid_value: float
    polished_x: float
    polished_gamma: float
    polished_value: float


def grid_maximize(model: MixedModel, h: float, n: int = 400, x_max: float = 10.0,
                  gamma_max: float = 0.999) -> GridMaximum:
    """Brute-force maximum of ``F`` on a grid, then a local polish.

    The polish runs Nelder-Mead from the best grid node, so it finds the
    local maximum the grid points to rather than the global one.
    """
    xs = np.linspace(-x_max, x_max, n)
    gs = np.linspace(-gamma_max, gamma_max, n)
    X, Gm = np.meshgrid(xs, gs, indexing="ij")
    vals = big_f(model, h, X, Gm)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    x0, g0 = xs[i], gs[j]

    def neg(v):
        if abs(v[1]) >= 1:
            return math.inf
        return -float(big_f(model, h, v[0], v[1]))

    res = optimize.minimize(neg, [x0, g0], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
    return GridMaximum(x0, g0, float(vals[i, j]), float(res.x[0]), float(res.x[1]), -float(res.fun))


def tail_bound_constants(model: MixedModel, h: float) -> tuple[float, float]:
    """Constants ``(c1, c2)`` with ``F <= log(1-gamma^2)/2 + c1 - c2 x^2``.

    ``c2`` is half the Gaussian curvature ``1/(2(xi'+xi''))``, which is
    what survives after ``Phi`` cancels the shifted quadratic term.
    ``c1`` is the supremum of the remainder, found by maximizing over
    ``x`` for ``gamma`` on a fine grid in ``[-1, 1]``.
    """
    xp, xpp = model.xi1p, model.xi1pp
    c2 = 1.0 / (4.0 * (xp + xpp))

    def remainder(x, g):
        # F - log(1-g^2)/2 + c2 x^2, defined also at |g| = 1
        return (h * h * g * g / (2.0 * xp) - x * x / (2.0 * (xp + xpp))
                + (x + h * g) ** 2 / (4.0 * xpp) + phi(eta_of(model, h, x, g)) + c2 * x * x)

    best = -math.inf
    span = 10.0 + 4.0 * math.sqrt(xp + xpp) * (1.0 + h)
    xs = np.linspace(-span, span, 4001)
    for g in np.linspace(-1.0, 1.0, 201):
        v = remainder(xs, g)
        k = int(np.argmax(v))
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
        r = optimize.minimize_scalar(lambda t: -remainder(t, g), bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-12})
        best = max(best, float(v[k]), -float(r.fun))
    return best, c2
