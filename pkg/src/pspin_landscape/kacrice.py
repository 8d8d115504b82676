"""Exact finite-N expected number of critical points.

The expected count is a double integral over the radial derivative per
site ``x`` and the overlap ``gamma`` of an exponential weight
``exp(N G(x, gamma))``, the averaged GOE density ``rho_N`` at the shifted
location ``eta = (x + h gamma)/sqrt(2 xi'')`` and, when the energy is
restricted, the conditional probability of the energy window.

Numerically the integral is taken in the coordinates ``(eta, t)`` with
``gamma = tanh t``.  The Jacobian ``sqrt(2 xi'') (1 - gamma^2)`` turns the
``(1-gamma^2)^{-3/2}`` kernel into an integrable weight and the Gaussian
part into a smooth function of ``eta``.  Everything is kept in log form.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import goe
from .errors import DomainError, RegimeError, ResourceError, ToleranceError
from .intervals import IntervalSet
from .model import (MixedModel, Regime, classify_and_maximize, g_function,
                    hessian_f)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class RestrictionSet:
    """Restrictions on overlap, radial derivative per site and energy per site."""

    gamma_set: IntervalSet = field(default_factory=lambda: IntervalSet(((-1.0, 1.0),)))
    radial_set: IntervalSet = field(default_factory=IntervalSet.real_line)
    energy_set: IntervalSet = field(default_factory=IntervalSet.real_line)

    def __post_init__(self):
        object.__setattr__(self, "gamma_set", self.gamma_set.clip(-1.0, 1.0))

    @classmethod
    def full(cls) -> "RestrictionSet":
        return cls()

    def __str__(self) -> str:
        return f"gamma={self.gamma_set};radial={self.radial_set};energy={self.energy_set}"


class RhoMode(str, enum.Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"
    AUTO = "auto"


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for the composite Gauss-Legendre quadrature.

    Attributes:
        tol: Target relative accuracy of the count.
        nodes: Gauss-Legendre nodes per panel.
        initial_panels: Panels per axis on the first pass.
        max_panels: Refinement stops with an error beyond this.
        window_drop: Cells whose log integrand is more than this below the
            peak are left out of the integration window.
        scan_points: Grid size per axis of the window scan.
        asymptotic_delta: Relative distance to the spectral edge beyond
            which the asymptotic density may be used.
        auto_exact_max_n: In auto mode, exact densities up to this ``N``.
    """

    tol: float = 1e-7
    nodes: int = 10
    initial_panels: int = 8
    max_panels: int = 1024
    window_drop: float = 40.0
    scan_points: int = 161
    asymptotic_delta: float = 0.05
    auto_exact_max_n: int = 400


@dataclass(frozen=True)
class CountResult:
    log_value: float
    value: float
    error_estimate: float
    rho_mode: str
    N: int
    panels: int
    eta_window: tuple[float, float]
    t_window: tuple[float, float]


def energy_spread(model: MixedModel) -> float:
    """``J^2`` with conditional energy variance ``J^2 / N`` given ``x``."""
    xi, xp, xpp = model.xi1, model.xi1p, model.xi1pp
    j2 = (xi * (xp + xpp) - xp * xp) / (xp + xpp)
    return max(j2, 0.0) if j2 > 1e-14 * xi else 0.0


def energy_mean(model: MixedModel, h: float, x, gamma):
    """Conditional mean of the energy per site given ``x`` and ``gamma``."""
    return model.xi1p * np.asarray(x) / (model.xi1p + model.xi1pp) + h * np.asarray(gamma)


def _log_interval_prob(lo, hi):
    """``log(Phi(hi) - Phi(lo))`` for standard normal ``Phi``, elementwise."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    # use the upper tail when both ends are positive to avoid cancellation
    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    lb = special.log_ndtr(b)
    la = special.log_ndtr(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(la < lb, lb + np.log1p(-np.exp(la - lb)), -np.inf)
    return d


def log_p_overlap_energy(model: MixedModel, h: float, N: int, x, gamma, energy_set: IntervalSet):
    """Log conditional probability that the energy per site lies in ``energy_set``."""
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(np.abs(gamma) > 1):
        raise DomainError("overlap must lie in [-1, 1]")
    shape = np.broadcast(x, gamma).shape
    if energy_set.is_real_line:
        return np.zeros(shape)
    mean = np.broadcast_to(energy_mean(model, h, x, gamma), shape)
    j2 = energy_spread(model)
    if j2 == 0.0:
        inside = np.zeros(shape, dtype=bool)
        for lo, hi in energy_set.intervals:
            inside |= (mean >= lo) & (mean <= hi)
        return np.where(inside, 0.0, -np.inf)
    sd = math.sqrt(j2 / N)
    terms = [_log_interval_prob((lo - mean) / sd, (hi - mean) / sd) for lo, hi in energy_set.intervals]
    return np.logaddexp.reduce(np.stack(terms), axis=0) if len(terms) > 1 else terms[0]


def p_overlap_energy(model: MixedModel, h: float, N: int, x, gamma, energy_set: IntervalSet):
    return np.exp(log_p_overlap_energy(model, h, N, x, gamma, energy_set))


def log_prefactor(model: MixedModel, h: float, N: int) -> float:
    xp, xpp = model.xi1p, model.xi1pp
    return (-N * h * h / (2.0 * xp) + 0.5 * (N - 1) * math.log(xpp / xp) + math.log(2.0 * N)
            - 0.5 * math.log(math.pi * (xp + xpp)) + math.lgamma(N / 2.0) - math.lgamma((N - 1) / 2.0))


def _resolve_mode(model, h, N, mode, quad: QuadratureSpec) -> RhoMode:
    mode = RhoMode(mode)
    rep = classify_and_maximize(model, h)
    asym_ok = (rep.regime is Regime.TRIVIAL
               and rep.maximizer_eta >= SQRT2 * (1.0 + quad.asymptotic_delta))
    if mode is RhoMode.AUTO:
        if N <= quad.auto_exact_max_n:
            return RhoMode.EXACT
        if asym_ok:
            return RhoMode.ASYMPTOTIC
        if N <= goe.MAX_EXACT_N:
            return RhoMode.EXACT
        raise ResourceError(f"no admissible density mode at N = {N}")
    if mode is RhoMode.ASYMPTOTIC and not asym_ok:
        raise DomainError("asymptotic density refused: maximizer not outside the bulk")
    if mode is RhoMode.EXACT and N > goe.MAX_EXACT_N:
        raise ResourceError(f"exact density limited to N <= {goe.MAX_EXACT_N}")
    return mode


def _log_rho(N, eta, mode: RhoMode, quad: QuadratureSpec):
    if mode is RhoMode.EXACT:
        return goe.log_rho_exact(N, eta)
    return goe.log_rho(N, eta, goe.DensityMode.ASYMPTOTIC, quad.asymptotic_delta)


def _log_one_minus_tanh2(t):
    at = np.abs(t)
    return -2.0 * (at + np.log1p(np.exp(-2.0 * at)) - math.log(2.0))


def log_integrand(model: MixedModel, h: float, N: int, x, gamma,
                  energy_set: IntervalSet | None = None, rho_mode="exact",
                  quad: QuadratureSpec | None = None):
    """Log of the ``(x, gamma)`` integrand, without the ``N``-dependent prefactor."""
    quad = quad or QuadratureSpec()
    mode = RhoMode(rho_mode)
    if mode is RhoMode.AUTO:
        mode = _resolve_mode(model, h, N, mode, quad)
    x = np.asarray(x, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eta = (x + h * gamma) / math.sqrt(2.0 * model.xi1pp)
    val = (N * g_function(model, h, x, gamma) - 1.5 * np.log1p(-gamma * gamma)
           + _log_rho(N, eta, mode, quad))
    if energy_set is not None and not energy_set.is_real_line:
        val = val + log_p_overlap_energy(model, h, N, x, gamma, energy_set)
    return val


class _Integrand:
    """Log integrand in ``(eta, t)`` including the change-of-variables Jacobian."""

    def __init__(self, model, h, N, restriction: RestrictionSet, mode: RhoMode, quad):
        self.model, self.h, self.N = model, h, N
        self.restriction, self.mode, self.quad = restriction, mode, quad
        self.s = math.sqrt(2.0 * model.xi1pp)
        self.pure_energy = energy_spread(model) == 0.0
        r = restriction
        self.rows_share_eta = r.radial_set.is_real_line and (r.energy_set.is_real_line or not self.pure_energy)
        self.smooth_energy = not r.energy_set.is_real_line and not self.pure_energy

    def eta_intervals(self, gamma: float, lo: float, hi: float) -> IntervalSet:
        """Admissible ``eta`` for fixed ``gamma`` inside ``[lo, hi]``."""
        m, h, s = self.model, self.h, self.s
        out = IntervalSet(((lo, hi),))
        r = self.restriction
        if not r.radial_set.is_real_line:
            out = out.intersect(r.radial_set.affine(1.0 / s, h * gamma / s))
        if self.pure_energy and not r.energy_set.is_real_line:
            k = (m.xi1p + m.xi1pp) / m.xi1p
            # mean = x/k + h gamma  =>  x = k (E - h gamma)
            out = out.intersect(r.energy_set.affine(k / s, (h * gamma - k * h * gamma) / s))
        return out

    def log_value(self, eta, t, log_rho=None):
        """Log integrand at broadcastable ``eta``, ``t``."""
        m, h, N = self.model, self.h, self.N
        gamma = np.tanh(t)
        x = self.s * eta - h * gamma
        l1g = _log_one_minus_tanh2(t)
        # exponent N G with (x + h gamma)^2 / (4 xi'') = eta^2 / 2
        g = (0.5 * l1g + h * h * gamma * gamma / (2.0 * m.xi1p)
             - x * x / (2.0 * (m.xi1p + m.xi1pp)) + 0.5 * eta * eta)
        if log_rho is None:
            log_rho = _log_rho(N, eta, self.mode, self.quad)
        val = N * g - 0.5 * l1g + log_rho + math.log(self.s)
        if self.smooth_energy:
            val = val + log_p_overlap_energy(m, h, N, x, gamma, self.restriction.energy_set)
        return val

    def admissible_mask(self, eta, t):
        """Pointwise indicator of the hard restrictions (for the window scan)."""
        gamma = np.tanh(t)
        x = self.s * eta - self.h * gamma
        ok = np.zeros(np.broadcast(eta, t).shape, dtype=bool)
        for lo, hi in self.restriction.gamma_set.intervals:
            ok |= (gamma >= lo) & (gamma <= hi)
        r = self.restriction
        if not r.radial_set.is_real_line:
            inr = np.zeros_like(ok)
            for lo, hi in r.radial_set.intervals:
                inr |= (x >= lo) & (x <= hi)
            ok &= inr
        if self.pure_energy and not r.energy_set.is_real_line:
            e = energy_mean(self.model, self.h, x, gamma)
            ine = np.zeros_like(ok)
            for lo, hi in r.energy_set.intervals:
                ine |= (e >= lo) & (e <= hi)
            ok &= ine
        return ok


def _t_limits(gamma_set: IntervalSet, cap: float) -> tuple[float, float]:
    lo, hi = gamma_set.hull
    tlo = -cap if lo <= -1 else max(-cap, math.atanh(lo))
    thi = cap if hi >= 1 else min(cap, math.atanh(hi))
    return tlo, thi


def _scan_window(f: _Integrand, quad: QuadratureSpec, eta_center: float):
    """Bounding box of the region where the log integrand is within ``window_drop`` of its peak."""
    n = quad.scan_points
    gs = f.restriction.gamma_set
    hard_lo, hard_hi = _t_limits(gs, math.inf)
    t_lo, t_hi = _t_limits(gs, 4.0)
    half = max(abs(eta_center), SQRT2) + 3.0
    e_lo, e_hi = -half, half
    cell_e = cell_t = 0.0
    for sweep in range(2):
        for _ in range(12):
            etas = np.linspace(e_lo, e_hi, n)
            ts = np.linspace(t_lo, t_hi, n)
            E, T = np.meshgrid(etas, ts)
            vals = f.log_value(E, T)
            vals = np.where(f.admissible_mask(E, T), vals, -np.inf)
            peak = vals.max()
            if not np.isfinite(peak):
                return None
            cut = peak - quad.window_drop
            grown = False
            we, wt = e_hi - e_lo, t_hi - t_lo
            if vals[:, 0].max() >= cut:
                e_lo -= 0.5 * we
                grown = True
            if vals[:, -1].max() >= cut:
                e_hi += 0.5 * we
                grown = True
            if vals[0, :].max() >= cut and t_lo > hard_lo:
                t_lo = max(hard_lo, t_lo - 0.5 * wt)
                grown = True
            if vals[-1, :].max() >= cut and t_hi < hard_hi:
                t_hi = min(hard_hi, t_hi + 0.5 * wt)
                grown = True
            if not grown:
                break
        else:
            raise ToleranceError("integration window did not close")
        rows, cols = np.nonzero(vals >= cut)
        cell_e = etas[1] - etas[0]
        cell_t = ts[1] - ts[0]
        e_lo = etas[max(cols.min() - 1, 0)]
        e_hi = etas[min(cols.max() + 1, n - 1)]
        t_lo = ts[max(rows.min() - 1, 0)]
        t_hi = ts[min(rows.max() + 1, n - 1)]
    # one extra scan cell of safety margin, kept inside the hard overlap limits
    t_lo = max(hard_lo, t_lo - cell_t)
    t_hi = min(hard_hi, t_hi + cell_t)
    return (e_lo - cell_e, e_hi + cell_e), (t_lo, t_hi)


def _gl_nodes(intervals, total_len, panels, nodes):
    """Composite Gauss-Legendre nodes/weights over a union of intervals."""
    x0, w0 = np.polynomial.legendre.leggauss(nodes)
    xs, ws = [], []
    for lo, hi in intervals:
        k = max(1, int(math.ceil(panels * (hi - lo) / total_len)))
        edges = np.linspace(lo, hi, k + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs.append((mid[:, None] + half[:, None] * x0[None, :]).ravel())
        ws.append((half[:, None] * w0[None, :]).ravel())
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def _split(intervals, points):
    """Cut intervals at the given points so no panel straddles them."""
    out = []
    for lo, hi in intervals:
        cuts = [lo] + sorted(c for c in points if lo < c < hi) + [hi]
        out.extend(zip(cuts[:-1], cuts[1:]))
    return out


def _integrate(f: _Integrand, eta_win, t_win, panels, quad) -> float:
    """Log of the integral at a fixed panel count."""
    tlo, thi = t_win
    t_ints = []
    for glo, ghi in f.restriction.gamma_set.intervals:
        a = max(tlo, -math.inf if glo <= -1 else math.atanh(glo))
        b = min(thi, math.inf if ghi >= 1 else math.atanh(ghi))
        if a < b:
            t_ints.append((a, b))
    t_nodes, t_w = _gl_nodes(t_ints, thi - tlo, panels, quad.nodes)
    if t_nodes.size == 0:
        return -math.inf
    elo, ehi = eta_win
    # the asymptotic density switches to the exact one at these points
    breaks = []
    if f.mode is RhoMode.ASYMPTOTIC:
        edge = SQRT2 * (1.0 + quad.asymptotic_delta)
        breaks = [-edge, edge]
    if f.rows_share_eta:
        e_nodes, e_w = _gl_nodes(_split([(elo, ehi)], breaks), ehi - elo, panels, quad.nodes)
        lr = _log_rho(f.N, e_nodes, f.mode, quad)
        vals = f.log_value(e_nodes[None, :], t_nodes[:, None], log_rho=lr[None, :])
        logw = np.log(t_w)[:, None] + np.log(e_w)[None, :]
        total = vals + logw
    else:
        etas, ts, logws = [], [], []
        for t, wt in zip(t_nodes, t_w):
            ints = _split(f.eta_intervals(math.tanh(t), elo, ehi).intervals, breaks)
            en, ew = _gl_nodes(ints, ehi - elo, panels, quad.nodes)
            etas.append(en)
            ts.append(np.full(en.size, t))
            logws.append(np.log(ew) + math.log(wt))
        etas = np.concatenate(etas)
        if etas.size == 0:
            return -math.inf
        total = f.log_value(etas, np.concatenate(ts)) + np.concatenate(logws)
    peak = total.max()
    if not np.isfinite(peak):
        return -math.inf
    return float(peak + math.log(np.sum(np.exp(total - peak))))


def expected_count(model: MixedModel, h: float, N: int,
                   restriction: RestrictionSet | None = None,
                   quad: QuadratureSpec | None = None,
                   rho_mode: str | RhoMode = "auto") -> CountResult:
    """Expected number of critical points with the given restrictions.

    Panels are doubled on both axes until two successive estimates agree
    to ``quad.tol``; the last relative change is reported as the error
    estimate.

    Raises:
        DomainError: ``N < 4`` or an invalid density mode.
        ToleranceError: the tolerance is not met within ``max_panels``.
    """
    if N < 4:
        raise DomainError("expected_count requires N >= 4")
    if h < 0:
        raise DomainError("h must be nonnegative")
    restriction = restriction or RestrictionSet.full()
    quad = quad or QuadratureSpec()
    mode = _resolve_mode(model, h, N, rho_mode, quad)
    f = _Integrand(model, h, N, restriction, mode, quad)
    rep = classify_and_maximize(model, h)
    center = rep.maximizer_eta if rep.maximizer_eta is not None else 0.0
    win = _scan_window(f, quad, center)
    pre = log_prefactor(model, h, N)
    if win is None:
        return CountResult(-math.inf, 0.0, 0.0, mode.value, N, 0, (0.0, 0.0), (0.0, 0.0))
    eta_win, t_win = win
    panels = quad.initial_panels
    err = math.inf
    prev = _integrate(f, eta_win, t_win, panels, quad)
    while True:
        panels *= 2
        if panels > quad.max_panels:
            raise ToleranceError(f"quadrature did not reach tol={quad.tol} (last change {err:.3g})")
        cur = _integrate(f, eta_win, t_win, panels, quad)
        if cur == -math.inf and prev == -math.inf:
            err = 0.0
        else:
            err = abs(math.expm1(cur - prev))
        prev = cur
        if err <= quad.tol:
            break
    log_value = pre + cur
    value = math.exp(log_value) if log_value < 709.0 else math.inf
    return CountResult(log_value, value, err, mode.value, N, panels,
                       (float(eta_win[0]), float(eta_win[1])), (float(t_win[0]), float(t_win[1])))


def laplace_count_limit(model: MixedModel, h: float) -> float:
    """Large-N limit of the expected count from second-order Laplace expansion.

    The Hessian determinant is taken from the analytic second derivatives
    at the maximizer, so the collapse of the expression to 2 is a genuine
    check of the algebra.
    """
    rep = classify_and_maximize(model, h)
    if rep.regime is not Regime.TRIVIAL:
        raise RegimeError("the Laplace limit applies in the trivial regime only")
    xp, xpp = model.xi1p, model.xi1pp
    g, eta = rep.maximizer_gamma, rep.maximizer_eta
    det = float(np.linalg.det(hessian_f(model, h, rep.maximizer_x, g)))
    e2 = eta * eta - 2.0
    num = 2.0 * SQRT2 * math.sqrt(xp) * (1.0 - g * g) ** -1.5
    den = (math.sqrt(xpp) * math.sqrt(xp + xpp) * e2 ** 0.25
           * math.sqrt(eta + math.sqrt(e2)) * math.sqrt(det))
    return num / den


def rate_from_integral(model: MixedModel, h: float, N_list, rho_mode="auto",
                       quad: QuadratureSpec | None = None):
    """Fit ``log E[count] / N = rate + c/N + d log(N)/N`` by least squares.

    Returns:
        ``(rate, per_n)`` with ``per_n`` a list of ``(N, log_value / N)``.
    """
    N_list = sorted(int(n) for n in N_list)
    if len(N_list) < 3:
        raise DomainError("need at least three sizes to fit")
    per_n = []
    for n in N_list:
        res = expected_count(model, h, n, quad=quad, rho_mode=rho_mode)
        per_n.append((n, res.log_value / n))
    ns = np.array([p[0] for p in per_n], dtype=float)
    v = np.array([p[1] for p in per_n])
    design = np.column_stack([np.ones_like(ns), 1.0 / ns, np.log(ns) / ns])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return float(coef[0]), per_n


COUNT_FIELDS = ("model", "h", "N", "restriction", "rho_mode", "log_value", "value", "error_estimate")


def count_record(model: MixedModel, h: float, restriction: RestrictionSet, res: CountResult) -> dict:
    return {
        "model": str(model), "h": h, "N": res.N, "restriction": str(restriction),
        "rho_mode": res.rho_mode, "log_value": res.log_value, "value": res.value,
        "error_estimate": res.error_estimate,
    }


def count_to_json(record: dict) -> str:
    return json.dumps(record, sort_keys=False)
