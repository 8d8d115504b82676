"""Acceptance checks, one function per criterion.

Each check returns a :class:`CheckResult` whose ``detail`` string is
built only from seeded computations and fixed-precision formatting, so
repeated runs print identical text.
"""

from __future__ import annotations

import math
import subprocess
import sys
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import goe, kacrice, simulate
from ._random import make_rng
from .model import (MixedModel, Regime, annealed_rate, big_f,
                    classify_and_maximize, grid_maximize, threshold_hc)


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail}"


def _g(v: float) -> str:
    return f"{v:.9g}"


def random_trivial_instances(count: int, seed: int = 2024):
    """Random mixtures with a field strength in the trivial regime."""
    out = []
    rng = make_rng(seed, 1)
    while len(out) < count:
        degrees = sorted(rng.choice(np.arange(1, 7), size=rng.integers(1, 4), replace=False))
        coeffs = tuple((int(p), float(rng.uniform(0.1, 2.0))) for p in degrees)
        if not any(p >= 2 for p, _ in coeffs):
            continue
        m = MixedModel(coeffs)
        hc = threshold_hc(m)
        h = 1.1 * hc if hc else 1.0
        out.append((m, h))
    return out


def check_laplace_limit() -> CheckResult:
    worst = 0.0
    for m, h in random_trivial_instances(20):
        worst = max(worst, abs(kacrice.laplace_count_limit(m, h) - 2.0) / 2.0)
    return CheckResult(1, "laplace limit", worst <= 1e-10, f"max relative deviation {worst:.3e}")


def check_kac_rice_convergence(N_list=(20, 40, 80, 160)) -> CheckResult:
    m = MixedModel.parse("3:1")
    vals = [kacrice.expected_count(m, 2.0, n, rho_mode="exact").value for n in N_list]
    gaps = [abs(v - 2.0) for v in vals]
    mono = all(b <= a for a, b in zip(gaps, gaps[1:]))
    ok = mono and gaps[-1] <= 0.25
    detail = ", ".join(f"N={n}: {_g(v)}" for n, v in zip(N_list, vals))
    return CheckResult(2, "kac-rice convergence", ok,
                       f"{detail}; |v-2| nonincreasing={mono}, |v(N_max)-2|={gaps[-1]:.4f} (<=0.25)")


def check_subthreshold_rate(N_list=(40, 80, 120, 160)) -> CheckResult:
    m = MixedModel.parse("3:1")
    parts, ok = [], True
    for h in (0.0, 1.5):
        fit, _ = kacrice.rate_from_integral(m, h, N_list, rho_mode="exact")
        target = annealed_rate(m, h)
        ok &= abs(fit - target) <= 0.02
        parts.append(f"h={h}: fit {fit:.6f} vs {target:.6f}")
    return CheckResult(3, "sub-threshold rate", ok, "; ".join(parts))


def check_variational() -> CheckResult:
    cases = [("3:1", 2.0, Regime.TRIVIAL), ("3:1", 1.5, Regime.NONTRIVIAL_UPPER),
             ("3:1", 1.0, Regime.NONTRIVIAL_LOWER), ("2:1", 0.0, Regime.DEGENERATE_LINE)]
    ok = True
    parts = []
    for lit, h, expected in cases:
        m = MixedModel.parse(lit)
        rep = classify_and_maximize(m, h)
        gm = grid_maximize(m, h)
        ok &= rep.regime is expected
        ok &= rep.f_max >= gm.grid_value - 1e-12 and rep.f_max >= gm.polished_value - 1e-9
        if rep.unique:
            dist = min(math.hypot(gm.polished_x - s * rep.maximizer_x, gm.polished_gamma - s * rep.maximizer_gamma)
                       for s in (1, -1))
        else:
            dist = abs(gm.polished_gamma)
        ok &= dist <= 1e-2
        parts.append(f"{expected.value}: argmax distance {dist:.2e}")
    # rate continuity at both regime boundaries
    jumps = []
    for lit in ("3:1", "4:1", "2:1,4:0.5", "1:0.3,3:1"):
        m = MixedModel.parse(lit)
        hc = threshold_hc(m)
        if not hc:
            continue
        for hb in (math.sqrt(m.ratio) * hc, hc):
            jumps.append(abs(annealed_rate(m, hb * (1 + 1e-12)) - annealed_rate(m, hb * (1 - 1e-12))))
        jumps.append(abs(annealed_rate(m, hc)))
    jump = max(jumps)
    ok &= jump <= 1e-9
    ident = 0.0
    for m, h in random_trivial_instances(20, seed=7):
        rep = classify_and_maximize(m, h)
        xp, xpp = m.xi1p, m.xi1pp
        closed = (xp + h * h - xpp) ** 2 / (2.0 * xpp * (xp + h * h))
        ident = max(ident, abs(rep.maximizer_eta ** 2 - 2.0 - closed))
        ok &= rep.maximizer_eta >= math.sqrt(2.0)
    ok &= ident <= 1e-12
    parts.append(f"rate jump {jump:.2e}; eta identity {ident:.2e}")
    return CheckResult(4, "variational consistency", ok, "; ".join(parts))


def density_integral(N: int, lo: float = -6.0, hi: float = 6.0, pieces: int = 240) -> float:
    """Adaptive quadrature of ``rho_N`` over ``[lo, hi]`` on equal sub-intervals."""
    edges = np.linspace(lo, hi, pieces + 1)
    f = lambda x: float(goe.rho_exact(N, x))
    return math.fsum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
                     for a, b in zip(edges[:-1], edges[1:]))


def check_goe_density(samples: int = 100_000) -> CheckResult:
    ok = True
    parts = []
    worst = 0.0
    for N in (1, 2, 5, 10, 50, 200):
        worst = max(worst, abs(density_integral(N) - 1.0))
    ok &= worst <= 1e-6
    parts.append(f"normalization max error {worst:.2e}")
    r0 = float(goe.rho_exact(200, 0.0))
    stated = math.sqrt(2.0) / (2.0 * math.pi)
    rel = abs(r0 / stated - 1.0)
    ok &= rel <= 0.02
    parts.append(f"rho_200(0)={_g(r0)} vs {_g(stated)} (rel {rel:.3f})")
    zmax = 0.0
    for N in (2, 8):
        for x in (0.0, 0.5, 1.5):
            mean, se = goe.mc_shifted_det(N, x, samples, seed=11)
            exact = float(goe.shifted_det_mean(N, x))
            zmax = max(zmax, abs(mean - exact) / se)
    ok &= zmax <= 3.0
    parts.append(f"det identity max |z| {zmax:.2f}")
    xs = np.linspace(-4, 4, 801)
    gauss = np.exp(-xs * xs / 2) / math.sqrt(2 * math.pi)
    d1 = float(np.max(np.abs(goe.rho_exact(1, xs) - gauss)))
    ok &= d1 <= 1e-8
    parts.append(f"rho_1 vs gaussian {d1:.1e}")
    return CheckResult(5, "goe density", ok, "; ".join(parts))


def check_sandwich(N: int = 200, eps: float = 0.05) -> CheckResult:
    xs = np.round(np.arange(-80, 81) * 0.05, 10)
    from .model import phi
    lr = goe.log_rho_exact(N, xs)
    ph = phi(xs)
    lower = N * ph * (1 + eps) - N * eps
    upper = N * ph * (1 - eps) + N * eps
    bad = int(np.sum((lr < lower) | (lr > upper)))
    margin = float(min(np.min(lr - lower), np.min(upper - lr)))
    return CheckResult(6, "two-sided density bound", bad == 0,
                       f"{bad} violations on {xs.size} points, min log margin {margin:.3f}")


def check_simulation(seeds: int = 50, starts: int = 64, N: int = 16, h: float = 2.0) -> CheckResult:
    m = MixedModel.parse("3:1")
    opts = simulate.FinderOptions(starts=starts)
    cens = [simulate.find_critical_points(simulate.sample_field(m, N, s), h, opts, seed=s)
            for s in range(seeds)]
    rep = simulate.landscape_report(cens, m, h)
    tol = {"energy": 0.2, "overlap": 0.1, "radial_h": 0.3, "lambda_max": 0.25}
    ok = rep.two_point_fraction >= 0.9
    parts = [f"two-point fraction {rep.two_point_fraction:.2f} (>=0.90)"]
    for k, t in tol.items():
        d = rep.deltas[k]
        ok &= abs(d) <= t
        parts.append(f"{k} mean {rep.mean[k]:.4f} vs {rep.predictions[k]:.4f} (|d|<={t})")
    return CheckResult(7, "simulation triviality", ok, "; ".join(parts))


def _geodesic(sigma, v, t):
    return math.cos(t) * sigma + math.sin(t) * v


def derivative_errors(sample, h, sigma, step_g=1e-5, step_h=1e-4):
    """Relative errors of the spherical gradient and Hessian against finite differences.

    Both are compared along great circles through ``sigma``, where first
    and second derivatives of the energy equal the Riemannian ones.
    """
    ev = simulate.eval_field(sample, h, sigma)
    tang = ev.frame[:, :-1]
    n = tang.shape[1]

    def energy(x):
        return simulate.eval_field(sample, h, x / np.linalg.norm(x)).value

    g_fd = np.array([(energy(_geodesic(ev.sigma, tang[:, i], step_g))
                      - energy(_geodesic(ev.sigma, tang[:, i], -step_g))) / (2 * step_g) for i in range(n)])
    e0 = ev.value

    def second(v):
        vn = v / np.linalg.norm(v)
        q = (energy(_geodesic(ev.sigma, vn, step_h)) - 2 * e0
             + energy(_geodesic(ev.sigma, vn, -step_h))) / step_h ** 2
        return q * (v @ v)

    h_fd = np.zeros((n, n))
    for i in range(n):
        h_fd[i, i] = second(tang[:, i])
        for j in range(i + 1, n):
            h_fd[i, j] = h_fd[j, i] = 0.25 * (second(tang[:, i] + tang[:, j]) - second(tang[:, i] - tang[:, j]))
    eg = np.linalg.norm(g_fd - ev.sph_grad) / np.linalg.norm(ev.sph_grad)
    eh = np.linalg.norm(h_fd - ev.sph_hess) / np.linalg.norm(ev.sph_hess)
    return float(eg), float(eh)


def check_derivatives(pairs: int = 100) -> CheckResult:
    models = [MixedModel.parse(s) for s in ("3:1", "1:0.5,2:0.7,3:1", "4:1", "2:1,3:0.5")]
    worst_g = worst_h = 0.0
    for k in range(pairs):
        rng = make_rng(8, k)
        m = models[k % len(models)]
        N = int(rng.integers(4, 11))
        sample = simulate.sample_field(m, N, seed=1000 + k)
        sigma = rng.standard_normal(N)
        sigma /= np.linalg.norm(sigma)
        h = float(rng.uniform(0, 3))
        eg, eh = derivative_errors(sample, h, sigma)
        worst_g, worst_h = max(worst_g, eg), max(worst_h, eh)
    ok = worst_g <= 1e-5 and worst_h <= 1e-4
    return CheckResult(8, "derivative correctness", ok,
                       f"max gradient rel err {worst_g:.1e}, max Hessian rel err {worst_h:.1e}")


def check_covariances(N: int = 12, samples: int = 2000) -> CheckResult:
    rows = simulate.covariance_selftest(MixedModel.parse("3:1"), N, samples, seed=5)
    zmax = max(abs(r.z) for r in rows)
    return CheckResult(9, "covariance table", zmax <= 5.0, f"{len(rows)} entries, max |z| {zmax:.2f}")


def check_restricted_decay(N: int = 80) -> CheckResult:
    m = MixedModel.parse("3:1")
    full = kacrice.expected_count(m, 2.0, N, rho_mode="exact").value
    restr = kacrice.RestrictionSet(gamma_set=kacrice.IntervalSet(((-0.5, 0.5),)))
    part = kacrice.expected_count(m, 2.0, N, restr, rho_mode="exact").value
    return CheckResult(10, "restricted-count decay", part <= 0.1 * full,
                       f"restricted {_g(part)} vs full {_g(full)} (ratio {part / full:.2e})")


def check_cli_replay() -> CheckResult:
    cmd = [sys.executable, "-m", "pspin_landscape.cli", "verify"]
    runs = [subprocess.run(cmd, capture_output=True) for _ in range(2)]
    same = runs[0].stdout == runs[1].stdout
    codes = [r.returncode for r in runs]
    ok = same and codes == [0, 0]
    return CheckResult(11, "cli replay", ok, f"exit codes {codes}, byte-identical={same}")


ALL_CHECKS = {
    1: check_laplace_limit, 2: check_kac_rice_convergence, 3: check_subthreshold_rate,
    4: check_variational, 5: check_goe_density, 6: check_sandwich, 7: check_simulation,
    8: check_derivatives, 9: check_covariances, 10: check_restricted_decay, 11: check_cli_replay,
}

VERIFY_SUITE = (1, 4, 5, 8)


def run_checks(numbers) -> list[CheckResult]:
    return [ALL_CHECKS[n]() for n in numbers]
