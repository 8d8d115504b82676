"""GOE random-matrix layer.

Conventions: ``GOE_N(a)`` is the real symmetric ``N x N`` matrix with
independent centred Gaussian entries, off-diagonal variance ``a/2`` and
diagonal variance ``a``.  ``rho_N`` is the density of the averaged
empirical spectral measure of ``GOE_N(1/N)``; it tends to the semicircle
``sqrt(2 - x^2) / (2 pi)`` on ``[-sqrt 2, sqrt 2]``.

The exact density is assembled from Hermite functions

    phi_n(t) = (2^n n! sqrt(pi))^(-1/2) H_n(t) exp(-t^2/2),

evaluated by their three-term recurrence in scaled arithmetic, so that
``N`` up to 2000 and arguments far outside the bulk are handled without
under/overflow.  Densities and determinants are returned as natural logs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ._random import make_rng
from .errors import DomainError, ResourceError, ToleranceError
from .model import phi as big_phi
from .scaled import LN2, ScaledValue

MAX_HERMITE_DEGREE = 2001
MAX_EXACT_N = 2000
SQRT2 = math.sqrt(2.0)
_PI_M14 = math.pi ** -0.25
_RESCALE_AT = 2.0 ** 500


class DensityMode(str, enum.Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class GoeSpec:
    dim: int
    a: float

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("GOE dimension must be positive")
        if not self.a > 0:
            raise DomainError("GOE variance parameter must be positive")


@dataclass(frozen=True)
class HermiteBundle:
    """Consecutive Hermite functions ``phi_{n-1}, phi_n, phi_{n+1}`` at ``x``."""

    n: int
    x: float
    prev: ScaledValue
    cur: ScaledValue
    next: ScaledValue


def _hermite_recurrence(n: int, t: np.ndarray, with_tail: bool = False):
    """Run the Hermite-function recurrence up to degree ``n + 1``.

    All returned mantissas share the per-point base-2 exponent ``exp2``:
    ``phi_k(t) = m_k * 2**exp2``.  With ``with_tail`` the tail integral
    ``int_t^inf phi_n`` is carried along on the same scale; it obeys

        I_{k+1} = sqrt(k/(k+1)) I_{k-1} + sqrt(2/(k+1)) phi_k,

    which follows from integrating the ladder relation for ``phi_k'``.
    The tail requires ``t >= 0``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half_sq = 0.5 * t * t
    exp2 = np.floor(-half_sq / LN2)
    frac = np.exp(-half_sq - exp2 * LN2)
    exp2 = exp2.astype(np.int64)

    p_prev = np.zeros_like(t)
    p_cur = _PI_M14 * frac
    if with_tail:
        if np.any(t < 0):
            raise DomainError("tail integral requires non-negative arguments")
        i_prev = np.zeros_like(t)
        i_cur = _PI_M14 * math.sqrt(math.pi / 2.0) * special.erfcx(t / SQRT2) * frac
    for k in range(n):
        p_next = t * math.sqrt(2.0 / (k + 1)) * p_cur - math.sqrt(k / (k + 1)) * p_prev
        if with_tail:
            i_next = math.sqrt(k / (k + 1)) * i_prev + math.sqrt(2.0 / (k + 1)) * p_cur
            i_prev, i_cur = i_cur, i_next
        p_prev, p_cur = p_cur, p_next
        big = np.abs(p_cur)
        if big.max(initial=0.0) > _RESCALE_AT:
            mask = big > _RESCALE_AT
            _, shift = np.frexp(big[mask])
            p_prev[mask] = np.ldexp(p_prev[mask], -shift)
            p_cur[mask] = np.ldexp(p_cur[mask], -shift)
            if with_tail:
                i_prev[mask] = np.ldexp(i_prev[mask], -shift)
                i_cur[mask] = np.ldexp(i_cur[mask], -shift)
            exp2[mask] += shift
    # one more step for phi_{n+1}; the headroom below 2^1023 absorbs it
    p_next = t * math.sqrt(2.0 / (n + 1)) * p_cur - math.sqrt(n / (n + 1)) * p_prev
    result = {"prev": p_prev, "cur": p_cur, "next": p_next, "exp2": exp2}
    if with_tail:
        result["tail"] = i_cur
    return result


def _check_degree(n: int):
    if n < 0:
        raise DomainError("Hermite degree must be non-negative")
    if n > MAX_HERMITE_DEGREE:
        raise ResourceError(f"Hermite degree {n} exceeds {MAX_HERMITE_DEGREE}")


def hermite_bundle(n: int, x: float) -> HermiteBundle:
    """``phi_{n-1}, phi_n, phi_{n+1}`` at ``x`` in scaled form (``phi_{-1} = 0``)."""
    _check_degree(n)
    x = float(x)
    r = _hermite_recurrence(n, np.array([abs(x)]))
    e = int(r["exp2"][0])
    vals = []
    for deg, key in ((n - 1, "prev"), (n, "cur"), (n + 1, "next")):
        m = float(r[key][0])
        if x < 0 and deg % 2 == 1:
            m = -m
        vals.append(ScaledValue.normalize(m, e))
    return HermiteBundle(n, x, *vals)


def hermite_phi(n: int, x: float) -> ScaledValue:
    """Normalized Hermite function ``phi_n(x)`` as a :class:`ScaledValue`."""
    return hermite_bundle(n, x).cur


def hermite_phi_float(n: int, x) -> np.ndarray:
    """``phi_n`` as plain doubles (underflows to 0 far from the bulk)."""
    _check_degree(n)
    x = np.asarray(x, dtype=float)
    r = _hermite_recurrence(n, np.abs(x).ravel())
    val = np.ldexp(r["cur"], r["exp2"]).reshape(x.shape)
    if n % 2 == 1:
        val = np.where(x < 0, -val, val)
    return val


def log_hermite_integral(n: int) -> float:
    """Log of ``int_R phi_n`` for even ``n`` (the integral vanishes for odd ``n``)."""
    if n % 2:
        return -math.inf
    m = n // 2
    return (0.5 * math.log(2.0 * math.pi) + 0.5 * math.lgamma(2 * m + 1)
            - m * LN2 - math.lgamma(m + 1) - 0.25 * math.log(math.pi))


def _check_exact_n(N: int):
    if N < 1:
        raise DomainError("N must be positive")
    if N > MAX_EXACT_N:
        raise ResourceError(f"exact Hermite density limited to N <= {MAX_EXACT_N}")


def _signed_logaddexp(l1, s1, l2, s2):
    m = np.maximum(l1, l2)
    m = np.where(np.isfinite(m), m, 0.0)
    v = s1 * np.exp(l1 - m) + s2 * np.exp(l2 - m)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(v > 0, m + np.log(np.abs(v)), -np.inf)


def log_rho_exact(N: int, x) -> np.ndarray:
    """Natural log of ``rho_N(x)`` from the Hermite-function representation.

    ``rho_N = N^{-1/2} (A_N + S_N + alpha_N)`` with ``A_N`` in
    Christoffel-Darboux form, ``S_N = sqrt(N/2) phi_{N-1} J_N`` and
    ``alpha_N = phi_{N-1} / int phi_{N-1}`` for odd ``N``.  Here

        J_N(x) = 1/2 int sgn(sqrt(N) x - t) phi_N(t) dt
               = 1/2 int_R phi_N - int_{sqrt(N) x}^inf phi_N,

    which is even in ``x`` for odd ``N``.  The density is even, so only
    ``|x|`` is used.  Points where rounding drives the sum negative are
    clamped to ``-inf``.
    """
    _check_exact_n(N)
    x = np.asarray(x, dtype=float)
    s = math.sqrt(N) * np.abs(x)
    r = _hermite_recurrence(N, s.ravel(), with_tail=True)
    m_prev, m_cur, m_next, m_tail = r["prev"], r["cur"], r["next"], r["tail"]
    e = r["exp2"].astype(float) * LN2

    # terms on scale 2^(2 exp2)
    g2 = (N * m_cur * m_cur - math.sqrt(N * (N + 1.0)) * m_prev * m_next
          - math.sqrt(N / 2.0) * m_prev * m_tail)
    # terms on scale 2^(exp2)
    c1 = 0.0
    if N % 2 == 0:
        c1 += math.sqrt(N / 2.0) * 0.5 * math.exp(log_hermite_integral(N))
    else:
        c1 += math.exp(-log_hermite_integral(N - 1))
    g1 = c1 * m_prev

    with np.errstate(divide="ignore"):
        l2 = np.log(np.abs(g2)) + 2.0 * e
        l1 = np.log(np.abs(g1)) + e
    out = _signed_logaddexp(l1, np.sign(g1), l2, np.sign(g2)) - 0.5 * math.log(N)
    return out.reshape(x.shape)


def rho_exact(N: int, x) -> np.ndarray:
    """``rho_N(x)`` as doubles (0 where it underflows)."""
    return np.exp(log_rho_exact(N, x))


def rho_exact_scaled(N: int, x: float) -> ScaledValue:
    return ScaledValue.from_log(float(log_rho_exact(N, float(x))))


def j_n_quadrature(N: int, x: float) -> float:
    """``J_N(x)`` by adaptive quadrature of its defining integral.

    Independent of the recurrence used in :func:`log_rho_exact`; panels
    have width ``pi / sqrt(2N)``, about one oscillation of ``phi_N``.
    """
    s = math.sqrt(N) * float(x)
    width = math.pi / math.sqrt(2.0 * N)
    hi = max(abs(s), math.sqrt(2.0 * N + 1.0)) + 40.0

    def f(t):
        return float(hermite_phi_float(N, t))

    def tail(a):
        edges = np.arange(a, hi + width, width)
        parts = []
        for lo, up in zip(edges[:-1], edges[1:]):
            val, err = integrate.quad(f, lo, up, epsabs=1e-15, epsrel=1e-12, limit=50)
            parts.append(val)
        return math.fsum(parts)

    full = math.exp(log_hermite_integral(N)) if N % 2 == 0 else 0.0
    if s >= 0:
        return 0.5 * full - tail(s)
    # int_s^inf = full - (-1)^N int_{|s|}^inf
    upper = full - (-1) ** N * tail(-s)
    return 0.5 * full - upper


def log_rho_asymptotic(N: int, x, delta: float = 0.05) -> np.ndarray:
    """Leading-order log density outside the bulk.

    ``exp(N Phi(x)) / (2 sqrt(pi N) (x^2-2)^{1/4} (|x| + sqrt(x^2-2))^{1/2})``
    with the vanishing correction to the last exponent set to zero.  Only
    valid for ``|x| >= sqrt(2) (1 + delta)``.
    """
    if N < 1:
        raise DomainError("N must be positive")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    if np.any(ax < SQRT2 * (1.0 + delta)):
        raise DomainError(f"asymptotic density refused inside |x| < sqrt(2)(1+{delta})")
    root = np.sqrt(ax * ax - 2.0)
    return (N * big_phi(ax) - math.log(2.0 * math.sqrt(math.pi * N))
            - 0.25 * np.log(ax * ax - 2.0) - 0.5 * np.log(ax + root))


def log_rho(N: int, x, mode: DensityMode | str = DensityMode.EXACT,
            delta: float = 0.05) -> np.ndarray:
    """Log density in the requested mode.

    In asymptotic mode the exact evaluation is still used inside
    ``|x| < sqrt(2)(1+delta)``, where no asymptotic form is available.
    """
    mode = DensityMode(mode)
    x = np.asarray(x, dtype=float)
    if mode is DensityMode.EXACT:
        return log_rho_exact(N, x)
    out = np.empty_like(x)
    outside = np.abs(x) >= SQRT2 * (1.0 + delta)
    if outside.any():
        out[outside] = log_rho_asymptotic(N, x[outside], delta)
    if (~outside).any():
        out[~outside] = log_rho_exact(N, x[~outside])
    return out


def log_shifted_det_mean(N: int, x) -> np.ndarray:
    """``log E|det(x I_{N-1} + GOE_{N-1}(1/N))|``.

    Uses the identity ``E|det| = sqrt(2) N^{-(N-2)/2} Gamma(N/2)
    exp(N x^2 / 2) rho_N(x)``.
    """
    if N < 2:
        raise DomainError("matrix dimension N-1 must be at least 1")
    x = np.asarray(x, dtype=float)
    return (0.5 * LN2 - 0.5 * (N - 2) * math.log(N) + math.lgamma(N / 2.0)
            + 0.5 * N * x * x + log_rho_exact(N, x))


def shifted_det_mean(N: int, x) -> np.ndarray:
    return np.exp(log_shifted_det_mean(N, x))


def sample_goe(spec: GoeSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``GOE_N(a)`` matrices (a batch when ``size`` is given)."""
    shape = (spec.dim, spec.dim) if size is None else (size, spec.dim, spec.dim)
    g = rng.standard_normal(shape)
    # (G + G^T)/2 has off-diagonal variance 1/2 and diagonal variance 1
    return (g + np.swapaxes(g, -1, -2)) * (0.5 * math.sqrt(spec.a))


def sample_goe_spectrum(spec: GoeSpec, seed: int, index: int = 0) -> np.ndarray:
    """Eigenvalues of one ``GOE_N(a)`` draw, sorted descending.

    The draw is a pure function of ``(spec, seed, index)``.
    """
    if spec.dim > 4000:
        raise ResourceError("dense GOE sampling limited to N <= 4000")
    m = sample_goe(spec, make_rng(seed, 0x60E, index))
    try:
        ev = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise ToleranceError(f"eigensolver failed: {exc}") from exc
    return ev[::-1].copy()


def _batched_log_abs_det(n_dim, a, x, samples, rng, chunk=20000):
    out = np.empty(samples)
    eye = np.eye(n_dim)
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        m = sample_goe(GoeSpec(n_dim, a), rng, size=k) + x * eye
        _, logabs = np.linalg.slogdet(m)
        out[done:done + k] = logabs
        done += k
    return out


def mc_shifted_det(N: int, x: float, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``|det(x I_{N-1} + GOE_{N-1}(1/N))|``."""
    if N < 2 or N > 60:
        raise ResourceError("mc_shifted_det supports 2 <= N <= 60")
    if samples < 2 or samples > 10**6:
        raise ResourceError("samples must lie in [2, 1e6]")
    logs = _batched_log_abs_det(N - 1, 1.0 / N, float(x), samples, make_rng(seed, 0xDE7, N))
    shift = logs.max()
    v = np.exp(logs - shift)
    mean = v.mean() * math.exp(shift)
    se = v.std(ddof=1) / math.sqrt(samples) * math.exp(shift)
    return float(mean), float(se)


def det_second_moment_check(N: int, x: float, samples: int, seed: int) -> float:
    """Empirical ``E[det^2] / E[|det|]^2`` for ``x I_N + GOE_N(1/N)``."""
    if N > 60:
        raise ResourceError("det_second_moment_check supports N <= 60")
    logs = _batched_log_abs_det(N, 1.0 / N, float(x), samples, make_rng(seed, 0x5EC, N))
    shift = logs.max()
    v = np.exp(logs - shift)
    return float(np.mean(v * v) / np.mean(v) ** 2)
