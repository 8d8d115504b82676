"""Finite-N sampling of the Hamiltonian and a census of its critical points.

The Hamiltonian ``H(sigma) = sum_p sqrt(N a_p) J^(p)[sigma, ..., sigma]``
uses independent standard normal tensors, which gives covariance
``N xi(sigma . sigma')``.  The field ``N h u . sigma`` points along the
first coordinate axis.  Derivatives come from exact tensor contractions
of the symmetrized tensors and are expressed in an orthonormal frame
whose last vector is ``sigma`` and whose first vector is the tangent
projection of ``u``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._random import make_rng
from .errors import DomainError, ResourceError
from .model import (MixedModel, Regime, TrivialPredictions, annealed_rate,
                    classify, trivial_predictions)

MAX_TENSOR_ENTRIES = 10**8


@dataclass
class FieldSample:
    """One draw of the disorder at dimension ``N``.

    Tensors are stored as drawn (not symmetrized); the symmetrized and
    scaled copies used for evaluation are built once on first use.
    """

    model: MixedModel
    N: int
    seed: int
    tensors: dict[int, np.ndarray]
    _sym: dict[int, np.ndarray] | None = field(default=None, init=False, repr=False)

    @property
    def scales(self) -> dict[int, float]:
        return {p: math.sqrt(self.N * a) for p, a in self.model.coeffs}

    def symmetric_tensors(self) -> dict[int, np.ndarray]:
        if self._sym is None:
            sym = {}
            for p, t in self.tensors.items():
                if p == 1:
                    s = t.copy()
                else:
                    perms = list(itertools.permutations(range(p)))
                    s = sum(np.transpose(t, perm) for perm in perms) / len(perms)
                sym[p] = s * self.scales[p]
            self._sym = sym
        return self._sym

    def negated(self) -> "FieldSample":
        return FieldSample(self.model, self.N, self.seed, {p: -t for p, t in self.tensors.items()})


def sample_field(model: MixedModel, N: int, seed: int, index: int = 0) -> FieldSample:
    """Draw the disorder tensors; a pure function of ``(model, N, seed, index)``."""
    if N < 2:
        raise DomainError("N must be at least 2")
    total = sum(N ** p for p in model.degrees)
    if total > MAX_TENSOR_ENTRIES:
        raise ResourceError(f"disorder tensors need {total} entries, above {MAX_TENSOR_ENTRIES}")
    rng = make_rng(seed, 0xF1E1D, N, index)
    tensors = {p: rng.standard_normal((N,) * p) for p in model.degrees}
    return FieldSample(model, N, seed, tensors)


@dataclass(frozen=True)
class EvalResult:
    """Value and derivatives of ``H + N h u . sigma`` at one point.

    ``value`` includes the field; ``radial`` is the radial derivative of
    the Hamiltonian without field and ``radial_h`` with it.  ``sph_grad``
    and ``sph_hess`` are expressed in the first ``N-1`` frame vectors.
    """

    sigma: np.ndarray
    value: float
    value_noh: float
    euclid_grad: np.ndarray
    euclid_hess: np.ndarray
    frame: np.ndarray
    sph_grad: np.ndarray
    radial: float
    radial_h: float
    sph_hess: np.ndarray

    @property
    def overlap(self) -> float:
        return float(self.sigma[0])


def field_direction(N: int) -> np.ndarray:
    u = np.zeros(N)
    u[0] = 1.0
    return u


def _contract(sample: FieldSample, sigma: np.ndarray):
    """Value, Euclidean gradient and Hessian of the field-free Hamiltonian."""
    N = sample.N
    val = 0.0
    grad = np.zeros(N)
    hess = np.zeros((N, N))
    for p, s in sample.symmetric_tensors().items():
        if p == 1:
            val += float(s @ sigma)
            grad += s
            continue
        m = s
        for _ in range(p - 2):
            m = m @ sigma
        ms = m @ sigma
        val += float(ms @ sigma)
        grad += p * ms
        hess += p * (p - 1) * m
    return val, grad, hess


def adapted_frame(sigma: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Orthonormal columns ``[e_1, ..., e_N]`` with ``e_N = sigma``.

    ``e_1`` is the normalized tangent part of the field direction, so the
    field lies in ``span{e_1, e_N}``.  The middle vectors complete the
    basis; with ``rng`` they are randomly rotated.
    """
    N = sigma.size
    u = field_direction(N)
    perp = u - (u @ sigma) * sigma
    norm = np.linalg.norm(perp)
    if norm > 1e-12:
        e1 = perp / norm
        q, _ = np.linalg.qr(np.column_stack([e1, sigma, np.eye(N)]), mode="complete")
        middle = q[:, 2:N]
    else:
        # sigma is parallel to u: any tangent basis will do
        q, _ = np.linalg.qr(np.column_stack([sigma, np.eye(N)]), mode="complete")
        e1 = q[:, 1]
        middle = q[:, 2:N]
    if rng is not None and middle.shape[1] > 1:
        z = rng.standard_normal((middle.shape[1],) * 2)
        rot, r = np.linalg.qr(z)
        rot = rot * np.sign(np.diag(r))
        middle = middle @ rot
    return np.column_stack([e1, middle, sigma])


def eval_field(sample: FieldSample, h: float, sigma, frame_rng: np.random.Generator | None = None) -> EvalResult:
    """Evaluate the Hamiltonian with field and its spherical derivatives.

    Raises:
        DomainError: ``sigma`` has the wrong length or is far from unit norm.
    """
    sigma = np.asarray(sigma, dtype=float)
    N = sample.N
    if sigma.shape != (N,):
        raise DomainError(f"sigma must have shape ({N},)")
    nrm = np.linalg.norm(sigma)
    if abs(nrm - 1.0) > 1e-9:
        raise DomainError("sigma must be a unit vector")
    sigma = sigma / nrm
    val, grad, hess = _contract(sample, sigma)
    u = field_direction(N)
    grad_h = grad + N * h * u
    frame = adapted_frame(sigma, frame_rng)
    comp = frame.T @ grad_h
    radial = float(sigma @ grad)
    radial_h = float(comp[-1])
    proj = frame[:, :-1]
    sph_hess = proj.T @ hess @ proj - radial_h * np.eye(N - 1)
    sph_hess = 0.5 * (sph_hess + sph_hess.T)
    return EvalResult(sigma, val + N * h * float(sigma[0]), val, grad_h, hess, frame,
                      comp[:-1], radial, radial_h, sph_hess)


@dataclass(frozen=True)
class FinderOptions:
    """Controls for the multistart critical-point search.

    Attributes:
        starts: Random starting points, in addition to ``+u`` and ``-u``.
        tol: Convergence when the spherical gradient norm is below ``tol N``.
        dedup_cos: Points with ``sigma_i . sigma_j`` above this are merged.
        max_iter: Newton iterations per start.
        max_step: Largest geodesic step length.
        zero_tol: Eigenvalues within ``zero_tol N`` of zero are marginal.
    """

    starts: int = 64
    tol: float = 1e-10
    dedup_cos: float = 1.0 - 1e-8
    max_iter: int = 200
    max_step: float = 0.5
    zero_tol: float = 1e-8


@dataclass(frozen=True)
class CriticalPoint:
    """A critical point; energy, radial derivative and ``lambda_max`` are per site."""

    sigma: np.ndarray
    energy: float
    overlap: float
    radial: float
    radial_h: float
    index: int
    lambda_max: float
    grad_norm: float
    marginal: bool

    @property
    def sigma_hash(self) -> str:
        rounded = np.round(self.sigma, 8) + 0.0
        return hashlib.sha256(rounded.tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class Census:
    """Critical points found for one sample, sorted by energy descending."""

    points: list[CriticalPoint]
    saturated: bool
    failed_starts: int
    N: int


def _retract(sigma, tangent):
    v = sigma + tangent
    return v / np.linalg.norm(v)


def _classify(ev: EvalResult, N: int, opts: FinderOptions) -> CriticalPoint:
    eig = np.linalg.eigvalsh(ev.sph_hess)
    thresh = opts.zero_tol * N
    return CriticalPoint(
        sigma=ev.sigma.copy(),
        energy=ev.value / N,
        overlap=ev.overlap,
        radial=ev.radial / N,
        radial_h=ev.radial_h / N,
        index=int(np.sum(eig < -thresh)),
        lambda_max=float(eig[-1]) / N,
        grad_norm=float(np.linalg.norm(ev.sph_grad)),
        marginal=bool(np.any(np.abs(eig) <= thresh)),
    )


def _energy_steps(sample, h, ev, opts, sign, count):
    """A few Armijo steps of gradient ascent (``sign=1``) or descent on the energy."""
    for _ in range(count):
        g = ev.sph_grad
        gn = float(np.linalg.norm(g))
        if gn <= opts.tol * sample.N:
            return ev
        tangent = sign * (ev.frame[:, :-1] @ g) / gn
        step = opts.max_step
        while True:
            trial = eval_field(sample, h, _retract(ev.sigma, step * tangent))
            if sign * (trial.value - ev.value) >= 1e-4 * step * gn:
                ev = trial
                break
            step *= 0.5
            if step < 1e-12:
                return ev
    return ev


def _newton(sample: FieldSample, h: float, sigma: np.ndarray, opts: FinderOptions, ascend: bool):
    """Safeguarded Riemannian Newton on ``|grad|^2``; returns the final evaluation or None."""
    N = sample.N
    target = opts.tol * N
    ev = eval_field(sample, h, sigma)
    sign = 1.0 if ascend else -1.0
    for _ in range(opts.max_iter):
        g = ev.sph_grad
        gn = float(np.linalg.norm(g))
        if gn <= target:
            return ev
        try:
            d = -np.linalg.solve(ev.sph_hess, g)
        except np.linalg.LinAlgError:
            d = np.full_like(g, np.nan)
        accepted = False
        if np.all(np.isfinite(d)):
            nd = np.linalg.norm(d)
            if nd > opts.max_step:
                d *= opts.max_step / nd
            tangent = ev.frame[:, :-1] @ d
            alpha = 1.0
            # a short accepted step signals a local minimum of |grad|^2
            while alpha >= 0.1:
                trial = eval_field(sample, h, _retract(ev.sigma, alpha * tangent))
                if np.linalg.norm(trial.sph_grad) ** 2 <= (1.0 - 1e-4 * alpha) * gn * gn:
                    ev, accepted = trial, True
                    break
                alpha *= 0.5
        if not accepted:
            ev = _energy_steps(sample, h, ev, opts, sign, 10)
    return ev if np.linalg.norm(ev.sph_grad) <= target else None


def find_critical_points(sample: FieldSample, h: float, opts: FinderOptions | None = None,
                         seed: int = 0) -> Census:
    """Multistart search for critical points on the sphere.

    The starts are ``+u``, ``-u`` and ``opts.starts`` uniform points.  The
    result is a lower bound on the true set.  It is flagged saturated
    when the last half of the random starts found nothing new.
    """
    opts = opts or FinderOptions()
    if opts.starts < 2:
        raise DomainError("need at least two random starts")
    N = sample.N
    u = field_direction(N)
    starts = [u, -u]
    for k in range(opts.starts):
        v = make_rng(seed, 0x57A27, sample.seed, k).standard_normal(N)
        starts.append(v / np.linalg.norm(v))
    points: list[CriticalPoint] = []
    failed = 0
    last_new = -1
    for k, s in enumerate(starts):
        ev = _newton(sample, h, s, opts, ascend=(k % 2 == 0))
        if ev is None:
            failed += 1
            continue
        if any(float(p.sigma @ ev.sigma) > opts.dedup_cos for p in points):
            continue
        points.append(_classify(ev, N, opts))
        last_new = k
    points.sort(key=lambda p: -p.energy)
    half = opts.starts // 2
    saturated = last_new < len(starts) - half
    return Census(points, saturated, failed, N)


@dataclass(frozen=True)
class LandscapeReport:
    """Aggregate statistics at the argmax over many samples."""

    model: str
    h: float
    N: int
    regime: str
    samples: int
    count_distribution: dict[int, int]
    two_point_fraction: float
    saturated_fraction: float
    mean: dict[str, float]
    sd: dict[str, float]
    predictions: dict[str, float] | None
    deltas: dict[str, float] | None
    annealed_rate: float | None


_AT_MAX = ("energy", "overlap", "radial_h", "lambda_max")


def landscape_report(censuses: list[Census], model: MixedModel, h: float) -> LandscapeReport:
    if not censuses:
        raise DomainError("need at least one sample")
    N = censuses[0].N
    counts = Counter(len(c.points) for c in censuses)
    two = sum(1 for c in censuses
              if len(c.points) == 2 and sorted(p.index for p in c.points) == [0, N - 1])
    tops = [c.points[0] for c in censuses if c.points]
    mean = {k: float(np.mean([getattr(p, k) for p in tops])) for k in _AT_MAX}
    sd = {k: float(np.std([getattr(p, k) for p in tops], ddof=1)) if len(tops) > 1 else 0.0
          for k in _AT_MAX}
    regime = classify(model, h)
    preds = deltas = rate = None
    if regime is Regime.TRIVIAL:
        tp: TrivialPredictions = trivial_predictions(model, h)
        preds = {"energy": tp.gs_energy, "overlap": tp.overlap,
                 "radial_h": tp.radial_h, "lambda_max": tp.lambda_max}
        deltas = {k: mean[k] - preds[k] for k in _AT_MAX}
    else:
        rate = annealed_rate(model, h)
    return LandscapeReport(
        model=str(model), h=h, N=N, regime=regime.value, samples=len(censuses),
        count_distribution=dict(sorted(counts.items())),
        two_point_fraction=two / len(censuses),
        saturated_fraction=sum(c.saturated for c in censuses) / len(censuses),
        mean=mean, sd=sd, predictions=preds, deltas=deltas, annealed_rate=rate,
    )


def report_to_json(report: LandscapeReport) -> str:
    d = dict(report.__dict__)
    d["count_distribution"] = {str(k): v for k, v in report.count_distribution.items()}
    return json.dumps(d)


POINT_FIELDS = ("sigma_hash", "energy", "overlap", "radial", "index", "lambda_max", "grad_norm")


def point_row(p: CriticalPoint) -> list:
    return [p.sigma_hash, p.energy, p.overlap, p.radial, p.index, p.lambda_max, p.grad_norm]


@dataclass(frozen=True)
class CovarianceRow:
    quantity: str
    empirical: float
    exact: float
    se: float

    @property
    def z(self) -> float:
        return (self.empirical - self.exact) / self.se if self.se > 0 else math.inf


def covariance_selftest(model: MixedModel, N: int, samples: int, seed: int) -> list[CovarianceRow]:
    """Monte Carlo check of the joint covariances of ``H`` and its derivatives.

    Evaluated at ``sigma = e_N`` in the standard basis: tangent directions
    are coordinates ``1..N-1`` and the radial direction is coordinate ``N``.
    Two extra off-diagonal rows check the Kronecker structure.
    """
    if N < 3:
        raise DomainError("need N >= 3")
    xi, xp, xpp = model.xi1, model.xi1p, model.xi1pp
    sigma = np.zeros(N)
    sigma[-1] = 1.0
    rows = {k: [] for k in ("H", "d1", "d2", "d11", "d12", "dr")}
    for i in range(samples):
        val, grad, hess = _contract(sample_field(model, N, seed, i), sigma)
        rows["H"].append(val)
        rows["d1"].append(grad[0])
        rows["d2"].append(grad[1])
        rows["d11"].append(hess[0, 0])
        rows["d12"].append(hess[0, 1])
        rows["dr"].append(grad[-1])
    v = {k: np.asarray(a) for k, a in rows.items()}
    spec = [
        ("E[H H]", "H", "H", N * xi),
        ("E[d_i H  H]", "d1", "H", 0.0),
        ("E[d_ij H  H]", "d11", "H", 0.0),
        ("E[d_i H  d_l H]", "d1", "d1", N * xp),
        ("E[d_ij H  d_l H]", "d11", "d1", 0.0),
        ("E[d_ij H  d_lk H]", "d11", "d11", 2.0 * N * xpp),
        ("E[d_r H  d_r H]", "dr", "dr", N * (xp + xpp)),
        ("E[H  d_r H]", "H", "dr", N * xp),
        ("E[d_i H  d_r H]", "d1", "dr", 0.0),
        ("E[d_ij H  d_r H]", "d11", "dr", 0.0),
        ("E[d_i H  d_l H], i!=l", "d1", "d2", 0.0),
        ("E[d_ij H  d_ij H], i!=j", "d12", "d12", N * xpp),
    ]
    out = []
    for name, a, b, exact in spec:
        prod = v[a] * v[b]
        out.append(CovarianceRow(name, float(prod.mean()), exact,
                                 float(prod.std(ddof=1) / math.sqrt(samples))))
    return out
