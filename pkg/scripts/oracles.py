"""Independent reference values frozen into the test suite.

Nothing here calls the Kac-Rice or Hermite code paths.  Run with
``python scripts/oracles.py`` to regenerate the numbers.

* Quadratic models (p = 2): the critical points of ``s^T M s + N h s_1``
  on the sphere are the roots of a secular equation.  Counting them per
  sample gives an exact Monte Carlo estimate of the expected count.
* Folded Gaussian: for ``N = 2`` the shifted determinant is ``|x + Z|``
  with ``Z ~ N(0, 1/2)``.
"""

import math

import numpy as np
from scipy import optimize, stats


def secular_count(M, N, h):
    m, V = np.linalg.eigh(M)
    w2 = (V[0, :] * N * h) ** 2
    poles = 2.0 * m

    def f(lam):
        return np.sum(w2 / (poles - lam) ** 2) - 1.0

    count = 2  # one root beyond each extreme pole
    for a, b in zip(poles[:-1], poles[1:]):
        r = optimize.minimize_scalar(f, bounds=(a, b), method="bounded",
                                     options={"xatol": 1e-13 * (b - a)})
        if r.fun < 0:
            count += 2
    return count


def quadratic_count(N, h, samples, seed):
    rng = np.random.default_rng(seed)
    out = np.empty(samples)
    for i in range(samples):
        J = rng.standard_normal((N, N))
        out[i] = secular_count(math.sqrt(N) * (J + J.T) / 2.0, N, h)
    return out.mean(), out.std(ddof=1) / math.sqrt(samples)


def folded_gaussian_mean(mu, var):
    sd = math.sqrt(var)
    return sd * math.sqrt(2 / math.pi) * math.exp(-mu * mu / (2 * var)) + mu * (2 * stats.norm.cdf(mu / sd) - 1)


if __name__ == "__main__":
    for h in (0.3, 1.0):
        mean, se = quadratic_count(10, h, 20000, seed=0)
        print(f"quadratic model N=10 h={h}: mean count {mean:.6f} +- {se:.6f}")
    for x in (0.0, 1.0):
        print(f"folded gaussian x={x}: {folded_gaussian_mean(x, 0.5):.10f}")
