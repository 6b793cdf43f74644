"""Small statistical helpers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054  # two-sided 95% normal quantile


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes out of range")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class BinomialEstimate:
    """A seeded binomial estimate with its Wilson 95% interval."""

    successes: int
    n: int

    @property
    def point(self) -> float:
        return self.successes / self.n

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.n)

    @property
    def lower(self) -> float:
        return self.interval[0]

    @property
    def upper(self) -> float:
        return self.interval[1]


def covariance_se(n11: int, na: int, nb: int, n: int) -> float:
    """Delta-method standard error of cov-hat = p11_hat - pa_hat*pb_hat.

    Uses the multinomial covariance of the three indicator means with
    plug-in proportions.
    """
    p11 = n11 / n
    pa = na / n
    pb = nb / n
    # gradient of g(pa, pb, p11) = p11 - pa*pb
    ga, gb, g11 = -pb, -pa, 1.0
    vaa = pa * (1 - pa)
    vbb = pb * (1 - pb)
    v11 = p11 * (1 - p11)
    cab = p11 - pa * pb
    ca11 = p11 * (1 - pa)
    cb11 = p11 * (1 - pb)
    var = (
        ga * ga * vaa
        + gb * gb * vbb
        + g11 * g11 * v11
        + 2 * ga * gb * cab
        + 2 * ga * g11 * ca11
        + 2 * gb * g11 * cb11
    )
    return math.sqrt(max(var, 0.0) / n)


def slope_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """Least-squares line fit.

    Returns (slope, intercept, slope standard error, R^2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("need at least 3 points")
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise ValueError("degenerate abscissae")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    dof = max(n - 2, 1)
    se = math.sqrt(ss_res / dof / sxx)
    return slope, intercept, se, r2
