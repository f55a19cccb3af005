"""One-site marginals of product invariant measures, indexed by density."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .rates import RateTable, s2ep_rates

DEGENERACY = 1e-10


def s2ep_c(table: RateTable) -> float:
    r = s2ep_rates(table)
    num = float(r["r00_p"] + r["r00_m"])
    den = float(r["r11_p"] + r["r11_m"])
    if num <= 0 or den <= 0:
        raise ValueError("three-point marginals need positive r00 and r11 sums")
    return math.sqrt(num / den)


def s2ep_root(rho, c: float):
    """Square-root term ``sqrt(4c^2 + rho^2 (1 - 4c^2))`` shared by the charge moments."""
    c4 = 4.0 * c * c
    return np.sqrt(c4 + np.square(rho) * (1.0 - c4))


def s2ep_mean_square(rho, c: float):
    """Mean squared charge as a function of mean charge."""
    c4 = 4.0 * c * c
    if abs(c4 - 1.0) < DEGENERACY:
        return (np.square(rho) + 1.0) / 2.0
    return (s2ep_root(rho, c) - c4) / (1.0 - c4)


def s2ep_fugacity(rho: float, c: float) -> float:
    """Auxiliary parameter ``y > 0`` solving the mean-charge equation (root bracketing in ``log y``)."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho={rho} outside (-1, 1)")

    def f(t):
        y = math.exp(t)
        return c * (y - 1.0 / y) / (1.0 + c * y + c / y) - rho

    lo, hi = -1.0, 1.0
    while f(lo) > 0:
        lo *= 2.0
    while f(hi) < 0:
        hi *= 2.0
    return math.exp(brentq(f, lo, hi, xtol=1e-14, rtol=1e-14))


def s2ep_marginal_from_fugacity(y: float, c: float) -> np.ndarray:
    z = 1.0 + c * y + c / y
    return np.array([c / y, 1.0, c * y]) / z


def s2ep_marginal(rho: float, c: float) -> np.ndarray:
    """Probabilities of ``-1, 0, 1``."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho={rho} outside [-1, 1]")
    msq = float(s2ep_mean_square(rho, c))
    p = np.array([(msq - rho) / 2.0, 1.0 - msq, (msq + rho) / 2.0])
    return np.clip(p, 0.0, 1.0)


def geometric_marginal(rho: float, vmax: int) -> np.ndarray:
    """Geometric law with mean ``rho`` truncated at ``vmax`` (tail mass put on ``vmax``)."""
    if rho < 0:
        raise ValueError(f"rho={rho} must be nonnegative")
    if rho == 0:
        p = np.zeros(vmax + 1)
        p[0] = 1.0
        return p
    ratio = rho / (1.0 + rho)
    p = (1.0 - ratio) * ratio ** np.arange(vmax + 1)
    p[-1] += ratio ** (vmax + 1)
    return p


def zrp_marginal(g, rho: float, vmax: int) -> np.ndarray:
    """``P(n) ~ f^n / prod_{i<=n} g(i)``, with the fugacity ``f`` tuned to mean ``rho``."""
    if rho < 0:
        raise ValueError(f"rho={rho} must be nonnegative")
    logw = np.zeros(vmax + 1)
    for n in range(1, vmax + 1):
        gn = g(n)
        if gn <= 0:
            raise ValueError("zero-range rates must be positive for the product measure")
        logw[n] = logw[n - 1] - math.log(gn)

    def law(logf):
        lw = logw + logf * np.arange(vmax + 1)
        w = np.exp(lw - lw.max())
        return w / w.sum()

    if rho == 0:
        return law(-700.0)
    n = np.arange(vmax + 1)
    if rho >= vmax:
        raise ValueError(f"rho={rho} too large for truncation {vmax}")
    t = brentq(lambda lf: law(lf) @ n - rho, -700.0, 700.0, xtol=1e-13)
    return law(t)


def marginal(table: RateTable, rho: float, vmax: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """``(values, probabilities)`` of the one-site law with mean ``rho``."""
    fam = table.family
    if fam == "sep":
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"rho={rho} outside [0, 1]")
        return np.array([0, 1]), np.array([1.0 - rho, rho])
    if fam == "stp":
        return np.arange(vmax + 1), geometric_marginal(rho, vmax)
    if fam == "zrp":
        # departure rate is proportional to g; the constant is absorbed by the fugacity
        def g(n):
            return sum(float(table.total(n, 0, z)) for z in table.displacements)
        return np.arange(vmax + 1), zrp_marginal(g, rho, vmax)
    if fam == "s2ep":
        return np.array([-1, 0, 1]), s2ep_marginal(rho, s2ep_c(table))
    raise ValueError(f"no explicit product measure for family {fam!r}")


def sample_product_measure(table: RateTable, rho: float, size: int, rng: np.random.Generator,
                           vmax: int = 200) -> np.ndarray:
    vals, p = marginal(table, rho, vmax)
    return vals[rng.choice(len(vals), size=size, p=p / p.sum())].astype(np.int64)
