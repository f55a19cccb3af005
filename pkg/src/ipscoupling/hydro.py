"""Macroscopic fluxes, Riemann entropy solutions and Monte Carlo comparison.

The entropy solution of a Riemann problem is read off the flux envelope:
the lower convex hull of the flux between the two densities when the left
density is smaller, the upper concave hull otherwise.  Walking the hull
from the left state to the right state, slopes are nondecreasing and
``u(x/t)`` takes the hull vertex whose neighbouring slopes bracket ``x/t``.
Hull segments that skip grid nodes are shocks (or contacts when the flux
is affine there); runs of single-cell segments form rarefaction fans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .measures import DEGENERACY, marginal, s2ep_c, s2ep_mean_square, s2ep_root
from .rates import RateTable, check_s2ep_product_condition, s2ep_rates

GRID = 2001


# ------------------------------------------------------------------ fluxes


def microscopic_current(table: RateTable, a: int, b: int):
    """Expected signed charge crossing the bond ``(x, x+1)`` per unit time."""
    fwd = table.rates(a, b, (1,)) if (1,) in table.displacements else []
    bwd = table.rates(b, a, (-1,)) if (-1,) in table.displacements else []
    zero = 0 * sum(fwd, 0) + 0 * sum(bwd, 0)
    return (sum((k * r for k, r in enumerate(fwd, 1)), zero)
            - sum((k * r for k, r in enumerate(bwd, 1)), zero))


def stp_flux(rho, p: float, q: float):
    """Stick-process flux ``(p - q) rho (1 + rho)``.

    Under the geometric product measure with mean ``rho`` the current
    ``p a(a+1)/2 - q b(b+1)/2`` has expectation ``(p - q) E[a(a+1)]/2`` and
    ``E[a(a+1)] = 2 rho (1 + rho)``.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("stick-process density must be nonnegative")
    return (p - q) * rho * (1.0 + rho)


@dataclass(frozen=True)
class FluxModel:
    value: Callable
    slope: Callable
    curvature: Callable
    domain: tuple
    name: str = ""
    params: dict = field(default_factory=dict)


def stp_flux_model(p: float, q: float, rho_max: float = 50.0) -> FluxModel:
    return FluxModel(
        value=lambda r: stp_flux(r, p, q),
        slope=lambda r: (p - q) * (1.0 + 2.0 * np.asarray(r, dtype=float)),
        curvature=lambda r: np.full_like(np.asarray(r, dtype=float), 2.0 * (p - q)),
        domain=(0.0, rho_max), name="stp", params={"p": p, "q": q})


def _rate_gaps(table: RateTable) -> dict:
    r = {k: float(v) for k, v in s2ep_rates(table).items()}
    return {s: r[f"{s}_p"] - r[f"{s}_m"] for s in ("r00", "r10", "r01", "r11", "r2")}


def _require_product(table: RateTable) -> None:
    rep = check_s2ep_product_condition(table)
    if not rep.holds:
        raise ValueError(f"product invariant measures not available (residual {rep.residual:.3g})")


def s2ep_flux_model(table: RateTable) -> FluxModel:
    """Flux ``E[J]`` under the three-point product measures, with derivatives by the chain rule."""
    _require_product(table)
    c = s2ep_c(table)
    gaps = _rate_gaps(table)
    A, B, C = gaps["r00"], gaps["r10"], gaps["r01"]
    D = gaps["r11"] + 2.0 * gaps["r2"]

    def parts(rho):
        rho = np.asarray(rho, dtype=float)
        msq = s2ep_mean_square(rho, c)
        root = s2ep_root(rho, c)
        return rho, msq, rho / root, 4.0 * c * c / root**3

    def value(rho):
        rho, msq, _, _ = parts(rho)
        return (A * (1 - msq) ** 2 + 0.5 * B * (1 - msq) * (msq + rho)
                + 0.5 * C * (1 - msq) * (msq - rho) + 0.25 * D * (msq**2 - rho**2))

    def slope(rho):
        rho, msq, d1, _ = parts(rho)
        d_msq = -2 * A * (1 - msq) + 0.5 * B * (1 - 2 * msq - rho) + 0.5 * C * (1 - 2 * msq + rho) + 0.5 * D * msq
        d_rho = 0.5 * (B - C) * (1 - msq) - 0.5 * D * rho
        return d_msq * d1 + d_rho

    def curvature(rho):
        rho, msq, d1, d2 = parts(rho)
        d_msq = -2 * A * (1 - msq) + 0.5 * B * (1 - 2 * msq - rho) + 0.5 * C * (1 - 2 * msq + rho) + 0.5 * D * msq
        return (2 * A - B - C + 0.5 * D) * d1**2 + (C - B) * d1 - 0.5 * D + d_msq * d2

    return FluxModel(value, slope, curvature, (-1.0, 1.0), "s2ep", {"c": c})


def s2ep_flux(rho, table: RateTable):
    return s2ep_flux_model(table).value(rho)


def s2ep_flux_second_grouped(rho, table: RateTable):
    """Second derivative in the grouped-coefficient form, kept as an independent cross-check."""
    _require_product(table)
    c = s2ep_c(table)
    gaps = _rate_gaps(table)
    c2 = c * c
    if abs(4 * c * c - 1) < DEGENERACY:
        raise ValueError("grouped form is singular at 4c^2 = 1; use s2ep_flux_model(table).curvature")
    c1 = 2 * gaps["r00"] + 2 * c2 * gaps["r11"] + 4 * c2 * gaps["r2"]
    cc2 = gaps["r10"] + gaps["r01"]
    c3 = gaps["r10"] - gaps["r01"]
    rho = np.asarray(rho, dtype=float)
    root = s2ep_root(rho, c)
    return ((c1 - cc2) / (1 - 4 * c2)
            - 2 * c2 * (2 * c1 - (1 + 4 * c2) * cc2) / ((1 - 4 * c2) * root**3)
            - c3 * rho / root * (0.5 + c2 / root**2))


def thermal_flux(rho, a: float, b: float):
    """Thermal-bath flux, normalised so that it vanishes at ``rho = +-1``."""
    c2 = b * b * (a**-2 + a**2) / 2
    root = s2ep_root(rho, math.sqrt(c2))
    k = (a**-2 - a**2) / 2
    rho = np.asarray(rho, dtype=float)
    if abs(4 * c2 - 1) < DEGENERACY:
        return k * (np.square(rho) - 1.0) / 2
    return k * (np.square(rho) - 1.0 - (root - 1.0) / (1 - 4 * c2))


def thermal_flux_second(rho, a: float, b: float):
    c2 = b * b * (a**-2 + a**2) / 2
    root = s2ep_root(rho, math.sqrt(c2))
    return (a**-2 - a**2) * (1 - 2 * c2 / root**3)


def _support(table: RateTable, rho: float, vmax: int):
    """Marginal restricted to values whose mass is not negligible (below 1e-30 relative)."""
    vals, p = marginal(table, rho, vmax)
    keep = p > 1e-30 * p.max()
    return vals[keep], p[keep]


def _current_matrix(table: RateTable, vals: np.ndarray) -> np.ndarray:
    """``microscopic_current`` over ``vals x vals`` from the dense rate arrays."""
    vals = [int(v) for v in vals]
    fwd = table.dense(vals, (1,))
    bwd = table.dense(vals, (-1,))
    return fwd @ np.arange(fwd.shape[2]) - (bwd @ np.arange(bwd.shape[2])).T


def flux_from_measure(table: RateTable, rho: float, samples: int, rng: np.random.Generator,
                      vmax: int = 400) -> tuple[float, float]:
    """Monte Carlo mean of the microscopic current under the product measure, with its standard error."""
    vals, p = _support(table, rho, vmax)
    p = p / p.sum()
    cur = _current_matrix(table, vals)
    ia = rng.choice(len(vals), size=samples, p=p)
    ib = rng.choice(len(vals), size=samples, p=p)
    j = cur[ia, ib]
    return float(j.mean()), float(j.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0


def flux_exact_from_measure(table: RateTable, rho: float, vmax: int = 400) -> float:
    """Exact expectation of the current under the (truncated) product measure."""
    vals, p = _support(table, rho, vmax)
    return float(p @ _current_matrix(table, vals) @ p)


@dataclass(frozen=True)
class InflexionReport:
    count: int
    locations: list


def inflexion_report(flux: FluxModel, grid=None) -> InflexionReport:
    lo, hi = flux.domain
    if grid is None:
        grid = np.linspace(lo, hi, GRID)[1:-1]
    grid = np.asarray(grid, dtype=float)
    d2 = flux.curvature(grid)
    locs = []
    for i in np.flatnonzero(np.sign(d2[:-1]) * np.sign(d2[1:]) < 0):
        locs.append(float(brentq(lambda r: float(flux.curvature(r)), grid[i], grid[i + 1])))
    return InflexionReport(len(locs), locs)


# ---------------------------------------------------------------- Riemann


@dataclass(frozen=True)
class RiemannProblem:
    lam: float
    rho: float
    flux: FluxModel


@dataclass(frozen=True)
class Wave:
    kind: str  # "shock", "contact" or "rarefaction"
    left: float  # state on the left of the wave
    right: float
    speed: float  # shock/contact speed; for fans the left edge
    speed_right: float  # for fans the right edge, else equal to speed


@dataclass
class EntropySolution:
    problem: RiemannProblem
    vertices: np.ndarray
    slopes: np.ndarray
    waves: list

    def __call__(self, speed):
        speed = np.asarray(speed, dtype=float)
        return self.vertices[np.searchsorted(self.slopes, speed, side="left")]

    def profile(self, x, t: float):
        return self(np.asarray(x, dtype=float) / t)

    @property
    def shocks(self) -> list:
        return [w for w in self.waves if w.kind == "shock"]

    @property
    def jumps(self) -> list:
        return [w for w in self.waves if w.kind in ("shock", "contact")]


def _envelope(u: np.ndarray, vals: np.ndarray) -> list:
    """Indices of the hull whose slopes are nondecreasing along the given order."""
    hull = []
    for i in range(len(u)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b unless slope(a, b) < slope(b, i); both u-gaps share a sign
            if (vals[b] - vals[a]) * (u[i] - u[b]) >= (vals[i] - vals[b]) * (u[b] - u[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def riemann_solve(problem: RiemannProblem, n: int = GRID, tol: float = 1e-10) -> EntropySolution:
    lam, rho = float(problem.lam), float(problem.rho)
    lo, hi = problem.flux.domain
    for v in (lam, rho):
        if not lo - 1e-12 <= v <= hi + 1e-12:
            raise ValueError(f"state {v} outside flux domain {problem.flux.domain}")
    if lam == rho:
        return EntropySolution(problem, np.array([lam]), np.array([]), [])
    if n < GRID:
        raise ValueError(f"flux grid needs at least {GRID} points")
    u = np.linspace(lam, rho, n)
    vals = np.asarray(problem.flux.value(u), dtype=float)
    h = _envelope(u, vals)
    verts = u[h]
    slopes = np.diff(vals[h]) / np.diff(u[h])
    scale = max(1.0, float(np.abs(vals).max()))
    waves: list = []
    fan_start = None
    for j in range(len(h) - 1):
        i0, i1 = h[j], h[j + 1]
        if i1 - i0 == 1:
            if fan_start is None:
                fan_start = j
            continue
        if fan_start is not None:
            waves.append(Wave("rarefaction", verts[fan_start], verts[j], slopes[fan_start], slopes[j - 1]))
            fan_start = None
        line = vals[i0] + slopes[j] * (u[i0:i1 + 1] - u[i0])
        kind = "shock" if np.abs(vals[i0:i1 + 1] - line).max() > tol * scale else "contact"
        waves.append(Wave(kind, verts[j], verts[j + 1], slopes[j], slopes[j]))
    if fan_start is not None:
        waves.append(Wave("rarefaction", verts[fan_start], verts[-1], slopes[fan_start], slopes[-1]))
    return EntropySolution(problem, verts, slopes, waves)


# ------------------------------------------------------- finite volumes


class _RangeExtrema:
    """Sparse tables for min/max of sampled flux values over index ranges."""

    def __init__(self, values: np.ndarray):
        self.mins = [values]
        self.maxs = [values]
        span = 1
        while 2 * span <= len(values):
            m, M = self.mins[-1], self.maxs[-1]
            self.mins.append(np.minimum(m[:-span], m[span:]))
            self.maxs.append(np.maximum(M[:-span], M[span:]))
            span *= 2

    def query(self, i0: np.ndarray, i1: np.ndarray):
        """Min and max over ``[i0, i1]``; callers guarantee ``i0 <= i1``."""
        length = i1 - i0 + 1
        lev = np.floor(np.log2(np.maximum(length, 1))).astype(int)
        mn = np.empty(len(i0))
        mx = np.empty(len(i0))
        for L in np.unique(lev):
            sel = lev == L
            a, b = i0[sel], i1[sel] - (1 << L) + 1
            mn[sel] = np.minimum(self.mins[L][a], self.mins[L][b])
            mx[sel] = np.maximum(self.maxs[L][a], self.maxs[L][b])
        return mn, mx


def godunov(flux: FluxModel, lam: float, rho: float, t: float = 1.0, cells: int = 4000,
            cfl: float = 0.4, samples: int = 20001):
    """First-order Godunov scheme for Riemann data; returns cell centres and values at time ``t``.

    The grid covers the range of characteristic speeds times ``t`` plus a
    margin, in a frame moving at the mid speed (flux minus ``s u``), so that
    resolution is spent where the waves are and the time step stays large.
    """
    lo, hi = min(lam, rho), max(lam, rho)
    ug = np.linspace(lo, hi, samples) if hi > lo else np.array([lo, lo + 1e-12])
    speeds = np.asarray(flux.slope(ug), dtype=float)
    s0, s1 = float(speeds.min()), float(speeds.max())
    shift = 0.5 * (s0 + s1)

    def moving_flux(v):
        return np.asarray(flux.value(v), dtype=float) - shift * v

    half = (0.6 * (s1 - s0) + 0.1) * t
    dx = 2.0 * half / cells
    y = -half + dx * (np.arange(cells) + 0.5)
    u = np.where(y < 0, lam, rho).astype(float)
    table = _RangeExtrema(moving_flux(ug))
    du = (ug[-1] - ug[0]) / (len(ug) - 1)
    dt = cfl * dx / max(0.5 * (s1 - s0), 1e-3)
    now = 0.0
    while now < t - 1e-14:
        step = min(dt, t - now)
        ul = np.concatenate([[u[0]], u])
        ur = np.concatenate([u, [u[-1]]])
        a, b = np.minimum(ul, ur), np.maximum(ul, ur)
        ha, hb = moving_flux(a), moving_flux(b)
        mn, mx = np.minimum(ha, hb), np.maximum(ha, hb)
        i0 = np.clip(np.ceil((a - ug[0]) / du - 1e-9).astype(int), 0, len(ug) - 1)
        i1 = np.clip(np.floor((b - ug[0]) / du + 1e-9).astype(int), 0, len(ug) - 1)
        inner = i0 <= i1
        if inner.any():
            qmn, qmx = table.query(i0[inner], i1[inner])
            mn[inner] = np.minimum(mn[inner], qmn)
            mx[inner] = np.maximum(mx[inner], qmx)
        f = np.where(ul <= ur, mn, mx)
        u = u - step / dx * (f[1:] - f[:-1])
        now += step
    return y + shift * t, u


def sup_distance_away_from_jumps(sol: EntropySolution, x: np.ndarray, u: np.ndarray, t: float = 1.0,
                                 exclude: float = 0.05) -> float:
    """Sup-norm gap on ``x`` outside ``exclude`` of every shock or contact at time ``t``."""
    keep = np.ones(len(x), dtype=bool)
    for w in sol.jumps:
        keep &= np.abs(x - w.speed * t) > exclude
    if not keep.any():
        return 0.0
    return float(np.abs(sol.profile(x[keep], t) - u[keep]).max())


# -------------------------------------------------------------- profiles


def compare_profiles(x_over_N: np.ndarray, density: np.ndarray, sol: EntropySolution, t: float,
                     half_width: float) -> float:
    """Trapezoid L1 distance between a sampled profile and ``u(x/t)`` on ``|x| <= half_width``."""
    x = np.asarray(x_over_N, dtype=float)
    keep = np.abs(x) <= half_width
    if keep.sum() < 2:
        raise ValueError("profile has fewer than two points inside the comparison interval")
    x, d = x[keep], np.asarray(density, dtype=float)[keep]
    return float(np.trapezoid(np.abs(d - sol.profile(x, t)), x))


def front_positions(x_over_N: np.ndarray, density: np.ndarray, sol: EntropySolution, t: float,
                    window: float = 0.25) -> list:
    """Empirical position of each predicted jump: the crossing of the mid level
    nearest to the prediction, searched within ``window``."""
    x = np.asarray(x_over_N, dtype=float)
    d = np.asarray(density, dtype=float)
    out = []
    for w in sol.jumps:
        pred = w.speed * t
        mid = 0.5 * (w.left + w.right)
        sel = np.flatnonzero(np.abs(x - pred) <= window)
        best = None
        for i in sel[:-1]:
            s0, s1 = d[i] - mid, d[i + 1] - mid
            if s0 == 0 or s0 * s1 < 0:
                xc = x[i] if s0 == 0 else x[i] + (x[i + 1] - x[i]) * s0 / (s0 - s1)
                if best is None or abs(xc - pred) < abs(best - pred):
                    best = xc
        out.append((pred, best))
    return out


def mc_window(sol: EntropySolution, N: int, t: float) -> int:
    """Half-width of the Monte Carlo window in sites: ``2N``, widened so that every wave stays inside."""
    speeds = [abs(w.speed) for w in sol.waves] + [abs(w.speed_right) for w in sol.waves]
    reach = max(speeds, default=0.0) * t
    return int(math.ceil(max(2.0, 1.5 * reach) * N))


@dataclass
class RiemannRun:
    x_over_N: np.ndarray
    density: np.ndarray
    entropy: np.ndarray
    l1: float
    fronts: list
    solution: EntropySolution
    half_width: float
    replicas: int
    block: int
    t: float = 1.0


def riemann_experiment(table: RateTable, flux: FluxModel, lam: float, rho: float, N: int, t: float,
                       replicas: int, seed: int, block: int = 100, jobs: int = 1,
                       rate_mode: str = "local") -> RiemannRun:
    """Replica-averaged profile at time ``N t`` versus the entropy solution."""
    from .simulate import empirical_profile, map_replicas, riemann_initial, run

    sol = riemann_solve(RiemannProblem(lam, rho, flux))
    half = mc_window(sol, N, t)
    L = 2 * half + 1

    def one(r):
        eta0 = riemann_initial(table, lam, rho, L, half, seed, r)
        tr = run(table, eta0, N * t, seed=seed, replica=r, boundary="reservoir",
                 densities=(lam, rho), rate_mode=rate_mode)
        return tr.final.astype(float)

    finals = map_replicas(one, replicas, jobs)
    mean = np.mean(finals, axis=0)
    xs, dens = empirical_profile(mean, N, block, origin=half)
    hw = 0.8 * half / N
    l1 = compare_profiles(xs, dens, sol, t, hw)
    fronts = front_positions(xs, dens, sol, t)
    return RiemannRun(xs, dens, sol.profile(xs, t), l1, fronts, sol, hw, replicas, block, t)


def write_svg(path, run: RiemannRun, title: str = "") -> None:
    """Static overlay of the empirical and entropy profiles (deterministic output)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ipscoupling"
    fig, ax = plt.subplots(figsize=(7, 4))
    fine = np.linspace(run.x_over_N.min(), run.x_over_N.max(), 4001)
    ax.plot(fine, run.solution.profile(fine, run.t), lw=1.5, label="entropy solution")
    ax.plot(run.x_over_N, run.density, ".", ms=3, label="Monte Carlo")
    ax.axvspan(-run.half_width, run.half_width, color="0.9", zorder=0)
    ax.set_xlabel("x / N")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
