"""Event-driven simulation of single and coupled processes on a 1D window.

Every bond ``(x, x + z)`` owns a Poisson clock.  When it rings, one uniform
``U`` picks the move by cumulative partition of ``[0, rate)``: over ``k`` for a
single process, over the staircase entries for a coupled pair (the coupled
total equals the larger marginal total, so each marginal sees its own rates).

Two clock rates are available:

* ``"sup"``: a constant rate per displacement, the supremum of the total
  jump rate over the value window; rings that select nothing are no-ops.
* ``"local"`` (default): the current total rate of the bond.  Clocks of bonds
  touching a changed site are redrawn, which is exact by memorylessness and
  avoids wasting rings on unbounded-rate models such as the stick process.

Random numbers come from :mod:`ipscoupling.rng`: the key is
``(seed, replica)`` and the counter is ``(bond, draw index)``; the draw that
schedules a ring also carries the ring's selection uniform and the uniform
used to refresh a reservoir value.

Reservoirs are virtual sites holding a fresh draw from the boundary product
measure at every ring.  In ``"sup"`` mode this is plain thinning; in
``"local"`` mode the bond rings at the reservoir-averaged rate and the
outside value is drawn from the rate-tilted law at the ring.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .measures import marginal
from .rates import RateTable
from .rng import block, replica_key

BOUNDARIES = ("periodic", "closed", "reservoir")
RATE_MODES = ("local", "sup")

# stats slots
EVENTS, MOVES_XI, MOVES_ZETA, ORDER_VIOL, FPLUS_UP, S0, SMAX, S_VIOL, OVERFLOW, FIRST_VIOL_T, J_XI, J_ZETA = range(12)
NSTATS = 12


# ------------------------------------------------------------------ kernel


@njit(cache=True, inline="always")
def _tree_set(tt, ti, p, i, v):
    j = p + i
    tt[j] = v
    j //= 2
    while j >= 1:
        a, b = 2 * j, 2 * j + 1
        if tt[a] <= tt[b]:
            tt[j], ti[j] = tt[a], ti[a]
        else:
            tt[j], ti[j] = tt[b], ti[b]
        j //= 2


@njit(cache=True)
def _endpoint_values(b, arr, bx, by, virt):
    a = virt[b] if bx[b] < 0 else arr[bx[b]]
    c = virt[b] if by[b] < 0 else arr[by[b]]
    return a, c


@njit(cache=True)
def _bond_rate(b, low, up, coupled, bx, by, bz, vlow, vup, totals, lo, sup_rate, rate_mode):
    if rate_mode == 1:
        return sup_rate[bz[b]]
    a, c = _endpoint_values(b, low, bx, by, vlow)
    r = totals[bz[b], a - lo, c - lo]
    if coupled:
        a2, c2 = _endpoint_values(b, up, bx, by, vup)
        r2 = totals[bz[b], a2 - lo, c2 - lo]
        if r2 > r:
            r = r2
    return r


@njit(cache=True)
def _reservoir_pick(b, x, low, up, coupled, bx, by, bz, vlow, vup, totals, lo, sup_rate, pmf):
    """Local-mode reservoir bond: the outside value is a fresh draw at every ring.

    With ``x`` uniform on ``[0, sum_a pmf(a) rate(a))`` this stores the value
    ``a`` drawn from the rate-tilted law and returns ``x`` rescaled to be uniform
    on ``[0, rate(a))``.  With ``x < 0`` it only returns the averaged rate.
    """
    cum = 0.0
    last = -1
    last_w = 0.0
    last_cum = 0.0
    for i in range(pmf.shape[0]):
        if pmf[i] <= 0.0:
            continue
        vlow[b] = lo + i
        vup[b] = lo + i
        w = pmf[i] * _bond_rate(b, low, up, coupled, bx, by, bz, vlow, vup, totals, lo, sup_rate, 0)
        if w <= 0.0:
            continue
        if 0.0 <= x < cum + w:
            return (x - cum) / pmf[i]
        last, last_w, last_cum = i, w, cum
        cum += w
    if x < 0.0:
        return cum
    if last < 0:
        return -1.0
    # rounding left x at the top edge; take the last value with positive weight
    vlow[b] = lo + last
    vup[b] = lo + last
    return min(x - last_cum, last_w * (1.0 - 1e-12)) / pmf[last]


@njit(cache=True)
def _rate(b, low, up, coupled, bx, by, bz, bres, vlow, vup, totals, lo, sup_rate, rate_mode, pmf):
    if rate_mode == 0 and bres[b] >= 0:
        return _reservoir_pick(b, -1.0, low, up, coupled, bx, by, bz, vlow, vup, totals, lo,
                               sup_rate, pmf[bres[b]])
    return _bond_rate(b, low, up, coupled, bx, by, bz, vlow, vup, totals, lo, sup_rate, rate_mode)


@njit(cache=True)
def _schedule(b, t, rate, k0, k1, cnt, pend_u, pend_v, tt, ti, p):
    u0, u1, u2, _ = block(k0, k1, b, cnt[b])
    cnt[b] += 1
    pend_u[b] = u1
    pend_v[b] = u2
    if rate > 0.0:
        _tree_set(tt, ti, p, b, t - math.log1p(-u0) / rate)
    else:
        _tree_set(tt, ti, p, b, np.inf)


@njit(cache=True)
def _select_single(row, x):
    cum = 0.0
    for k in range(1, row.shape[0]):
        cum += row[k]
        if x < cum:
            return k
    return 0


@njit(cache=True)
def _select_coupled(ra, rc, x, sa, sc):
    n = ra.shape[0]
    acc = 0.0
    for k in range(n - 1, -1, -1):
        sa[k] = acc
        acc += ra[k]
    acc = 0.0
    for k in range(n - 1, -1, -1):
        sc[k] = acc
        acc += rc[k]
    k = 0
    l = 0
    prev = max(sa[0], sc[0])
    cum = 0.0
    while (k < n and sa[k] > 0.0) or (l < n and sc[l] > 0.0):
        ska = sa[k] if k < n else 0.0
        scl = sc[l] if l < n else 0.0
        if ska >= scl:
            k += 1
        else:
            l += 1
        cur = max(sa[k] if k < n else 0.0, sc[l] if l < n else 0.0)
        cum += prev - cur
        if x < cum:
            return k, l
        prev = cur
    return 0, 0


@njit(cache=True)
def _fplus_pair(a, b, c, d):
    return max(a - c, 0) + max(b - d, 0)


@njit(cache=True)
def _sup_abs_running(low, up):
    s = 0
    m = 0
    for i in range(low.shape[0]):
        s += low[i] - up[i]
        if abs(s) > m:
            m = abs(s)
    return m


@njit(cache=True)
def _sample_cdf(cdf, u, lo):
    return lo + np.searchsorted(cdf, u, side="right")


@njit(cache=True, nogil=True)
def _kernel(rates, totals, zs, lo, low, up, coupled, bx, by, bz, bres, vlow, vup, cdf, pmf,
            site_ptr, site_bonds, sup_rate, rate_mode, T, rec_times, k0, k1,
            monitor, ordered, low_rec, up_rec, j_rec, stats):
    nb = bx.shape[0]
    nv = totals.shape[1]
    hi = lo + nv - 1
    p = 1
    while p < nb:
        p *= 2
    tt = np.full(2 * p, np.inf)
    ti = np.zeros(2 * p, dtype=np.int64)
    for i in range(p):
        ti[p + i] = i
    for j in range(p - 1, 0, -1):
        ti[j] = ti[2 * j]
    cnt = np.zeros(nb, dtype=np.uint64)
    pend_u = np.zeros(nb)
    pend_v = np.zeros(nb)
    sa = np.zeros(rates.shape[3])
    sc = np.zeros(rates.shape[3])
    for b in range(nb):
        r = _rate(b, low, up, coupled, bx, by, bz, bres, vlow, vup, totals, lo, sup_rate, rate_mode, pmf)
        _schedule(b, 0.0, r, k0, k1, cnt, pend_u, pend_v, tt, ti, p)

    jx = 0
    jz = 0
    if coupled and monitor:
        stats[S0] = _sup_abs_running(low, up)
        stats[SMAX] = stats[S0]
    stats[FIRST_VIOL_T] = -1.0
    nrec = rec_times.shape[0]
    ri = 0
    touched = np.empty(2, dtype=np.int64)
    while True:
        t = tt[1]
        b = ti[1]
        while ri < nrec and rec_times[ri] < t and rec_times[ri] <= T:
            low_rec[ri, :] = low
            if coupled:
                up_rec[ri, :] = up
            j_rec[ri, 0] = jx
            j_rec[ri, 1] = jz
            ri += 1
        if t > T:
            break
        stats[EVENTS] += 1
        zi = bz[b]
        rate = _rate(b, low, up, coupled, bx, by, bz, bres, vlow, vup, totals, lo, sup_rate, rate_mode, pmf)
        x = pend_u[b] * rate
        if rate_mode == 0 and bres[b] >= 0:
            x = _reservoir_pick(b, x, low, up, coupled, bx, by, bz, vlow, vup, totals, lo,
                                sup_rate, pmf[bres[b]])
        a, c = _endpoint_values(b, low, bx, by, vlow)
        k = 0
        l = 0
        a2 = 0
        c2 = 0
        if coupled:
            a2, c2 = _endpoint_values(b, up, bx, by, vup)
            k, l = _select_coupled(rates[zi, a - lo, c - lo], rates[zi, a2 - lo, c2 - lo], x, sa, sc)
        else:
            k = _select_single(rates[zi, a - lo, c - lo], x)
        if c + k > hi or (coupled and c2 + l > hi):
            stats[OVERFLOW] = 1
            return ri
        if coupled:
            if _fplus_pair(a - k, c + k, a2 - l, c2 + l) > _fplus_pair(a, c, a2, c2):
                stats[FPLUS_UP] += 1
        nt = 0
        if k > 0:
            stats[MOVES_XI] += 1
            jx += k * zs[zi]
            if bx[b] >= 0:
                low[bx[b]] -= k
            if by[b] >= 0:
                low[by[b]] += k
        if l > 0:
            stats[MOVES_ZETA] += 1
            jz += l * zs[zi]
            if bx[b] >= 0:
                up[bx[b]] -= l
            if by[b] >= 0:
                up[by[b]] += l
        if k > 0 or l > 0:
            if bx[b] >= 0:
                touched[nt] = bx[b]
                nt += 1
            if by[b] >= 0:
                touched[nt] = by[b]
                nt += 1
        if bres[b] >= 0 and rate_mode == 1:
            v = _sample_cdf(cdf[bres[b]], pend_v[b], lo)
            vlow[b] = v
            vup[b] = v
        if coupled:
            if ordered:
                for s in range(nt):
                    if low[touched[s]] > up[touched[s]]:
                        stats[ORDER_VIOL] += 1
            if monitor and nt > 0:
                sm = _sup_abs_running(low, up)
                if sm > stats[SMAX]:
                    stats[SMAX] = sm
                if sm > stats[S0]:
                    stats[S_VIOL] += 1
                    if stats[FIRST_VIOL_T] < 0:
                        stats[FIRST_VIOL_T] = t
        # reschedule the fired bond, and in local mode every bond touching a changed site
        r = _rate(b, low, up, coupled, bx, by, bz, bres, vlow, vup, totals, lo, sup_rate, rate_mode, pmf)
        _schedule(b, t, r, k0, k1, cnt, pend_u, pend_v, tt, ti, p)
        if rate_mode == 0:
            for s in range(nt):
                site = touched[s]
                for q in range(site_ptr[site], site_ptr[site + 1]):
                    ob = site_bonds[q]
                    if ob != b:
                        r = _rate(ob, low, up, coupled, bx, by, bz, bres, vlow, vup, totals, lo,
                                  sup_rate, rate_mode, pmf)
                        _schedule(ob, t, r, k0, k1, cnt, pend_u, pend_v, tt, ti, p)
    while ri < nrec and rec_times[ri] <= T:
        low_rec[ri, :] = low
        if coupled:
            up_rec[ri, :] = up
        j_rec[ri, 0] = jx
        j_rec[ri, 1] = jz
        ri += 1
    stats[J_XI] = jx
    stats[J_ZETA] = jz
    return ri


# ------------------------------------------------------------ python side


@dataclass(frozen=True)
class Bonds:
    bx: np.ndarray
    by: np.ndarray
    bz: np.ndarray
    bres: np.ndarray
    site_ptr: np.ndarray
    site_bonds: np.ndarray


def build_bonds(L: int, zs, boundary: str) -> Bonds:
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary {boundary!r}; expected one of {BOUNDARIES}")
    bx, by, bz, bres = [], [], [], []
    for iz, z in enumerate(zs):
        starts = range(-abs(z), L + abs(z)) if boundary == "reservoir" else range(L)
        for x in starts:
            y = x + z
            if boundary == "periodic":
                bx.append(x), by.append(y % L), bz.append(iz), bres.append(-1)
                continue
            xin, yin = 0 <= x < L, 0 <= y < L
            if boundary == "closed" and not (xin and yin):
                continue
            if not (xin or yin):
                continue
            out = x if not xin else (y if not yin else None)
            bx.append(x if xin else -1)
            by.append(y if yin else -1)
            bz.append(iz)
            bres.append(-1 if out is None else (0 if out < 0 else 1))
    bx, by = np.array(bx, dtype=np.int64), np.array(by, dtype=np.int64)
    incident = [[] for _ in range(L)]
    for b, (x, y) in enumerate(zip(bx, by)):
        for s in {int(x), int(y)} - {-1}:
            incident[s].append(b)
    ptr = np.zeros(L + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(v) for v in incident])
    flat = np.array([b for v in incident for b in v], dtype=np.int64)
    return Bonds(bx, by, np.array(bz, dtype=np.int64), np.array(bres, dtype=np.int64), ptr, flat)


@dataclass
class Trajectory:
    times: np.ndarray
    lower: np.ndarray  # (records, L)
    current: np.ndarray  # cumulative sum of k * z at each record
    stats: dict
    T: float
    L: int
    boundary: str
    upper: np.ndarray | None = None
    current_upper: np.ndarray | None = None

    @property
    def final(self) -> np.ndarray:
        return self.lower[-1]


def _displacements_1d(table: RateTable) -> list[int]:
    if table.dim != 1:
        raise ValueError("simulation supports one-dimensional tables only")
    return [z[0] for z in table.displacements]


def _value_cap(table: RateTable, arrays, reservoir_laws, cap: int | None) -> int:
    if table.values.finite:
        return table.values.hi
    top = max(int(a.max()) for a in arrays)
    for vals, p in reservoir_laws:
        cdf = np.cumsum(p)
        top = max(top, int(vals[min(np.searchsorted(cdf, 1 - 1e-12), len(vals) - 1)]))
    return max(cap or 0, 16, 2 * top)


def _dense(table: RateTable, hi: int):
    zs = _displacements_1d(table)
    vals = list(range(table.values.lo, hi + 1))
    kmax = max(table.kmax(a, b) for a in vals for b in vals)
    rates = np.stack([table.dense(vals, (z,), kcap=kmax) for z in zs])
    return np.asarray(zs, dtype=np.int64), rates, rates.sum(axis=3)


def _reservoir_laws(table: RateTable, densities, boundary: str):
    if boundary != "reservoir":
        return []
    if densities is None:
        raise ValueError("reservoir boundary needs densities=(left, right)")
    return [marginal(table, float(r)) for r in densities]


def _simulate(table, xi0, ze0, T, seed, replica, boundary, record_times, rate_mode,
              densities, monitor, cap):
    if rate_mode not in RATE_MODES:
        raise ValueError(f"unknown rate mode {rate_mode!r}; expected one of {RATE_MODES}")
    coupled = ze0 is not None
    xi0 = np.asarray(xi0, dtype=np.int64)
    L = xi0.shape[0]
    arrays = [xi0] + ([np.asarray(ze0, dtype=np.int64)] if coupled else [])
    for a in arrays:
        if a.shape != (L,):
            raise ValueError("configurations must be 1D arrays of equal length")
        bad = [int(v) for v in np.unique(a) if int(v) not in table.values]
        if bad:
            raise ValueError(f"values {bad} outside X={table.values}")
    laws = _reservoir_laws(table, densities, boundary)
    rec = np.asarray(sorted(set([*(record_times if record_times is not None else []), T])), dtype=np.float64)
    ordered = coupled and bool(np.all(arrays[0] <= arrays[1]))
    lo = table.values.lo
    bonds = build_bonds(L, _displacements_1d(table), boundary)
    hi = _value_cap(table, arrays, laws, cap)
    k0, k1 = replica_key(seed, replica)
    while True:
        zs, rates, totals = _dense(table, hi)
        if rates.shape[3] < 2:
            rates = np.concatenate([rates, np.zeros(rates.shape[:3] + (2 - rates.shape[3],))], axis=3)
        nv = hi - lo + 1
        sup_rate = totals.reshape(len(zs), -1).max(axis=1)
        if rate_mode == "sup" and np.any(sup_rate <= 0):
            raise ValueError("a declared displacement has zero supremum rate")
        cdf = np.zeros((2, nv))
        for i, (vals, p) in enumerate(laws):
            full = np.zeros(nv)
            for v, q in zip(vals, p):
                full[min(int(v), hi) - lo] += q
            cdf[i] = np.cumsum(full)
            cdf[i, -1] = 1.0
        vlow = np.full(len(bonds.bx), lo, dtype=np.int64)
        for b in np.flatnonzero(bonds.bres >= 0):
            u = block(k0, k1, np.uint64(len(bonds.bx) + b), np.uint64(0))[0]
            vlow[b] = lo + np.searchsorted(cdf[bonds.bres[b]], u, side="right")
        vup = vlow.copy()
        low = arrays[0].copy()
        up = arrays[1].copy() if coupled else np.zeros(1, dtype=np.int64)
        low_rec = np.zeros((len(rec), L), dtype=np.int64)
        up_rec = np.zeros((len(rec) if coupled else 1, L), dtype=np.int64)
        j_rec = np.zeros((len(rec), 2), dtype=np.int64)
        stats = np.zeros(NSTATS)
        n = _kernel(rates, totals, zs, lo, low, up, coupled, bonds.bx, bonds.by, bonds.bz, bonds.bres,
                    vlow, vup, cdf, np.diff(cdf, axis=1, prepend=0.0), bonds.site_ptr, bonds.site_bonds, sup_rate,
                    0 if rate_mode == "local" else 1, float(T), rec, k0, k1, monitor, ordered,
                    low_rec, up_rec, j_rec, stats)
        if not stats[OVERFLOW]:
            break
        if table.values.finite:
            raise RuntimeError("value overflow on a finite value set")
        hi *= 2
    names = ["events", "moves_xi", "moves_zeta", "order_violations", "fplus_increases", "S0",
             "S_max", "S_violations", "overflow", "first_violation_time", "J_xi", "J_zeta"]
    st = {k: float(v) for k, v in zip(names, stats)}
    st["ordered_start"] = ordered
    st["value_cap"] = hi
    st["rate_mode"] = rate_mode
    traj = Trajectory(rec[:n], low_rec[:n], j_rec[:n, 0], st, float(T), L, boundary)
    if coupled:
        traj.upper = up_rec[:n]
        traj.current_upper = j_rec[:n, 1]
    return traj


def run(table: RateTable, initial, T: float, seed: int = 0, replica: int = 0,
        boundary: str = "periodic", record_times=None, rate_mode: str = "local",
        densities=None, cap: int | None = None) -> Trajectory:
    """Simulate one process up to time ``T`` from ``initial``."""
    return _simulate(table, initial, None, T, seed, replica, boundary, record_times, rate_mode,
                     densities, False, cap)


def run_coupled(table: RateTable, xi0, zeta0, T: float, seed: int = 0, replica: int = 0,
                boundary: str = "periodic", record_times=None, rate_mode: str = "local",
                densities=None, monitor: bool = False, cap: int | None = None) -> Trajectory:
    """Simulate the coupled pair; ``monitor`` tracks the running-sum stability bound."""
    return _simulate(table, xi0, zeta0, T, seed, replica, boundary, record_times, rate_mode,
                     densities, monitor, cap)


@dataclass(frozen=True)
class StabilityReport:
    S0: int
    S_max: int
    violations: int
    first_violation_time: float | None

    @property
    def violated(self) -> bool:
        return self.violations > 0


def monitor_stability(traj: Trajectory) -> StabilityReport:
    """Running-sum bound summary; needs a coupled run with ``monitor=True``."""
    if traj.upper is None:
        raise ValueError("stability monitor needs a coupled trajectory")
    s = traj.stats
    if traj.boundary != "closed":
        raise ValueError("running sums need finite total mass (closed boundary)")
    first = s["first_violation_time"]
    return StabilityReport(int(s["S0"]), int(s["S_max"]), int(s["S_violations"]),
                           None if first < 0 else first)


def empirical_profile(config, N: float, block: int, origin: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Block averages of ``config`` and block centres on the scale ``x / N``."""
    config = np.asarray(config, dtype=float)
    if block < 1:
        raise ValueError("block must be positive")
    nblk = len(config) // block
    if nblk == 0:
        raise ValueError("block larger than the configuration")
    dens = config[: nblk * block].reshape(nblk, block).mean(axis=1)
    centres = np.arange(nblk) * block + (block - 1) / 2.0 - origin
    return centres / N, dens


def sample_product_measure(table: RateTable, rho: float, L: int, seed: int = 0,
                           replica: int = 0) -> np.ndarray:
    """``L`` i.i.d. site values from the product measure with density ``rho``."""
    from .measures import sample_product_measure as _sample

    rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, replica]))
    return _sample(table, rho, L, rng)


def riemann_initial(table: RateTable, lam: float, rho: float, L: int, origin: int,
                    seed: int = 0, replica: int = 0) -> np.ndarray:
    """Sites left of ``origin`` drawn with density ``lam``, the rest with ``rho``."""
    left = sample_product_measure(table, lam, L, seed, 2 * replica)
    right = sample_product_measure(table, rho, L, seed, 2 * replica + 1)
    out = right.copy()
    out[:origin] = left[:origin]
    return out


def map_replicas(fn, n: int, jobs: int = 1) -> list:
    """Apply ``fn(replica)`` for each replica; results are ordered by replica index."""
    if jobs <= 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, range(n)))


def ordered_pair_initial(table: RateTable, rho_lo: float, rho_hi: float, L: int, seed: int = 0,
                         replica: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Product configurations with densities ``rho_lo <= rho_hi`` coupled through a
    shared uniform per site, so that the pair is ordered whenever the one-site
    laws are stochastically ordered (true for every family with explicit marginals)."""
    rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, replica]))
    u = rng.random(L)
    out = []
    for rho in (rho_lo, rho_hi):
        vals, p = marginal(table, rho)
        cdf = np.cumsum(p)
        cdf[-1] = 1.0
        out.append(vals[np.searchsorted(cdf, u, side="right")].astype(np.int64))
    return out[0], out[1]
