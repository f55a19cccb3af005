"""Increasing Markovian coupling of two copies of a conservative model.

For a quadruple ``(a, b, c, d)`` (first copy holds ``a`` at the departure
site and ``b`` at the arrival site, second copy ``c`` and ``d``) and a
displacement ``z``, the coupled rate ``rate[k, l]`` moves ``k`` particles in
the first copy and ``l`` in the second simultaneously.

Three independent constructions are provided and cross-checked:

* the closed form built from marginal rates and their tail sums,
* the staircase path, a monotone lattice path in ``(k, l)`` that carries
  every nonzero entry,
* the backward recursion, whose unique fixed point is the same table.

Scalar routines work with any ordered numeric type, so :class:`Fraction`
tables give exact results.  The ``batch_*`` routines are vectorised float
versions used for window-wide scans.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterator

import numpy as np

from .rates import TOL, DomainError, RateTable, as_displacement


def pos(x):
    return x if x > 0 else 0 * x


def partial_sum(table: RateTable, a: int, b: int, k: int, z) -> float:
    """Tail sum of rates strictly above level ``k``."""
    rates = table.rates(a, b, z)
    return sum(rates[k:], 0 * sum(rates, 0))


def tail_sums(table: RateTable, a: int, b: int, z) -> tuple[list, list]:
    """``(rates, sig)`` with ``rates[k]`` for ``k >= 0`` (``rates[0] = 0``)
    and ``sig[k]`` the tail sum above ``k``; both have length ``kmax + 2``."""
    r = table.rates(a, b, z)
    zero = 0 * sum(r, 0)
    rates = [zero] + list(r) + [zero]
    sig = [zero] * len(rates)
    acc = zero
    for k in range(len(rates) - 2, -1, -1):
        acc = acc + rates[k + 1]
        sig[k] = acc
    return rates, sig


def _at(seq, i):
    return seq[i] if i < len(seq) else 0 * seq[0]


def closed_form_entry(ra, sa, rc, sc, k: int, l: int):
    """Closed-form coupled rate from rate/tail-sum lists of both pairs."""
    if k == 0 and l == 0:
        return 0 * _at(ra, 0)
    gk, gl = _at(ra, k), _at(rc, l)
    if k == 0:
        return gl - min(gl, sa[0] - min(sa[0], _at(sc, l)))
    if l == 0:
        return gk - min(gk, sc[0] - min(_at(sa, k), sc[0]))
    sk, sl = _at(sa, k), _at(sc, l)
    left = gk - min(gk, sl - min(sk, sl))
    right = gl - min(gl, sk - min(sk, sl))
    return min(left, right)


def coupling_rate_closed(table: RateTable, a, b, c, d, k: int, l: int, z):
    for v in (a, b, c, d):
        table.check_value(v)
    ra, sa = tail_sums(table, a, b, z)
    rc, sc = tail_sums(table, c, d, z)
    return closed_form_entry(ra, sa, rc, sc, k, l)


@dataclass(frozen=True)
class CouplingTable:
    quad: tuple
    z: tuple
    entries: dict  # (k, l) -> rate, nonzero entries only

    def __getitem__(self, kl) -> float:
        return self.entries.get(kl, 0)

    def left_marginal(self, k: int):
        return sum((r for (kk, _), r in self.entries.items() if kk == k), 0)

    def right_marginal(self, l: int):
        return sum((r for (_, ll), r in self.entries.items() if ll == l), 0)

    def total(self):
        return sum(self.entries.values(), 0)


def coupling_table(table: RateTable, quad, z) -> CouplingTable:
    """All nonzero closed-form entries for one quadruple."""
    a, b, c, d = quad
    z = as_displacement(z)
    ra, sa = tail_sums(table, a, b, z)
    rc, sc = tail_sums(table, c, d, z)
    ents = {}
    for k in range(len(ra) - 1):
        for l in range(len(rc) - 1):
            cr = closed_form_entry(ra, sa, rc, sc, k, l)
            if cr != 0:
                ents[(k, l)] = cr
    return CouplingTable(tuple(quad), z, ents)


@dataclass(frozen=True)
class StaircasePath:
    points: list  # [(k_i, l_i)] for i >= 1; the origin is implicit
    rates: list

    def as_dict(self) -> dict:
        return {p: r for p, r in zip(self.points, self.rates) if r != 0}


def staircase_from_sums(sa, sc) -> StaircasePath:
    """Walk from the origin, stepping in ``k`` while the first tail sum is
    at least the second (ties step in ``k``), until both tails vanish."""
    k = l = 0
    pts, rts = [], []
    prev = max(sa[0], sc[0])
    while _at(sa, k) != 0 or _at(sc, l) != 0:
        if _at(sa, k) >= _at(sc, l):
            k += 1
        else:
            l += 1
        cur = max(_at(sa, k), _at(sc, l))
        pts.append((k, l))
        rts.append(prev - cur)
        prev = cur
    return StaircasePath(pts, rts)


def staircase(table: RateTable, quad, z) -> StaircasePath:
    a, b, c, d = quad
    _, sa = tail_sums(table, a, b, z)
    _, sc = tail_sums(table, c, d, z)
    return staircase_from_sums(sa, sc)


def solve_recursion(table: RateTable, quad, z) -> list:
    """Dense ``rate[k][l]`` from the backward recursion (largest levels first)."""
    a, b, c, d = quad
    ra, _ = tail_sums(table, a, b, z)
    rc, _ = tail_sums(table, c, d, z)
    K, L = len(ra) - 1, len(rc) - 1
    zero = 0 * ra[0]
    cr = [[zero] * L for _ in range(K)]
    for k in range(K - 1, 0, -1):
        for l in range(L - 1, 0, -1):
            row = sum(cr[k][l + 1:], zero)
            col = sum((cr[kk][l] for kk in range(k + 1, K)), zero)
            cr[k][l] = min(ra[k] - row, rc[l] - col)
    for l in range(1, L):
        cr[0][l] = rc[l] - sum((cr[kk][l] for kk in range(1, K)), zero)
    for k in range(1, K):
        cr[k][0] = ra[k] - sum(cr[k][1:], zero)
    return cr


def verify_recursion(table: RateTable, quad, z, entries: dict | None = None, tol: float = TOL) -> bool:
    """Check that a table (closed form by default) satisfies every recursion identity."""
    a, b, c, d = quad
    ra, _ = tail_sums(table, a, b, z)
    rc, _ = tail_sums(table, c, d, z)
    if entries is None:
        entries = coupling_table(table, quad, z).entries
    K = max([len(ra) - 1] + [k + 1 for k, _ in entries])
    L = max([len(rc) - 1] + [l + 1 for _, l in entries])
    zero = 0 * ra[0]
    cr = [[entries.get((k, l), zero) for l in range(L)] for k in range(K)]

    def close(x, y):
        return x == y if tol == 0 else abs(x - y) <= tol

    if not close(cr[0][0], zero):
        return False
    for k in range(K):
        for l in range(L):
            if k == 0 and l == 0:
                continue
            col = sum((cr[kk][l] for kk in range(k + 1, K)), zero)
            row = sum(cr[k][l + 1:], zero)
            if k == 0:
                want = _at(rc, l) - sum((cr[kk][l] for kk in range(1, K)), zero)
            elif l == 0:
                want = _at(ra, k) - sum(cr[k][1:], zero)
            else:
                want = min(_at(ra, k) - row, _at(rc, l) - col)
            if not close(cr[k][l], want):
                return False
    return True


# ------------------------------------------------------------ discrepancies


def fplus(a, b, c, d) -> int:
    return pos(a - c) + pos(b - d)


def delta(a, b, c, d, k: int, l: int, table: RateTable | None = None) -> int:
    """Change of the positive discrepancy width after moving ``k`` and ``l``."""
    after = (a - k, b + k, c - l, d + l)
    if table is not None:
        for v in after:
            if v not in table.values:
                raise DomainError(f"move ({k},{l}) leaves X from {(a, b, c, d)}")
    return fplus(*after) - fplus(a, b, c, d)


def ordered(a, b, c, d) -> bool:
    return (a <= c and b <= d) or (a >= c and b >= d)


def crnz_holds(a, b, c, d, k: int, l: int) -> bool:
    return -pos(a - c) - pos(d - b) <= l - k <= pos(c - a) + pos(b - d)


def noteod_holds(a, b, c, d, k: int, l: int) -> bool:
    return -max(pos(a - c), pos(d - b)) <= l - k <= max(pos(c - a), pos(b - d))


def expected_delta_class(a, b, c, d, k: int, l: int) -> str:
    """``ordered-zero`` for ordered pairs; ``exchange-zero`` for unordered pairs
    moving equal amounts or swapping their discrepancies entirely;
    ``strict-decrease`` otherwise."""
    if ordered(a, b, c, d):
        return "ordered-zero"
    if k - l in (0, (a - c) + (d - b)):
        return "exchange-zero"
    return "strict-decrease"


@dataclass(frozen=True)
class DeltaEntry:
    k: int
    l: int
    rate: float
    delta: int
    label: str
    crnz: bool

    @property
    def consistent(self) -> bool:
        want_zero = self.label != "strict-decrease"
        return self.crnz and (self.delta == 0 if want_zero else self.delta < 0)


def classify_delta(table: RateTable, quad, z, tol: float = TOL) -> list[DeltaEntry]:
    out = []
    for (k, l), cr in sorted(coupling_table(table, quad, z).entries.items()):
        if cr <= tol:
            continue
        out.append(DeltaEntry(k, l, cr, delta(*quad, k, l),
                              expected_delta_class(*quad, k, l), crnz_holds(*quad, k, l)))
    return out


# ------------------------------------------------------------- batch (float)


def quads_in_window(values) -> np.ndarray:
    v = np.asarray(list(values))
    grid = np.stack(np.meshgrid(v, v, v, v, indexing="ij"), axis=-1)
    return grid.reshape(-1, 4)


def _tails(rows: np.ndarray) -> np.ndarray:
    """Tail sums along the last axis: ``out[..., k] = sum(rows[..., k+1:])``."""
    rev = np.cumsum(rows[..., ::-1], axis=-1)[..., ::-1]
    out = np.zeros_like(rows)
    out[..., :-1] = rev[..., 1:]
    return out


def batch_closed(ra: np.ndarray, rc: np.ndarray) -> np.ndarray:
    """Closed-form tables, shape ``(Q, K+1, L+1)``, from rate rows
    ``ra[Q, K+1]`` and ``rc[Q, L+1]`` whose column 0 is zero."""
    sa, sc = _tails(ra), _tails(rc)
    gk, sk = ra[:, :, None], sa[:, :, None]
    gl, sl = rc[:, None, :], sc[:, None, :]
    m = np.minimum(sk, sl)
    out = np.minimum(gk - np.minimum(gk, sl - m), gl - np.minimum(gl, sk - m))
    s0a, s0c = sa[:, :1], sc[:, :1]
    out[:, 0, :] = rc - np.minimum(rc, s0a - np.minimum(s0a, sc))
    out[:, :, 0] = ra - np.minimum(ra, s0c - np.minimum(sa, s0c))
    out[:, 0, 0] = 0.0
    return out


def batch_staircase(ra: np.ndarray, rc: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Dense tables built by walking every staircase path in parallel."""
    Q, K1 = ra.shape
    L1 = rc.shape[1]
    sa = np.concatenate([_tails(ra), np.zeros((Q, 1))], axis=1)
    sc = np.concatenate([_tails(rc), np.zeros((Q, 1))], axis=1)
    out = np.zeros((Q, K1, L1))
    k = np.zeros(Q, dtype=int)
    l = np.zeros(Q, dtype=int)
    idx = np.arange(Q)
    prev = np.maximum(sa[:, 0], sc[:, 0])
    for _ in range(K1 + L1):
        ska, scl = sa[idx, k], sc[idx, l]
        live = (ska > tol) | (scl > tol)
        if not live.any():
            break
        stepk = live & (ska >= scl)
        stepl = live & ~stepk
        k = k + stepk
        l = l + stepl
        cur = np.maximum(sa[idx, np.minimum(k, K1)], sc[idx, np.minimum(l, L1)])
        w = np.flatnonzero(live)
        out[w, np.minimum(k[w], K1 - 1), np.minimum(l[w], L1 - 1)] += (prev - cur)[w]
        prev = np.where(live, cur, prev)
    return out


def batch_recursion(ra: np.ndarray, rc: np.ndarray) -> np.ndarray:
    """Dense tables from the backward recursion."""
    Q, K1 = ra.shape
    L1 = rc.shape[1]
    cr = np.zeros((Q, K1, L1))
    colsum = np.zeros((Q, L1))  # running sum over rows k' > k
    for k in range(K1 - 1, 0, -1):
        rowsum = np.zeros(Q)
        for l in range(L1 - 1, 0, -1):
            cr[:, k, l] = np.minimum(ra[:, k] - rowsum, rc[:, l] - colsum[:, l])
            rowsum += cr[:, k, l]
        colsum += cr[:, k, :]
    cr[:, 0, 1:] = rc[:, 1:] - cr[:, 1:, 1:].sum(axis=1)
    cr[:, 1:, 0] = ra[:, 1:] - cr[:, 1:, 1:].sum(axis=2)
    return cr


def batch_recursion_residual(cr: np.ndarray, ra: np.ndarray, rc: np.ndarray) -> np.ndarray:
    """Per-quadruple max violation of the recursion identities by the coupled table ``cr``."""
    col_after = np.cumsum(cr[:, ::-1, :], axis=1)[:, ::-1, :] - cr  # sum over k' > k
    row_after = np.cumsum(cr[:, :, ::-1], axis=2)[:, :, ::-1] - cr  # sum over l' > l
    want = np.minimum(ra[:, :, None] - row_after, rc[:, None, :] - col_after)
    want[:, 0, 1:] = rc[:, 1:] - cr[:, 1:, 1:].sum(axis=1)
    want[:, 1:, 0] = ra[:, 1:] - cr[:, 1:, 1:].sum(axis=2)
    want[:, 0, 0] = 0.0
    return np.abs(cr - want).max(axis=(1, 2))


def window_rows(table: RateTable, values, z):
    """Rate rows for every quadruple over ``values``: ``(quads, ra, rc)``."""
    vals = list(values)
    dense = table.dense(vals, z)
    q = quads_in_window(range(len(vals)))
    ra = dense[q[:, 0], q[:, 1]]
    rc = dense[q[:, 2], q[:, 3]]
    quads = np.asarray(vals)[q]
    return quads, ra, rc


@dataclass
class EquivalenceReport:
    quads: int = 0
    closed_vs_staircase: float = 0.0
    closed_vs_recursion: float = 0.0
    recursion_residual: float = 0.0
    left_marginal: float = 0.0
    right_marginal: float = 0.0
    negative: float = 0.0
    off_path: int = 0

    @property
    def worst(self) -> float:
        return max(self.closed_vs_staircase, self.closed_vs_recursion, self.recursion_residual,
                   self.left_marginal, self.right_marginal, self.negative)


def equivalence_report(table: RateTable, w: int = 10) -> EquivalenceReport:
    """Cross-check all three constructions and marginal recovery over a window."""
    rep = EquivalenceReport()
    for z in table.displacements:
        quads, ra, rc = window_rows(table, table.values.window(w), z)
        gc = batch_closed(ra, rc)
        gs = batch_staircase(ra, rc)
        gr = batch_recursion(ra, rc)
        rep.quads += len(quads)
        rep.closed_vs_staircase = max(rep.closed_vs_staircase, float(np.abs(gc - gs).max()))
        rep.closed_vs_recursion = max(rep.closed_vs_recursion, float(np.abs(gc - gr).max()))
        rep.recursion_residual = max(rep.recursion_residual,
                                     float(batch_recursion_residual(gc, ra, rc).max()))
        rep.left_marginal = max(rep.left_marginal,
                                float(np.abs(gc.sum(axis=2)[:, 1:] - ra[:, 1:]).max()))
        rep.right_marginal = max(rep.right_marginal,
                                 float(np.abs(gc.sum(axis=1)[:, 1:] - rc[:, 1:]).max()))
        rep.negative = max(rep.negative, float(-min(gc.min(), 0.0)))
        # nonzero entries must lie on a path: at most one per anti-diagonal
        nz = gc > TOL
        K1, L1 = gc.shape[1:]
        for n in range(1, K1 + L1 - 1):
            ks = np.arange(max(0, n - L1 + 1), min(n, K1 - 1) + 1)
            per = nz[:, ks, n - ks].sum(axis=1)
            rep.off_path += int((per > 1).sum())
    return rep


# ------------------------------------------------------------ attractiveness


@dataclass(frozen=True)
class Violation:
    quad: tuple
    level: int
    side: str  # "inc" or "dec"
    z: tuple
    lhs: float
    rhs: float


@dataclass(frozen=True)
class AttractivenessReport:
    attractive: bool
    violation: Violation | None = None
    window: int | None = None

    def __bool__(self) -> bool:
        return self.attractive


def _sigma_padded(table: RateTable, values, z, extra: int) -> np.ndarray:
    dense = table.dense(values, z)
    sig = _tails(dense)
    return np.concatenate([sig, np.zeros(sig.shape[:2] + (extra + 1,))], axis=2)


def check_attractive(table: RateTable, w: int = 10, tol: float = TOL) -> AttractivenessReport:
    """Scan the monotonicity inequalities for all ordered pairs in the window.

    For ``(a, b) <= (c, d)`` and every level ``l``, the tail of the lower
    pair above ``d - b + l`` must not exceed the tail of the upper pair above
    ``l``; symmetrically the tail of the lower pair above ``k`` must dominate
    the tail of the upper pair above ``c - a + k``.
    """
    vals = list(table.values.window(w))
    n = len(vals)
    for z in table.displacements:
        sig = _sigma_padded(table, vals, z, extra=n)
        levels = sig.shape[2] - n - 1
        for ia, ib, ic, id_ in product(range(n), repeat=4):
            if ia > ic or ib > id_:
                continue
            lo, hi = sig[ia, ib], sig[ic, id_]
            for lev in range(levels):
                lhs, rhs = lo[id_ - ib + lev], hi[lev]
                if lhs > rhs + tol:
                    q = (vals[ia], vals[ib], vals[ic], vals[id_])
                    return AttractivenessReport(False, Violation(q, lev, "inc", z, float(lhs), float(rhs)), w)
                lhs, rhs = lo[lev], hi[ic - ia + lev]
                if lhs + tol < rhs:
                    q = (vals[ia], vals[ib], vals[ic], vals[id_])
                    return AttractivenessReport(False, Violation(q, lev, "dec", z, float(lhs), float(rhs)), w)
    return AttractivenessReport(True, None, w)


def attractive_increment_range_ok(a, b, c, d, k: int, l: int) -> bool:
    """Increment window for nonzero entries on ordered pairs (holds under attractiveness)."""
    if a <= c and b <= d:
        return -(d - b) <= l - k <= c - a
    if a >= c and b >= d:
        return -(a - c) <= l - k <= b - d
    return True


# --------------------------------------------------------------- exchanges


@dataclass(frozen=True)
class ExchangeWitness:
    quad: tuple
    k: int
    l: int
    z: tuple
    rate: float
    total: bool


def iter_exchanges(table: RateTable, w: int = 10, tol: float = TOL) -> Iterator[ExchangeWitness]:
    for z in table.displacements:
        quads, ra, rc = window_rows(table, table.values.window(w), z)
        a, b, c, d = quads.T
        keep = (a - c) * (b - d) < 0
        if not keep.any():
            continue
        quads, cr = quads[keep], batch_closed(ra[keep], rc[keep])
        K1, L1 = cr.shape[1:]
        kk, ll = np.meshgrid(np.arange(K1), np.arange(L1), indexing="ij")
        a, b, c, d = quads.T
        width = np.maximum(np.abs(a - c), np.abs(b - d))[:, None, None]
        hit = (cr > tol) & (np.abs(kk - ll)[None] > width)
        for qi, k, l in zip(*np.nonzero(hit)):
            q = tuple(int(v) for v in quads[qi])
            yield ExchangeWitness(q, int(k), int(l), z, float(cr[qi, k, l]),
                                  int(k) - int(l) == (q[0] - q[2]) + (q[3] - q[1]))


def detect_exchanges(table: RateTable, w: int = 10, tol: float = TOL) -> ExchangeWitness | None:
    """First coupled move that swaps opposite discrepancies, or ``None``."""
    return next(iter_exchanges(table, w, tol), None)


def check_noteod_sufficient(table: RateTable, w: int = 10, tol: float = TOL) -> bool:
    """Tail-sum inequalities that rule out exchanges of discrepancies."""
    vals = list(table.values.window(w))
    n = len(vals)
    for z in table.displacements:
        sig = _sigma_padded(table, vals, z, extra=n)
        levels = sig.shape[2] - n - 1
        for ia, ib, ic, id_ in product(range(n), repeat=4):
            up = max(ia - ic, id_ - ib, 0)
            down = max(ic - ia, ib - id_, 0)
            ab, cd = sig[ia, ib], sig[ic, id_]
            for lev in range(levels):
                if cd[lev] + tol < ab[lev + up] or ab[lev] + tol < cd[lev + down]:
                    return False
    return True


@dataclass
class DiscrepancyAudit:
    entries: int = 0
    positive_delta: int = 0
    crnz_fail: int = 0
    class_mismatch: int = 0
    increment_range_fail: int = 0
    examples: list = field(default_factory=list)


def audit_discrepancies(table: RateTable, w: int = 10, tol: float = TOL) -> DiscrepancyAudit:
    """Check sign, range and zero cases of the discrepancy change for every
    nonzero coupled move in the window."""
    rep = DiscrepancyAudit()
    for z in table.displacements:
        quads, ra, rc = window_rows(table, table.values.window(w), z)
        cr = batch_closed(ra, rc)
        for qi, k, l in zip(*np.nonzero(cr > tol)):
            a, b, c, d = (int(v) for v in quads[qi])
            k, l = int(k), int(l)
            dl = delta(a, b, c, d, k, l)
            label = expected_delta_class(a, b, c, d, k, l)
            rep.entries += 1
            bad = False
            if dl > 0:
                rep.positive_delta += 1
                bad = True
            if not crnz_holds(a, b, c, d, k, l):
                rep.crnz_fail += 1
                bad = True
            if (dl == 0) != (label != "strict-decrease"):
                rep.class_mismatch += 1
                bad = True
            if not attractive_increment_range_ok(a, b, c, d, k, l):
                rep.increment_range_fail += 1
                bad = True
            if bad and len(rep.examples) < 5:
                rep.examples.append(((a, b, c, d), k, l, z, dl, label))
    return rep
