"""Finite-window checks of the irreducibility conditions for the coupled process.

A *bond* is an ordered pair of sites ``(x, y)`` with offset ``d = y - x``.  A
node of the coupled transition graph on a bond is the quadruple
``(low(x), low(y), up(x), up(y))``.  Arcs are coupled jumps from ``x`` to
``y`` (forward) and from ``y`` to ``x`` (backward) with positive rate.  Both
marginal sums are conserved along arcs, so reachable sets are finite.

Rates are translation invariant, so wedges are handled through their offset
pairs ``(x1 - x0, x2 - x1)``.  The wedge search returns the largest admissible
set of offset pairs; connectivity only improves when wedges are added, so if
the largest set fails no smaller one can succeed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

from .coupling import fplus, staircase_from_sums, tail_sums
from .rates import TOL, RateTable, as_displacement, neg

Quad = tuple


@dataclass(frozen=True)
class EdgeSet:
    """Offsets ``z`` carrying a positive rate; edges are ``{x, x + z}`` for these ``z``."""

    offsets: frozenset

    @property
    def symmetric(self) -> frozenset:
        return self.offsets | {neg(z) for z in self.offsets}

    def is_edge(self, x, y) -> bool:
        return tuple(b - a for a, b in zip(x, y)) in self.symmetric

    def __bool__(self) -> bool:
        return bool(self.offsets)


def edges(table: RateTable, w: int = 10, tol: float = TOL) -> EdgeSet:
    vals = list(table.values.window(w))
    out = set()
    for z in table.displacements:
        if any(table.total(a, b, z) > tol for a in vals for b in vals):
            out.add(z)
    return EdgeSet(frozenset(out))


@dataclass(frozen=True)
class Move:
    direction: str  # "fwd": x -> y, "bwd": y -> x
    k: int
    l: int
    rate: float


@dataclass
class Path:
    nodes: list
    moves: list

    def __str__(self) -> str:
        parts = [str(self.nodes[0])]
        for m, n in zip(self.moves, self.nodes[1:]):
            parts.append(f"-[{m.direction} k={m.k} l={m.l} rate={float(m.rate):.4g}]-> {n}")
        return " ".join(parts)


class BondGraph:
    """Coupled transitions on a bond with offset ``d``; adjacency is memoised."""

    def __init__(self, table: RateTable, d, tol: float = TOL):
        self.table = table
        self.d = as_displacement(d)
        self.tol = tol
        self._adj: dict = {}

    def _entries(self, a, b, c, e, z):
        _, sa = tail_sums(self.table, a, b, z)
        _, sc = tail_sums(self.table, c, e, z)
        path = staircase_from_sums(sa, sc)
        return [(k, l, r) for (k, l), r in zip(path.points, path.rates) if r > self.tol]

    def neighbours(self, q: Quad) -> list:
        if q not in self._adj:
            a, b, c, e = q
            out = [((a - k, b + k, c - l, e + l), Move("fwd", k, l, r))
                   for k, l, r in self._entries(a, b, c, e, self.d)]
            out += [((a + k, b - k, c + l, e - l), Move("bwd", k, l, r))
                    for k, l, r in self._entries(b, a, e, c, neg(self.d))]
            self._adj[q] = out
        return self._adj[q]

    def search(self, start: Quad, goal: Callable[[Quad], bool]) -> Path | None:
        """Breadth-first search for the shortest path to a node meeting ``goal``."""
        parent = {start: None}
        queue = deque([start])
        while queue:
            q = queue.popleft()
            for nxt, mv in self.neighbours(q):
                if nxt in parent:
                    continue
                parent[nxt] = (q, mv)
                if goal(nxt):
                    return _unwind(parent, nxt)
                queue.append(nxt)
        return None


def _unwind(parent, end) -> Path:
    nodes, moves = [end], []
    while parent[nodes[-1]] is not None:
        prev, mv = parent[nodes[-1]]
        nodes.append(prev)
        moves.append(mv)
    return Path(nodes[::-1], moves[::-1])


def opposite_discrepancies(q: Quad) -> bool:
    a, b, c, e = q
    return (a - c) * (b - e) < 0


def find_decreasing_path(table: RateTable, quad: Quad, edge, tol: float = TOL,
                         graph: BondGraph | None = None) -> Path | None:
    """Path from ``quad`` whose last arc lowers the positive discrepancy width."""
    quad = tuple(int(v) for v in quad)
    if not opposite_discrepancies(quad):
        raise ValueError(f"{quad} does not hold discrepancies of opposite signs")
    for v in quad:
        table.check_value(v)
    bg = graph or BondGraph(table, edge, tol)
    start = fplus(*quad)
    return bg.search(quad, lambda q: fplus(*q) < start)


def right_values(table: RateTable, edge, w: int = 10, tol: float = TOL,
               graph: BondGraph | None = None) -> frozenset:
    """Values ``e`` at the arrival site from which every discrepancy at the
    departure site can be pushed across the bond."""
    bg = graph or BondGraph(table, edge, tol)
    vals = list(table.values.window(w))
    out = set()
    for e in vals:
        if all(bg.search((a, e, c, e), lambda q: q[1] != q[3]) is not None
               for a in vals for c in vals if a != c):
            out.add(e)
    return frozenset(out)


@dataclass
class ICResult:
    verdict: str  # "b", "b'" or "failed"
    reason: str = ""
    witness: object = None
    wedges: frozenset = frozenset()
    right: dict = field(default_factory=dict)
    radius: int = 4
    values: int = 10
    partial: bool = False  # verdict only covers values up to the window

    @property
    def satisfied(self) -> bool:
        return self.verdict != "failed"

    def __bool__(self) -> bool:
        return self.satisfied

    def summary(self) -> str:
        scope = f" (values <= {self.values})" if self.partial else ""
        if self.verdict == "b":
            return f"satisfied via (b){scope}"
        if self.verdict == "b'":
            ws = ", ".join(str(w) for w in sorted(self.wedges))
            return f"satisfied via (b') with wedge offsets {{{ws}}}{scope}"
        return f"failed: {self.reason}{scope}"


def _box(radius: int, dim: int):
    return product(range(-radius, radius + 1), repeat=dim)


def _graph_dist(offsets, radius: int, dim: int) -> dict:
    """Graph distances from the origin, searched in a box of ``radius``."""
    origin = (0,) * dim
    dist = {origin: 0}
    queue = deque([origin])
    while queue:
        x = queue.popleft()
        for z in offsets:
            y = tuple(a + b for a, b in zip(x, z))
            if y not in dist and max(map(abs, y)) <= radius:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def _wedge_reach(pairs, offsets, radius: int, dim: int) -> set:
    """Sites reached from the origin by chains of at least one wedge."""
    origin = (0,) * dim
    seen = set()
    queue = deque()
    for u in offsets:
        seen.add((origin, u))
        queue.append((origin, u))
    reached = set()
    while queue:
        x, u = queue.popleft()
        cur = tuple(a + b for a, b in zip(x, u))
        for v in offsets:
            if (u, v) not in pairs:
                continue
            nxt = tuple(a + b for a, b in zip(cur, v))
            if max(map(abs, nxt)) > radius:
                continue
            reached.add(nxt)
            if (cur, v) not in seen:
                seen.add((cur, v))
                queue.append((cur, v))
    return reached


def sep_canonical_wedges(table: RateTable, tol: float = TOL) -> frozenset:
    """Offset pairs of the natural wedge set for exclusion: both legs forward,
    and a backward second leg only when the first leg is also reversible."""
    def p(z):
        return table.total(1, 0, z) > tol

    es = edges(table, tol=tol).symmetric
    return frozenset((u, v) for u in es for v in es
                     if any(a + b for a, b in zip(u, v)) and p(u) and p(v)
                     and (not p(neg(v)) or (p(neg(u)) and p(neg(v)))))


def check_IC(table: RateTable, radius: int = 4, w: int = 10, tol: float = TOL) -> ICResult:
    """Decide the irreducibility conditions on a finite site and value window."""
    partial = not table.values.finite
    res = ICResult("failed", radius=radius, values=w, partial=partial)
    es = edges(table, w, tol)
    if not es:
        res.reason = "no edges"
        return res
    dim = table.dim
    offsets = sorted(es.symmetric)
    span = max(max(map(abs, z)) for z in offsets)

    # (o) connectivity of the box, searched in a margin around it
    dist = _graph_dist(offsets, radius + 2 * span, dim)
    missing = [x for x in _box(radius, dim) if x not in dist]
    if missing:
        res.reason = "lattice not connected"
        res.witness = missing[0]
        return res

    vals = list(table.values.window(w))
    graphs = {d: BondGraph(table, d, tol) for d in offsets}

    # (a) every pair of opposite discrepancies can shrink on every bond
    for d in offsets:
        for q in product(vals, repeat=4):
            if opposite_discrepancies(q) and find_decreasing_path(table, q, d, graph=graphs[d]) is None:
                res.reason = f"no decreasing path from {q} on offset {d}"
                res.witness = (q, d)
                return res

    xset = frozenset(vals)
    res.right = {d: right_values(table, d, w, graph=graphs[d]) for d in offsets}
    if all(res.right[d] == xset or res.right[neg(d)] == xset for d in offsets):
        res.verdict = "b"
        return res

    # (b') largest admissible wedge set, then connectivity by wedge chains
    pairs = set()
    for u, v in product(offsets, repeat=2):
        if not any(a + b for a, b in zip(u, v)):
            continue
        xr_u = res.right[u]
        if xr_u | res.right[neg(v)] != xset:
            continue
        if all(graphs[v].search((e1, e2, e1, e2),
                                lambda q: q[0] == q[2] and q[1] == q[3] and q[0] in xr_u) is not None
               for e1 in xset - xr_u for e2 in res.right[v]):
            pairs.add((u, v))
    res.wedges = frozenset(pairs)
    reach = _wedge_reach(pairs, offsets, radius + 2 * span + 2, dim)
    for y in _box(radius, dim):
        if dist.get(y, 0) >= 2 and y not in reach and tuple(-c for c in y) not in reach:
            res.reason = f"no wedge path between the origin and {y}"
            res.witness = y
            return res
    res.verdict = "b'"
    return res
