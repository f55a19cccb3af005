"""Reference table of nonzero coupling entries of the two-species exclusion model.

Keys are ``(low_x, low_y, k, l)``; values map ``(up_x, up_y)`` to a function
of the five single-displacement rates ``r01, r2, r11, r00, r10``.  The table is
valid under the attractiveness inequalities; it is an independent oracle for
the closed-form construction in :mod:`ipscoupling.coupling`.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .rates import RateTable, s2ep_rates

# pairs where nothing can jump towards the arrival site
STUCK = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)]


def _p(x):
    return max(x, 0)


def _only_second():
    return {
        1: {(0, -1): lambda r: r["r01"], (0, 0): lambda r: r["r00"],
            (1, -1): lambda r: r["r11"], (1, 0): lambda r: r["r10"]},
        2: {(1, -1): lambda r: r["r2"]},
    }


def _stuck(fn):
    return {up: fn for up in STUCK}


def _build() -> dict:
    t = {}
    for low in STUCK:
        for l, row in _only_second().items():
            t[low + (0, l)] = row

    t[(0, -1, 0, 1)] = {(1, -1): lambda r: r["r11"] + r["r2"] - r["r01"],
                        (1, 0): lambda r: _p(r["r10"] - r["r01"])}
    t[(0, -1, 1, 0)] = {**_stuck(lambda r: r["r01"]),
                        (0, 0): lambda r: r["r01"] - r["r00"],
                        # printed as [r01 - r01]+; the column fixes the second term as r10
                        (1, 0): lambda r: _p(r["r01"] - r["r10"])}
    t[(0, -1, 1, 1)] = {(0, -1): lambda r: r["r01"], (0, 0): lambda r: r["r00"],
                        (1, -1): lambda r: r["r01"] - r["r2"],
                        (1, 0): lambda r: min(r["r10"], r["r01"])}
    t[(0, -1, 1, 2)] = {(1, -1): lambda r: r["r2"]}

    t[(0, 0, 0, 1)] = {(0, -1): lambda r: r["r01"] - r["r00"],
                       (1, -1): lambda r: r["r11"] - _p(r["r00"] - r["r2"]),
                       (1, 0): lambda r: r["r10"] - r["r00"]}
    t[(0, 0, 0, 2)] = {(1, -1): lambda r: _p(r["r2"] - r["r00"])}
    t[(0, 0, 1, 0)] = _stuck(lambda r: r["r00"])
    t[(0, 0, 1, 1)] = {(0, -1): lambda r: r["r00"], (0, 0): lambda r: r["r00"],
                       (1, -1): lambda r: _p(r["r00"] - r["r2"]),
                       (1, 0): lambda r: r["r00"]}
    t[(0, 0, 1, 2)] = {(1, -1): lambda r: min(r["r00"], r["r2"])}

    t[(1, -1, 1, 0)] = {**_stuck(lambda r: r["r11"]),
                        (0, -1): lambda r: r["r11"] + r["r2"] - r["r01"],
                        (0, 0): lambda r: r["r11"] - _p(r["r00"] - r["r2"]),
                        (1, 0): lambda r: r["r11"] + r["r2"] - r["r10"]}
    t[(1, -1, 1, 1)] = {(0, -1): lambda r: r["r01"] - r["r2"],
                        (0, 0): lambda r: _p(r["r00"] - r["r2"]),
                        (1, -1): lambda r: r["r11"],
                        (1, 0): lambda r: r["r10"] - r["r2"]}
    t[(1, -1, 2, 0)] = {**_stuck(lambda r: r["r2"]),
                        (0, 0): lambda r: _p(r["r2"] - r["r00"])}
    t[(1, -1, 2, 1)] = {(0, -1): lambda r: r["r2"],
                        (0, 0): lambda r: min(r["r2"], r["r00"]),
                        (1, 0): lambda r: r["r2"]}
    t[(1, -1, 2, 2)] = {(1, -1): lambda r: r["r2"]}

    t[(1, 0, 0, 1)] = {(0, -1): lambda r: _p(r["r01"] - r["r10"]),
                       (1, -1): lambda r: r["r11"] + r["r2"] - r["r10"]}
    t[(1, 0, 1, 0)] = {**_stuck(lambda r: r["r10"]),
                       (0, -1): lambda r: _p(r["r10"] - r["r01"]),
                       (0, 0): lambda r: r["r10"] - r["r00"]}
    t[(1, 0, 1, 1)] = {(0, -1): lambda r: min(r["r10"], r["r01"]),
                       (0, 0): lambda r: r["r00"],
                       (1, -1): lambda r: r["r10"] - r["r2"],
                       (1, 0): lambda r: r["r10"]}
    t[(1, 0, 1, 2)] = {(1, -1): lambda r: r["r2"]}
    return t


TABLE = _build()


def lookup(low, up, k: int, l: int, r: dict):
    fn = TABLE.get(tuple(low) + (k, l), {}).get(tuple(up))
    return 0.0 if fn is None else fn(r)


def slot_rates(rates: dict, sign: int) -> dict:
    """Five rates at displacement ``sign`` from the ten-slot dictionary."""
    suffix = "p" if sign > 0 else "m"
    return {name: rates[f"{name}_{suffix}"] for name in ("r01", "r2", "r11", "r00", "r10")}


def table_deviation(table: RateTable) -> float:
    """Max absolute difference between the closed form and the transcription
    over all 81 quadruples, both displacements and all ``(k, l)``."""
    from .coupling import coupling_table

    rates = s2ep_rates(table)
    worst = 0.0
    vals = (-1, 0, 1)
    for sign in (1, -1):
        r = slot_rates(rates, sign)
        for a, b, c, d in product(vals, repeat=4):
            got = coupling_table(table, (a, b, c, d), (sign,)).entries
            for k, l in product(range(3), repeat=2):
                want = lookup((a, b), (c, d), k, l, r)
                worst = max(worst, abs(float(got.get((k, l), 0.0)) - want))
    return worst


def random_attractive_rates(rng: np.random.Generator) -> dict:
    """Random ten-slot vector satisfying the attractiveness chain at both displacements."""
    out = {}
    for suffix in ("p", "m"):
        lo, hi = np.sort(rng.uniform(0.05, 1.0, size=2))
        r01, r10 = (lo, hi) if rng.random() < 0.5 else (hi, lo)
        r2 = rng.uniform(0.0, lo)
        r00 = rng.uniform(0.0, lo)
        r11 = rng.uniform(max(hi - r2, 0.0), max(hi - r2, 0.0) + 1.0)
        out.update({f"r01_{suffix}": r01, f"r10_{suffix}": r10, f"r2_{suffix}": r2,
                    f"r00_{suffix}": r00, f"r11_{suffix}": r11})
    return out


def attr3_holds(rates: dict, tol: float = 1e-12) -> bool:
    for sign in (1, -1):
        r = slot_rates(rates, sign)
        lo, hi = min(r["r01"], r["r10"]), max(r["r01"], r["r10"])
        if max(r["r2"], r["r00"]) > lo + tol or hi > r["r11"] + r["r2"] + tol:
            return False
    return True
