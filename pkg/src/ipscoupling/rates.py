"""Marginal jump-rate tables for conservative multi-particle jump models.

A rate table stores, for every pair of site values ``(a, b)`` and every
displacement ``z``, the rate at which ``k`` particles leave the departure
site (value ``a``) for the arrival site (value ``b``).  Rates vanish
whenever the move would leave the value set or ``k == 0``.

Rates may be floats or :class:`fractions.Fraction`; the builders keep the
numeric type of their inputs so that the coupling algebra can be checked
exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

Rate = Union[float, Fraction]
Displacement = tuple  # tuple[int, ...], never all zeros

TOL = 1e-12


class DomainError(ValueError):
    """A value lies outside the value set of a table."""


def as_displacement(z) -> Displacement:
    """Normalise an int or int sequence to a nonzero displacement tuple."""
    if isinstance(z, (int, np.integer)):
        out = (int(z),)
    else:
        out = tuple(int(c) for c in z)
    if not out or all(c == 0 for c in out):
        raise ValueError(f"displacement must be nonzero, got {z!r}")
    return out


def neg(z: Displacement) -> Displacement:
    return tuple(-c for c in z)


@dataclass(frozen=True)
class ValueSet:
    """Either the integer interval ``[lo, hi]`` or the naturals (``hi is None``)."""

    lo: int = 0
    hi: int | None = None

    def __post_init__(self):
        if self.hi is not None and self.hi < self.lo:
            raise ValueError(f"empty value set [{self.lo}, {self.hi}]")

    @classmethod
    def interval(cls, lo: int, hi: int) -> "ValueSet":
        return cls(lo, hi)

    @classmethod
    def naturals(cls) -> "ValueSet":
        return cls(0, None)

    @property
    def finite(self) -> bool:
        return self.hi is not None

    def __contains__(self, v) -> bool:
        if not isinstance(v, (int, np.integer)):
            return False
        return v >= self.lo and (self.hi is None or v <= self.hi)

    def window(self, w: int = 10) -> range:
        """All values for a finite set, otherwise ``lo..lo+w``."""
        top = self.hi if self.finite else self.lo + w
        return range(self.lo, top + 1)

    def __str__(self) -> str:
        return "N" if not self.finite else f"[{self.lo},{self.hi}]"


@dataclass(frozen=True, eq=False)
class RateTable:
    """Immutable marginal rate table.

    ``rate_fn(a, b, k, z)`` is only called with ``a, b`` in the value set,
    ``1 <= k <= kmax_fn(a, b)`` and ``z`` a declared displacement; all
    other lookups return zero.  ``family`` and ``params`` describe how the
    table was built and are used for reporting and configuration echo.
    """

    values: ValueSet
    displacements: tuple
    rate_fn: Callable[[int, int, int, Displacement], Rate]
    kmax_fn: Callable[[int, int], int]
    family: str = "custom"
    params: Mapping = field(default_factory=dict)
    flags: frozenset = frozenset()

    def check_value(self, v) -> None:
        if v not in self.values:
            raise DomainError(f"value {v!r} outside X={self.values}")

    def kmax(self, a: int, b: int) -> int:
        """Largest k with a possibly nonzero rate from ``(a, b)``."""
        self.check_value(a)
        self.check_value(b)
        k = min(self.kmax_fn(a, b), a - self.values.lo)
        if self.values.finite:
            k = min(k, self.values.hi - b)
        return max(k, 0)

    def rate(self, a: int, b: int, k: int, z) -> Rate:
        self.check_value(a)
        self.check_value(b)
        z = as_displacement(z)
        if k <= 0 or z not in self.displacements or k > self.kmax(a, b):
            return 0
        return self.rate_fn(a, b, k, z)

    def rates(self, a: int, b: int, z) -> list:
        """``[rate(k=1), ..., rate(k=kmax)]`` for one pair and displacement."""
        z = as_displacement(z)
        return [self.rate(a, b, k, z) for k in range(1, self.kmax(a, b) + 1)]

    def total(self, a: int, b: int, z) -> Rate:
        return sum(self.rates(a, b, z), 0)

    @property
    def dim(self) -> int:
        return len(self.displacements[0]) if self.displacements else 1

    def is_nearest_neighbor(self) -> bool:
        return self.dim == 1 and all(abs(z[0]) == 1 for z in self.displacements)

    def dense(self, values: Sequence[int], z, kcap: int | None = None) -> np.ndarray:
        """Float array ``out[ia, ib, k]`` over ``values x values``; ``out[..., 0] == 0``."""
        z = as_displacement(z)
        vals = list(values)
        km = [[self.kmax(a, b) for b in vals] for a in vals]
        kmax = max((k for row in km for k in row), default=0)
        if kcap is not None:
            kmax = max(kmax, kcap)
        out = np.zeros((len(vals), len(vals), kmax + 1))
        if z not in self.displacements:
            return out
        # values are checked by kmax above, so rate_fn is called directly
        for ia, a in enumerate(vals):
            for ib, b in enumerate(vals):
                for k in range(1, km[ia][ib] + 1):
                    out[ia, ib, k] = float(self.rate_fn(a, b, k, z))
        return out

    def sup_total(self, values: Iterable[int], z) -> float:
        """Largest total jump rate over pairs drawn from ``values``."""
        vals = list(values)
        return max((float(self.total(a, b, z)) for a in vals for b in vals), default=0.0)


# ---------------------------------------------------------------- builders


def _check_kernel(p: Mapping, *, normalised: bool = False) -> dict:
    kern = {}
    for z, w in p.items():
        if w < 0:
            raise ValueError(f"negative kernel weight {w} at {z}")
        if w != 0:
            kern[as_displacement(z)] = w
    if normalised and abs(float(sum(kern.values())) - 1.0) > TOL:
        raise ValueError("kernel must sum to 1")
    dims = {len(z) for z in kern}
    if len(dims) > 1:
        raise ValueError("kernel mixes lattice dimensions")
    return kern


def _extend(seq: Sequence) -> Callable[[int], Rate]:
    """Sequence to function on N; the last entry is repeated."""
    seq = list(seq)
    return lambda n: seq[min(n, len(seq) - 1)]


def _extend2(mat: Sequence[Sequence]) -> Callable[[int, int], Rate]:
    rows = [list(r) for r in mat]

    def f(a, b):
        row = rows[min(a, len(rows) - 1)]
        return row[min(b, len(row) - 1)]

    return f


def build_sep(p: Mapping) -> RateTable:
    """Simple exclusion: one particle jumps from an occupied to an empty site."""
    kern = _check_kernel(p)
    return RateTable(
        values=ValueSet.interval(0, 1),
        displacements=tuple(sorted(kern)),
        rate_fn=lambda a, b, k, z: kern[z] if (a, b) == (1, 0) else 0,
        kmax_fn=lambda a, b: 1,
        family="sep",
        params={"kernel": {str(z): w for z, w in kern.items()}},
    )


def build_zrp(p: Mapping, g: Callable[[int], Rate] | Sequence) -> RateTable:
    """Zero range: departure rate ``p(z) g(a)``; ``g`` may be a sequence."""
    kern = _check_kernel(p)
    gf = g if callable(g) else _extend(g)
    if gf(0) != 0:
        raise ValueError("zero range requires g(0) == 0")
    for a in range(32):
        if gf(a) < 0:
            raise ValueError(f"g({a}) is negative")
    return RateTable(
        values=ValueSet.naturals(),
        displacements=tuple(sorted(kern)),
        rate_fn=lambda a, b, k, z: kern[z] * gf(a),
        kmax_fn=lambda a, b: 1,
        family="zrp",
        params={"kernel": {str(z): w for z, w in kern.items()},
                "g": [gf(a) for a in range(12)]},
    )


def build_mp(p: Mapping, b: Callable[[int, int], Rate] | Sequence[Sequence]) -> RateTable:
    """Misanthrope: departure rate ``p(z) b(a, b)`` with ``b(0, .) == 0``."""
    kern = _check_kernel(p)
    bf = b if callable(b) else _extend2(b)
    for a in range(16):
        for c in range(16):
            if bf(a, c) < 0:
                raise ValueError(f"b({a},{c}) is negative")
        if bf(0, a) != 0:
            raise ValueError("misanthrope requires b(0, .) == 0")
    return RateTable(
        values=ValueSet.naturals(),
        displacements=tuple(sorted(kern)),
        rate_fn=lambda a, c, k, z: kern[z] * bf(a, c),
        kmax_fn=lambda a, c: 1,
        family="mp",
        params={"kernel": {str(z): w for z, w in kern.items()},
                "b": [[bf(a, c) for c in range(8)] for a in range(8)]},
    )


def build_stp(p1: Rate, pm1: Rate) -> RateTable:
    """Stick process: any ``k <= a`` particles jump to a neighbour at rate ``p(z)``."""
    kern = _check_kernel({1: p1, -1: pm1}, normalised=True)
    return RateTable(
        values=ValueSet.naturals(),
        displacements=tuple(sorted(kern)),
        rate_fn=lambda a, b, k, z: kern[z],
        kmax_fn=lambda a, b: a,
        family="stp",
        params={"p": p1, "q": pm1},
    )


# Two-species exclusion: X = {-1, 0, 1}.  Slot name -> (a, b, k).
S2EP_SLOTS = {
    "r01": (0, -1, 1),
    "r2": (1, -1, 2),
    "r11": (1, -1, 1),
    "r00": (0, 0, 1),
    "r10": (1, 0, 1),
}
S2EP_KEYS = tuple(f"{s}_{d}" for s in S2EP_SLOTS for d in ("p", "m"))
_SIGN = {"p": 1, "m": -1}


def build_s2ep(rates: Mapping[str, Rate]) -> RateTable:
    """Two-species exclusion from its ten rates.

    Keys are ``<slot>_<p|m>`` where the slot is one of ``r01`` (``0,-1``,
    one particle), ``r2`` (``1,-1``, two particles), ``r11`` (``1,-1``, one
    particle), ``r00`` and ``r10``; the suffix selects ``z = +1`` or ``-1``.
    """
    missing = [k for k in S2EP_KEYS if k not in rates]
    if missing:
        raise KeyError(f"missing S2EP rate slot(s): {', '.join(missing)}")
    extra = set(rates) - set(S2EP_KEYS)
    if extra:
        raise KeyError(f"unknown S2EP rate slot(s): {', '.join(sorted(extra))}")
    store = {}
    for key, val in rates.items():
        if val < 0:
            raise ValueError(f"negative rate {key}={val}")
        slot, d = key.split("_")
        a, b, k = S2EP_SLOTS[slot]
        store[(a, b, k, (_SIGN[d],))] = val
    flags = frozenset()
    if not (rates["r11_p"] + rates["r11_m"] > 0 and rates["r00_p"] + rates["r00_m"] > 0):
        flags = frozenset({"degenerate"})
        warnings.warn("S2EP rates are degenerate (r11 or r00 vanish at both z)", stacklevel=2)
    return RateTable(
        values=ValueSet.interval(-1, 1),
        displacements=((-1,), (1,)),
        rate_fn=lambda a, b, k, z: store.get((a, b, k, z), 0),
        kmax_fn=lambda a, b: 2 if (a, b) == (1, -1) else 1,
        family="s2ep",
        params={k: rates[k] for k in S2EP_KEYS},
        flags=flags,
    )


def s2ep_rates(table: RateTable) -> dict:
    """Inverse of :func:`build_s2ep`."""
    if table.values != ValueSet.interval(-1, 1):
        raise ValueError("not a two-species exclusion table")
    out = {}
    for key in S2EP_KEYS:
        slot, d = key.split("_")
        a, b, k = S2EP_SLOTS[slot]
        out[key] = table.rate(a, b, k, _SIGN[d])
    return out


def thermal_bath_rates(a: float, b: float) -> tuple[dict, float]:
    """The ten thermal-bath rates for field ``a`` and coupling ``b``, plus ``c**2``."""
    if a <= 0 or b <= 0:
        raise ValueError("thermal bath parameters must be positive")
    v2 = (a + 1 / a) / 2
    v0 = (a**2 + a**-2) / (a**2 + a**-2 + b**-2)
    rates = {
        "r10_p": a * v2, "r01_p": a * v2,
        "r10_m": v2 / a, "r01_m": v2 / a,
        "r00_p": a**2 * v0, "r2_p": a**2 * v0,
        "r00_m": v0 / a**2, "r2_m": v0 / a**2,
        "r11_p": v0 / b**2, "r11_m": v0 / b**2,
    }
    c2 = b**2 * (a**-2 + a**2) / 2
    return rates, c2


def build_thermal_bath(a: float, b: float) -> RateTable:
    rates, c2 = thermal_bath_rates(a, b)
    t = build_s2ep(rates)
    return RateTable(t.values, t.displacements, t.rate_fn, t.kmax_fn, "s2ep",
                     {**t.params, "thermal_a": a, "thermal_b": b, "c2": c2}, t.flags)


def thermal_b_for_c(a: float, c: float) -> float:
    """Coupling ``b`` giving the requested ``c`` at field ``a``."""
    return math.sqrt(2 * c * c / (a**2 + a**-2))


@dataclass(frozen=True)
class ConditionReport:
    holds: bool
    residual: float = 0.0
    detail: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.holds


def check_s2ep_product_condition(table: RateTable, tol: float = TOL) -> ConditionReport:
    """Left minus right side of the condition for product stationary measures."""
    r = s2ep_rates(table)
    den = r["r00_p"] + r["r00_m"]
    if den == 0:
        raise ValueError("product condition needs r00_p + r00_m > 0")
    lhs = (r["r00_m"] * r["r11_p"] - r["r00_p"] * r["r11_m"]) / den
    rhs = sum(s * (r[f"r2_{d}"] + r[f"r11_{d}"] - r[f"r10_{d}"] - r[f"r01_{d}"])
              for d, s in _SIGN.items())
    res = lhs - rhs
    return ConditionReport(abs(res) <= tol, float(res))


def check_gradient_condition(table: RateTable, tol: float = TOL) -> ConditionReport:
    """Gradient test; on success ``detail`` holds the linear and quadratic
    coefficients of the local function whose discrete gradient is the current."""
    r = s2ep_rates(table)
    lhs_m = r["r11_m"] + 2 * r["r2_m"]
    lhs_p = r["r11_p"] + 2 * r["r2_p"]
    gaps = [
        r["r00_m"] - r["r00_p"],
        r["r10_m"] - r["r10_p"],
        r["r01_m"] - r["r01_p"],
        lhs_m - lhs_p,
        lhs_p - (r["r01_p"] + r["r10_p"]),
    ]
    worst = max(abs(float(gap)) for gap in gaps)
    if worst > tol:
        return ConditionReport(False, worst)
    coeffs = {"linear": -(r["r10_p"] + r["r01_p"]) / 2, "quadratic": (r["r01_p"] - r["r10_p"]) / 2}
    return ConditionReport(True, worst, coeffs)


def kernel_from_strings(p: Mapping[str, float]) -> dict:
    """Parse config kernel keys such as ``"1"``, ``"-1"`` or ``"2,0"``."""
    return {as_displacement([int(c) for c in str(k).split(",")]): float(v) for k, v in p.items()}
