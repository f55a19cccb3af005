"""TOML experiment configuration: parsing, validation and model construction."""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .rates import (
    S2EP_KEYS,
    RateTable,
    build_mp,
    build_s2ep,
    build_sep,
    build_stp,
    build_thermal_bath,
    build_zrp,
    kernel_from_strings,
    thermal_b_for_c,
    thermal_bath_rates,
)

FAMILIES = ("sep", "zrp", "mp", "stp", "s2ep", "thermal")

DEFAULTS = {
    "model": {"family": "sep", "kernel": {"1": 1.0}, "g": None, "b": None, "p": 1.0, "q": 0.0},
    "rates": {},
    "simulation": {"L": 100, "T": 10.0, "seed": 0, "replicas": 1, "boundary": "periodic",
                   "rho": 0.5, "rho_zeta": None, "records": 11, "rate_mode": "local",
                   "reservoirs": None},
    "hydro": {"lam": 0.5, "rho": 0.0, "N": 200, "t": 1.0, "replicas": 1, "block": 20,
              "seed": 0, "grid": [0.0, 1.0], "points": 21},
    "coupling": {"window": 10, "quad": None, "z": 1},
    "ic": {"radius": 4, "window": 10},
    "output": {"dir": ".", "prefix": ""},
}

_TYPES = {
    ("model", "family"): str, ("model", "kernel"): dict, ("model", "g"): list, ("model", "b"): list,
    ("model", "p"): float, ("model", "q"): float,
    ("simulation", "L"): int, ("simulation", "T"): float, ("simulation", "seed"): int,
    ("simulation", "replicas"): int, ("simulation", "boundary"): str, ("simulation", "rho"): float,
    ("simulation", "rho_zeta"): float, ("simulation", "records"): int,
    ("simulation", "rate_mode"): str, ("simulation", "reservoirs"): list,
    ("hydro", "lam"): float, ("hydro", "rho"): float, ("hydro", "N"): int, ("hydro", "t"): float,
    ("hydro", "replicas"): int, ("hydro", "block"): int, ("hydro", "seed"): int,
    ("hydro", "grid"): list, ("hydro", "points"): int,
    ("coupling", "window"): int, ("coupling", "quad"): list, ("coupling", "z"): int,
    ("ic", "radius"): int, ("ic", "window"): int,
    ("output", "dir"): str, ("output", "prefix"): str,
}

THERMAL_KEYS = ("a", "b", "c")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str = "<defaults>"

    def __getitem__(self, name: str) -> dict:
        return self.sections[name]

    @property
    def family(self) -> str:
        return self.sections["model"]["family"]

    def to_json(self) -> str:
        return json.dumps(self.sections, sort_keys=True, separators=(",", ":"))

    def table(self) -> RateTable:
        return build_table(self)


def _typecheck(sec: str, key: str, val, errors: list) -> object:
    want = _TYPES.get((sec, key))
    if want is None or val is None:
        return val
    if want is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if want is int and isinstance(val, bool):
        errors.append(f"[{sec}] {key}: expected int, got bool")
        return val
    if not isinstance(val, want):
        errors.append(f"[{sec}] {key}: expected {want.__name__}, got {type(val).__name__}")
    return val


def _validate_rates(sections: dict, errors: list) -> None:
    fam = sections["model"]["family"]
    rates = sections["rates"]
    for k, v in rates.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            errors.append(f"[rates] {k}: expected a number")
    if fam == "s2ep":
        for k in S2EP_KEYS:
            if k not in rates:
                errors.append(f"[rates] missing S2EP slot {k}")
        for k in sorted(set(rates) - set(S2EP_KEYS)):
            errors.append(f"[rates] unknown key {k}")
    elif fam == "thermal":
        for k in sorted(set(rates) - set(THERMAL_KEYS)):
            errors.append(f"[rates] unknown key {k}")
        if "a" not in rates:
            errors.append("[rates] thermal bath needs a")
        if ("b" in rates) == ("c" in rates):
            errors.append("[rates] thermal bath needs exactly one of b or c")
    elif rates:
        errors.append(f"[rates] only used by the s2ep and thermal families, got keys {sorted(rates)}")


def validate(raw: dict, source: str = "<dict>") -> ExperimentConfig:
    """Merge ``raw`` over the defaults; raise :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    sections = copy.deepcopy(DEFAULTS)
    for sec, body in raw.items():
        if sec not in DEFAULTS:
            errors.append(f"unknown section [{sec}]")
            continue
        if not isinstance(body, dict):
            errors.append(f"[{sec}] must be a table")
            continue
        if sec == "rates":
            sections["rates"] = dict(body)
            continue
        for key, val in body.items():
            if key not in DEFAULTS[sec]:
                errors.append(f"[{sec}] unknown key {key}")
                continue
            sections[sec][key] = _typecheck(sec, key, val, errors)
    fam = sections["model"]["family"]
    if fam not in FAMILIES:
        errors.append(f"[model] family must be one of {', '.join(FAMILIES)}, got {fam!r}")
    else:
        _validate_rates(sections, errors)
        if fam == "zrp" and sections["model"]["g"] is None:
            errors.append("[model] zrp needs g")
        if fam == "mp" and sections["model"]["b"] is None:
            errors.append("[model] mp needs b")
    sim = sections["simulation"]
    if sim["boundary"] not in ("periodic", "closed", "reservoir"):
        errors.append(f"[simulation] boundary {sim['boundary']!r} not one of periodic, closed, reservoir")
    if sim["rate_mode"] not in ("local", "sup"):
        errors.append(f"[simulation] rate_mode {sim['rate_mode']!r} not one of local, sup")
    for sec, key in (("simulation", "L"), ("simulation", "replicas"), ("hydro", "N"),
                     ("hydro", "replicas"), ("hydro", "block"), ("coupling", "window")):
        v = sections[sec][key]
        if isinstance(v, int) and v < 1:
            errors.append(f"[{sec}] {key} must be positive")
    q = sections["coupling"]["quad"]
    if q is not None and (len(q) != 4 or not all(isinstance(v, int) for v in q)):
        errors.append("[coupling] quad must be four integers")
    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(sections, source)
    if fam == "thermal":
        # expanded slots are recorded so that headers show the rates actually used
        a = float(sections["rates"]["a"])
        b = float(sections["rates"].get("b") or thermal_b_for_c(a, float(sections["rates"]["c"])))
        sections["rates"] = {"a": a, "b": b, **thermal_bath_rates(a, b)[0]}
    return cfg


def parse_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read and validate a TOML file; ``overrides`` (section -> key -> value) win over the file."""
    raw: dict = {}
    source = "<defaults>"
    if path is not None:
        p = Path(path)
        source = str(p)
        try:
            raw = tomllib.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError([f"config file not found: {p}"]) from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"{p}: {exc}"]) from None
    for sec, body in (overrides or {}).items():
        raw.setdefault(sec, {}).update(body)
    return validate(raw, source)


def build_table(cfg: ExperimentConfig) -> RateTable:
    m = cfg["model"]
    fam = m["family"]
    if fam == "sep":
        return build_sep(kernel_from_strings(m["kernel"]))
    if fam == "zrp":
        return build_zrp(kernel_from_strings(m["kernel"]), m["g"])
    if fam == "mp":
        return build_mp(kernel_from_strings(m["kernel"]), m["b"])
    if fam == "stp":
        return build_stp(m["p"], m["q"])
    if fam == "s2ep":
        return build_s2ep({k: float(v) for k, v in cfg["rates"].items()})
    r = cfg["rates"]
    return build_thermal_bath(r["a"], r["b"])
