"""Command-line front end: ``ipscoupling <subcommand> [--config FILE] ...``.

Every CSV starts with ``#`` header lines holding the package version, the
seed and the full validated config as JSON, so an output file is enough to
rerun the experiment.  Exit status is 0 on success, 1 when a check fails and
2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _colour(text: str, code: str, stream) -> str:
    if os.environ.get("NO_COLOR") or not getattr(stream, "isatty", lambda: False)():
        return text
    return f"\033[{code}m{text}\033[0m"


def _status(ok: bool, msg: str) -> None:
    tag = _colour("PASS", "32", sys.stdout) if ok else _colour("FAIL", "31", sys.stdout)
    print(f"{tag} {msg}")


class Output:
    """CSV writer that prefixes the reproducibility header."""

    def __init__(self, cfg: ExperimentConfig, args, command: str):
        self.cfg = cfg
        self.dir = Path(args.out or cfg["output"]["dir"])
        self.prefix = cfg["output"]["prefix"]
        self.command = command
        self.seed = args.seed

    def header(self) -> str:
        return (f"# ipscoupling {__version__}\n# command: {self.command}\n"
                f"# seed: {self.seed}\n# config: {self.cfg.to_json()}\n")

    def path(self, name: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        return self.dir / f"{self.prefix}{name}"

    def write_csv(self, name: str, columns: list, rows) -> Path:
        buf = io.StringIO()
        buf.write(self.header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        p = self.path(name)
        p.write_text(buf.getvalue())
        return p


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


# ------------------------------------------------------------- commands


def cmd_check_attractive(cfg, args, out: Output) -> int:
    from .coupling import check_attractive

    rep = check_attractive(cfg.table(), w=args.window or cfg["coupling"]["window"])
    if rep.attractive:
        _status(True, f"attractive on values <= {rep.window}")
        return EXIT_OK
    v = rep.violation
    _status(False, f"not attractive: quadruple {v.quad} level {v.level} ({v.side}) z={v.z}: "
                   f"{v.lhs:.6g} vs {v.rhs:.6g}")
    return EXIT_FAIL


def cmd_build_coupling(cfg, args, out: Output) -> int:
    from .coupling import coupling_table, staircase, verify_recursion

    table = cfg.table()
    quad = tuple(args.quad if args.quad is not None else (cfg["coupling"]["quad"] or (1, 0, 1, 0)))
    z = args.z if args.z is not None else cfg["coupling"]["z"]
    ct = coupling_table(table, quad, (z,))
    path = staircase(table, quad, (z,))
    rows = [(k, l, float(r)) for (k, l), r in sorted(ct.entries.items())]
    p = out.write_csv("coupling.csv", ["k", "l", "rate"], rows)
    for k, l, r in rows:
        print(f"rate[{k};{l}] = {r:.12g}")
    print("staircase:", " ".join(f"({k},{l})" for k, l in path.points))
    ok = verify_recursion(table, quad, (z,), ct.entries)
    ok &= all(abs(float(ct.left_marginal(k)) - float(table.rate(quad[0], quad[1], k, (z,)))) <= 1e-12
              for k in range(1, 1 + table.kmax(quad[0], quad[1])))
    ok &= all(abs(float(ct.right_marginal(l)) - float(table.rate(quad[2], quad[3], l, (z,)))) <= 1e-12
              for l in range(1, 1 + table.kmax(quad[2], quad[3])))
    _status(ok, f"recursion and marginals for {quad} z={z}; wrote {p}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_detect_exchanges(cfg, args, out: Output) -> int:
    from .coupling import detect_exchanges

    wit = detect_exchanges(cfg.table(), w=args.window or cfg["coupling"]["window"])
    if wit is None:
        _status(True, "no exchange of discrepancies")
        return EXIT_OK
    _status(False, f"exchange at {wit.quad} k={wit.k} l={wit.l} z={wit.z} rate={float(wit.rate):.6g}")
    return EXIT_FAIL


def cmd_check_ic(cfg, args, out: Output) -> int:
    from .irreducibility import check_IC

    res = check_IC(cfg.table(), radius=args.window or cfg["ic"]["radius"],
                   w=args.values or cfg["ic"]["window"])
    msg = res.summary()
    if res.witness is not None:
        msg += f"; witness {res.witness}"
    _status(res.satisfied, msg)
    return EXIT_OK if res.satisfied else EXIT_FAIL


def _record_times(sim: dict) -> np.ndarray:
    return np.linspace(0.0, sim["T"], max(sim["records"], 2))


def _reservoirs(sim: dict):
    return tuple(sim["reservoirs"]) if sim["boundary"] == "reservoir" else None


def cmd_simulate(cfg, args, out: Output) -> int:
    from .simulate import map_replicas, run, sample_product_measure

    table, sim = cfg.table(), cfg["simulation"]
    seed = args.seed
    times = _record_times(sim)

    def one(r):
        eta0 = sample_product_measure(table, sim["rho"], sim["L"], seed, r)
        return run(table, eta0, sim["T"], seed=seed, replica=r, boundary=sim["boundary"],
                   record_times=times, rate_mode=sim["rate_mode"], densities=_reservoirs(sim))

    trajs = map_replicas(one, sim["replicas"], args.jobs)
    rows = ([r, t, x, int(v)]
            for r, tr in enumerate(trajs) for t, row in zip(tr.times, tr.lower) for x, v in enumerate(row))
    p = out.write_csv("simulate.csv", ["replica", "t", "x", "value"], rows)
    cur = ([r, t, int(j)] for r, tr in enumerate(trajs) for t, j in zip(tr.times, tr.current))
    pc = out.write_csv("current.csv", ["replica", "t", "current"], cur)
    events = sum(int(tr.stats["events"]) for tr in trajs)
    _status(True, f"{len(trajs)} replica(s), {events} events; wrote {p} and {pc}")
    return EXIT_OK


def cmd_simulate_coupled(cfg, args, out: Output) -> int:
    from .simulate import map_replicas, ordered_pair_initial, run_coupled

    table, sim = cfg.table(), cfg["simulation"]
    seed = args.seed
    rho2 = sim["rho_zeta"] if sim["rho_zeta"] is not None else sim["rho"]
    monitor = sim["boundary"] == "closed"

    def one(r):
        xi0, ze0 = ordered_pair_initial(table, min(sim["rho"], rho2), max(sim["rho"], rho2),
                                        sim["L"], seed, r)
        return run_coupled(table, xi0, ze0, sim["T"], seed=seed, replica=r, boundary=sim["boundary"],
                           rate_mode=sim["rate_mode"], densities=_reservoirs(sim), monitor=monitor)

    trajs = map_replicas(one, sim["replicas"], args.jobs)
    keys = ["events", "moves_xi", "moves_zeta", "order_violations", "fplus_increases",
            "S0", "S_max", "S_violations", "J_xi", "J_zeta"]
    rows = [[r] + [tr.stats[k] for k in keys] for r, tr in enumerate(trajs)]
    p = out.write_csv("simulate_coupled.csv", ["replica"] + keys, rows)
    order = sum(int(tr.stats["order_violations"]) for tr in trajs)
    fplus = sum(int(tr.stats["fplus_increases"]) for tr in trajs)
    sviol = sum(int(tr.stats["S_violations"]) for tr in trajs) if monitor else 0
    ok = order == 0 and fplus == 0 and sviol == 0
    _status(ok, f"order violations {order}, f+ increases {fplus}, stability violations {sviol}; wrote {p}")
    return EXIT_OK if ok else EXIT_FAIL


def _flux_model(cfg):
    from .hydro import s2ep_flux_model, stp_flux_model

    fam = cfg.family
    if fam == "stp":
        m = cfg["model"]
        return stp_flux_model(m["p"], m["q"])
    if fam in ("s2ep", "thermal"):
        return s2ep_flux_model(cfg.table())
    raise ValueError(f"no closed-form flux for family {fam!r}; flux-table still reports the measure expectation")


def cmd_hydro_riemann(cfg, args, out: Output) -> int:
    from .hydro import RiemannProblem, riemann_experiment, riemann_solve, write_svg

    h = cfg["hydro"]
    flux = _flux_model(cfg)
    sol = riemann_solve(RiemannProblem(h["lam"], h["rho"], flux))
    wrows = [(w.kind, w.left, w.right, w.speed, w.speed_right) for w in sol.waves]
    p = out.write_csv("waves.csv", ["kind", "left", "right", "speed", "speed_right"], wrows)
    for w in sol.waves:
        span = f"speed {w.speed:.6g}" if w.kind != "rarefaction" else f"speeds [{w.speed:.6g}, {w.speed_right:.6g}]"
        print(f"{w.kind}: {w.left:.6g} -> {w.right:.6g}, {span}")
    if h["replicas"] < 1 or args.no_mc:
        _status(True, f"entropy solution with {len(sol.waves)} wave(s); wrote {p}")
        return EXIT_OK
    res = riemann_experiment(cfg.table(), flux, h["lam"], h["rho"], h["N"], h["t"], h["replicas"],
                             args.seed, block=h["block"], jobs=args.jobs,
                             rate_mode=cfg["simulation"]["rate_mode"])
    prof = out.write_csv("profile.csv", ["x_over_t", "u_entropy", "u_empirical"],
                         zip(res.x_over_N / h["t"], res.entropy, res.density))
    svg = out.path("profile.svg")
    write_svg(svg, res, title=f"{cfg.family}: {h['lam']:g} -> {h['rho']:g}")
    fronts = "; ".join(f"predicted {a:.4g} measured {'none' if b is None else f'{b:.4g}'}"
                       for a, b in res.fronts)
    print(f"L1 = {res.l1:.4g} on |x/N| <= {res.half_width:.3g}; fronts: {fronts or 'none'}")
    _status(True, f"wrote {prof} and {svg}")
    return EXIT_OK


def cmd_flux_table(cfg, args, out: Output) -> int:
    from .hydro import flux_exact_from_measure

    h = cfg["hydro"]
    table = cfg.table()
    grid = np.linspace(h["grid"][0], h["grid"][1], h["points"])
    try:
        flux = _flux_model(cfg)
    except ValueError:
        flux = None
    rows = []
    worst = 0.0
    for r in grid:
        meas = flux_exact_from_measure(table, float(r))
        if flux is None:
            rows.append((r, meas, "", "", ""))
            continue
        val = float(flux.value(r))
        worst = max(worst, abs(val - meas))
        rows.append((r, meas, val, float(flux.slope(r)), float(flux.curvature(r))))
    p = out.write_csv("flux.csv", ["rho", "flux_measure", "flux", "slope", "curvature"], rows)
    ok = worst <= 1e-6
    _status(ok, f"closed form vs measure expectation max gap {worst:.3g}; wrote {p}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_regress_table1(cfg, args, out: Output) -> int:
    from .rates import build_s2ep
    from .s2ep_table import attr3_holds, random_attractive_rates, table_deviation

    rng = np.random.Generator(np.random.Philox(key=[args.seed & 0xFFFFFFFFFFFFFFFF, 0]))
    if cfg.family in ("s2ep", "thermal") and not args.random:
        rates = {k: float(v) for k, v in cfg["rates"].items() if "_" in k}
        if not attr3_holds(rates):
            _status(False, "configured rates violate the attractiveness inequalities; the table does not apply")
            return EXIT_FAIL
        samples = [rates]
    else:
        samples = [random_attractive_rates(rng) for _ in range(args.count)]
    devs = []
    for r in samples:
        with np.errstate(all="ignore"):
            devs.append(table_deviation(build_s2ep(r)))
    p = out.write_csv("table1.csv", ["sample", "max_deviation"], enumerate(devs))
    worst = max(devs)
    ok = worst < 1e-12
    _status(ok, f"{len(devs)} rate vector(s), max deviation {worst:.3g}; wrote {p}")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "check-attractive": cmd_check_attractive,
    "build-coupling": cmd_build_coupling,
    "detect-exchanges": cmd_detect_exchanges,
    "check-ic": cmd_check_ic,
    "simulate": cmd_simulate,
    "simulate-coupled": cmd_simulate_coupled,
    "hydro-riemann": cmd_hydro_riemann,
    "flux-table": cmd_flux_table,
    "regress-table1": cmd_regress_table1,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="replicas run concurrently")
    common.add_argument("--out", help="output directory (overrides [output] dir)")
    common.add_argument("--model", help="model family (overrides [model] family)")

    parser = argparse.ArgumentParser(prog="ipscoupling", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("check-attractive", parents=[common], help="monotonicity inequalities on a value window")
    p.add_argument("--window", type=int, help="largest value scanned")
    p = sub.add_parser("build-coupling", parents=[common], help="coupling rates for one quadruple")
    p.add_argument("--quad", type=int, nargs=4, metavar=("A", "B", "C", "D"))
    p.add_argument("--z", type=int)
    p = sub.add_parser("detect-exchanges", parents=[common], help="search for exchanges of discrepancies")
    p.add_argument("--window", type=int, help="largest value scanned")
    p = sub.add_parser("check-ic", parents=[common], help="irreducibility conditions")
    p.add_argument("--window", type=int, help="site radius")
    p.add_argument("--values", type=int, help="value window W")
    for name, text in (("simulate", "single-process replicas"),
                       ("simulate-coupled", "coupled replicas with order and stability counters")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--L", type=int, help="number of sites")
        p.add_argument("--T", type=float, help="time horizon")
        p.add_argument("--boundary", help="periodic, closed or reservoir")
        p.add_argument("--replicas", type=int)
    p = sub.add_parser("hydro-riemann", parents=[common], help="entropy solution and Monte Carlo profile")
    p.add_argument("--lambda", dest="lam", type=float, help="left density")
    p.add_argument("--rho", type=float, help="right density")
    p.add_argument("--N", type=int, help="scaling parameter")
    p.add_argument("--t", type=float, help="macroscopic time")
    p.add_argument("--replicas", type=int)
    p.add_argument("--no-mc", action="store_true", help="only solve the Riemann problem")
    sub.add_parser("flux-table", parents=[common], help="flux, derivatives and measure expectation on a grid")
    p = sub.add_parser("regress-table1", parents=[common], help="closed form vs the reference two-species table")
    p.add_argument("--count", type=int, default=100, help="random rate vectors when no S2EP model is configured")
    p.add_argument("--random", action="store_true", help="ignore configured rates and draw random ones")
    return parser


_FLAG_KEYS = {
    "simulate": "simulation", "simulate-coupled": "simulation", "hydro-riemann": "hydro",
}


def _overrides(args) -> dict:
    """Command-line values that replace config entries."""
    over: dict = {}
    if getattr(args, "model", None) is not None:
        over["model"] = {"family": args.model}
    sec = _FLAG_KEYS.get(args.command)
    if sec is not None:
        for key in ("L", "T", "boundary", "replicas", "lam", "rho", "N", "t"):
            val = getattr(args, key, None)
            if val is not None:
                over.setdefault(sec, {})[key] = val
    return over


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, _overrides(args))
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is None:
        args.seed = cfg["simulation"]["seed"] if args.command.startswith("simulate") else cfg["hydro"]["seed"]
    cfg["simulation"]["seed"] = cfg["hydro"]["seed"] = args.seed
    out = Output(cfg, args, args.command)
    try:
        return COMMANDS[args.command](cfg, args, out)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
