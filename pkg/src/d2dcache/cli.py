"""Command line front end.

Subcommands cover the library surface: cache placement (``solve-caching``),
closed-form metrics (``analytic``), the drop simulator (``mc``), transmit
power optimization (``optimize-power``), parameter scans (``sweep``),
figure-style presets (``figure``) and the analytic-vs-simulation agreement
report (``compare``).  All quantities are SI on the command line; natural
units (MHz, mW, MB, dBm) are available through ``--set`` with the same keys
a config file uses.

Exit codes: 0 success, 1 tolerance failure in ``compare``, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from . import config as _config
from . import fullreuse, poweropt, sweeps, tdma
from .caching import (CachingError, baseline_caching, offloading_opportunity,
                      optimal_caching, zipf)
from .config import ConfigError, SystemConfig, validate
from .mc import Scenario, SimulationError, backend_name, run_monte_carlo
from .poweropt import PowerOptError
from .sweeps import SweepError, SweepTable

_USAGE_ERRORS = (ConfigError, CachingError, SweepError, SimulationError,
                 PowerOptError)


def _add_global_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH",
                   help="key = value config file; defaults when omitted")
    p.add_argument("--set", dest="assignments", action="append", default=[],
                   metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--seed", type=int, default=20260814,
                   help="base seed for every stochastic step")
    p.add_argument("--out", metavar="PATH",
                   help="write the result here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="output encoding")


def _build_cfg(args) -> SystemConfig:
    raw = (_config.load_config(args.config) if args.config
           else dict(_config.DEFAULTS))
    raw = _config.apply_overrides(raw, args.assignments)
    return validate(raw)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table_text(args, table: SweepTable) -> str:
    return table.to_json() if args.format == "json" else table.to_csv()


def _pop_cache(cfg: SystemConfig, policy: str):
    pop = zipf(cfg.catalog_size, cfg.zipf_exponent)
    if policy == "optimal":
        cache = optimal_caching(cfg.user_density, cfg.collab_distance, pop)
    else:
        cache = baseline_caching(policy, pop)
    return pop, cache


def _parse_grid(text: str) -> tuple:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 4:
            raise SweepError("grid range must be lo:hi:n:lin|log")
        return (float(parts[0]), float(parts[1]), int(parts[2]), parts[3])
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise SweepError(f"bad grid: {text!r}") from None


def _cmd_solve_caching(args) -> int:
    cfg = _build_cfg(args)
    pop, cache = _pop_cache(cfg, args.policy)
    p_o = offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                 pop, cache)
    head = cfg.catalog_size if args.head == 0 else min(args.head,
                                                       cfg.catalog_size)
    rows = [[i + 1, float(pop.pmf[i]), float(cache.pmf[i])]
            for i in range(head)]
    table = SweepTable(
        columns=["file_index", "p_request", "p_cache"], rows=rows,
        meta={"policy": cache.policy, "cutoff": cache.cutoff, "p_o": p_o})
    _emit(args, _table_text(args, table))
    print(f"policy={cache.policy} cutoff={cache.cutoff} p_o={p_o:.6f}",
          file=sys.stderr)
    return 0


def _scheme_list(scheme: str) -> list[str]:
    return ["full-reuse", "tdma"] if scheme == "both" else [scheme]


def _cmd_analytic(args) -> int:
    cfg = _build_cfg(args)
    pop, cache = _pop_cache(cfg, args.policy)
    p_t = args.tx_power if args.tx_power is not None else cfg.max_tx_power
    rows = []
    for s in _scheme_list(args.scheme):
        if s == "full-reuse":
            m = fullreuse.full_reuse_metrics(cfg, pop, cache, p_t, args.rho)
        else:
            m = tdma.tdma_metrics(cfg, pop, cache, p_t, args.rho)
        rows.append([s, m.tx_power, m.battery_fraction, m.p_opportunity,
                     m.p_offload, m.p_ratio, m.energy_complete,
                     m.energy_cost])
    table = SweepTable(
        columns=["scheme", "tx_power_w", "battery_fraction", "p_o",
                 "p_offload", "p_ratio", "energy_complete_j", "energy_cost"],
        rows=rows, meta={})
    _emit(args, _table_text(args, table))
    return 0


def _cmd_mc(args) -> int:
    cfg = _build_cfg(args)
    if args.cache_slots is not None:
        cfg = _config.with_updates(cfg, cache_slots=args.cache_slots)
    pop, cache = _pop_cache(cfg, args.policy)
    p_t = args.tx_power if args.tx_power is not None else cfg.max_tx_power
    scen = Scenario(
        popularity=pop, cache=cache, scheme=args.scheme, tx_power=p_t,
        battery_fraction=args.rho, n_requests=args.requests,
        cache_slots=cfg.cache_slots, conflict=args.conflict,
        include_self=args.self_offload, edge_margin=args.edge_margin,
        truncate_interference=args.truncate,
        realistic_interference=args.realistic)
    res = run_monte_carlo(cfg, scen, args.drops, args.seed, args.workers)
    rows = [[name, est.mean, est.half_width_95]
            for name, est in res.estimates.items()]
    table = SweepTable(
        columns=["metric", "mean", "half_width_95"], rows=rows,
        meta={"n_drops": res.n_drops, "backend": res.backend,
              "scheme": args.scheme, "tx_power_w": p_t,
              "max_request_energy_j": res.max_request_energy})
    _emit(args, _table_text(args, table))
    print(f"{res.n_drops} drops, backend={res.backend}, "
          f"max_request_energy={res.max_request_energy:.3f} J",
          file=sys.stderr)
    return 0


def _cmd_optimize_power(args) -> int:
    cfg = _build_cfg(args)
    pop, cache = _pop_cache(cfg, args.policy)
    picks = (["full-reuse", "tdma"] if args.scheme == "both"
             else [args.scheme])
    rows = []
    for s in picks:
        if s == "full-reuse":
            r = poweropt.optimize_power_full_reuse(cfg, pop, cache, args.rho)
        elif s == "los":
            r = poweropt.optimize_power_los_cubic(cfg, pop, cache, args.rho)
        else:
            r = poweropt.optimize_power_tdma(cfg, pop, cache, args.rho)
        rows.append([s, r.method, r.p_star, r.objective, int(r.clamped)])
    table = SweepTable(
        columns=["scheme", "method", "p_star_w", "objective", "clamped"],
        rows=rows, meta={})
    _emit(args, _table_text(args, table))
    return 0


def _runner_overrides(args) -> dict:
    ov: dict = {}
    if args.policy != "optimal":
        ov["cache_policy"] = args.policy
    if args.requests != 1:
        ov["n_requests"] = args.requests
    if args.self_offload:
        ov["include_self"] = True
    if args.conflict != "shared":
        ov["conflict"] = args.conflict
    if args.truncate is not None:
        ov["truncate_interference"] = args.truncate
    return ov


def _cmd_sweep(args) -> int:
    cfg = _build_cfg(args)
    spec = sweeps.make_sweep(
        args.variable, _parse_grid(args.grid),
        overrides=_runner_overrides(args),
        scheme=args.scheme,
        outputs=tuple(s.strip() for s in args.outputs.split(",") if s.strip()),
        mc_drops=args.drops,
        tx_power=args.tx_power,
        optimize_power=args.optimize_power)
    table = sweeps.run_sweep(cfg, spec, seed=args.seed, workers=args.workers)
    _emit(args, _table_text(args, table))
    return 0


def _cmd_figure(args) -> int:
    cfg = _build_cfg(args)
    spec = sweeps.figure_preset(args.name, cfg, full=args.full)
    table = sweeps.run_sweep(cfg, spec, mc_drops=args.drops,
                             seed=args.seed, workers=args.workers)
    _emit(args, _table_text(args, table))
    if spec.note:
        print(f"{args.name}: {spec.note}", file=sys.stderr)
    return 0


def _cmd_compare(args) -> int:
    cfg = _build_cfg(args)
    grid = _parse_grid(args.grid)
    if isinstance(grid, tuple) and len(grid) == 4 and isinstance(grid[3], str):
        raise SweepError("compare expects an explicit list of powers")
    report = sweeps.compare_report(
        cfg, args.scheme, grid, n_drops=args.drops, abs_tol=args.abs_tol,
        rel_tol=args.rel_tol, hw_factor=args.hw_factor, seed=args.seed,
        workers=args.workers)
    _emit(args, report.to_json() if args.format == "json"
          else report.to_csv())
    if not report.rows:
        print("nothing compared: empty grid", file=sys.stderr)
        return 2
    n_fail = sum(not r["passed"] for r in report.rows)
    print(f"{len(report.rows)} checks, {n_fail} failures", file=sys.stderr)
    return 0 if report.all_pass else 1


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="d2dcache",
        description="Cache-enabled D2D offloading: analysis and simulation")
    sub = top.add_subparsers(dest="command", required=True)

    def cmd(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_global_flags(p)
        p.set_defaults(handler=handler)
        return p

    p = cmd("solve-caching", _cmd_solve_caching,
            "cache placement distribution and offloading opportunity")
    p.add_argument("--policy", default="optimal",
                   choices=("optimal", "uniform", "popularity"))
    p.add_argument("--head", type=int, default=20,
                   help="rows to emit (0 = whole catalog)")

    p = cmd("analytic", _cmd_analytic, "closed-form metrics at one point")
    p.add_argument("--scheme", default="both",
                   choices=("full-reuse", "tdma", "both"))
    p.add_argument("--tx-power", type=float, default=None,
                   help="transmit power in W (default: max_tx_power)")
    p.add_argument("--rho", type=float, default=None,
                   help="battery fraction override")
    p.add_argument("--policy", default="optimal",
                   choices=("optimal", "uniform", "popularity"))

    p = cmd("mc", _cmd_mc, "Monte Carlo drop simulation")
    p.add_argument("--scheme", default="full-reuse",
                   choices=("full-reuse", "tdma"))
    p.add_argument("--drops", type=int, default=200)
    p.add_argument("--tx-power", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--requests", type=int, default=1,
                   help="request rounds per drop")
    p.add_argument("--cache-slots", type=int, default=None)
    p.add_argument("--policy", default="optimal",
                   choices=("optimal", "uniform", "popularity"))
    p.add_argument("--self-offload", action="store_true",
                   help="count own-cache hits as offloaded")
    p.add_argument("--conflict", default="shared",
                   choices=("shared", "exclusive"))
    p.add_argument("--edge-margin", type=float, default=None,
                   help="measurement window margin in m")
    p.add_argument("--truncate", type=float, default=None,
                   help="interference truncation radius in m")
    p.add_argument("--realistic", action="store_true",
                   help="event-driven interference that decays as links finish")
    p.add_argument("--workers", type=int, default=None)

    p = cmd("optimize-power", _cmd_optimize_power,
            "offloading-optimal transmit power")
    p.add_argument("--scheme", default="both",
                   choices=("full-reuse", "tdma", "los", "both"))
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--policy", default="optimal",
                   choices=("optimal", "uniform", "popularity"))

    p = cmd("sweep", _cmd_sweep, "scan one variable over a grid")
    p.add_argument("--variable", required=True,
                   help="P_t | r_c | rho | beta | F | P_cI | N_r")
    p.add_argument("--grid", required=True,
                   help="comma list or lo:hi:n:lin|log")
    p.add_argument("--scheme", default="both",
                   choices=("full-reuse", "tdma", "both"))
    p.add_argument("--outputs", default="p_o,p_offload,p_ratio,energy_cost",
                   help="comma list of metrics")
    p.add_argument("--drops", type=int, default=0,
                   help="MC drops per point (0 = analytic only)")
    p.add_argument("--tx-power", type=float, default=None)
    p.add_argument("--optimize-power", action="store_true")
    p.add_argument("--policy", default="optimal",
                   choices=("optimal", "uniform", "popularity"))
    p.add_argument("--requests", type=int, default=1)
    p.add_argument("--self-offload", action="store_true")
    p.add_argument("--conflict", default="shared",
                   choices=("shared", "exclusive"))
    p.add_argument("--truncate", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)

    p = cmd("figure", _cmd_figure, "run a named preset scan")
    p.add_argument("name", choices=sweeps.PRESET_NAMES)
    p.add_argument("--full", action="store_true",
                   help="full-resolution grids and drop counts")
    p.add_argument("--drops", type=int, default=None,
                   help="override the preset's MC drops")
    p.add_argument("--workers", type=int, default=None)

    p = cmd("compare", _cmd_compare, "analytic-vs-MC agreement report")
    p.add_argument("--scheme", default="both",
                   choices=("full-reuse", "tdma", "both"))
    p.add_argument("--grid", default="0.001,0.01,0.05,0.1,0.2",
                   help="comma list of transmit powers in W")
    p.add_argument("--drops", type=int, default=400)
    p.add_argument("--abs-tol", type=float, default=0.02)
    p.add_argument("--rel-tol", type=float, default=0.10)
    p.add_argument("--hw-factor", type=float, default=3.0)
    p.add_argument("--workers", type=int, default=None)

    return top


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
