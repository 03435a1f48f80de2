"""Parameter sweeps, figure-style presets and analytic-vs-MC comparison.

A :class:`SweepSpec` names one scan variable, a grid, fixed overrides and
optional labelled variants (extra override sets crossed with the grid).
``run_sweep`` evaluates the analytic metrics, optionally the Monte Carlo
estimates, for every (variant, grid value) pair and returns a table whose
CSV rendering is byte-stable for fixed inputs and seed.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, fields as dc_fields, replace
from functools import lru_cache
from typing import Mapping, Optional, Sequence

import numpy as np

from . import fullreuse, poweropt, tdma
from .caching import (CachingDistribution, Popularity, baseline_caching,
                      offloading_opportunity, optimal_caching, zipf)
from .config import SystemConfig, urban_defaults, with_updates
from .mc import Scenario, run_monte_carlo


class SweepError(ValueError):
    """Bad sweep description, metric name or preset name."""


# scan variable -> (CSV column, SystemConfig field or None)
_VARIABLES = {
    "P_t": ("tx_power_w", None),
    "r_c": ("collab_distance_m", "collab_distance"),
    "rho": ("battery_fraction", "battery_fraction"),
    "beta": ("zipf_exponent", "zipf_exponent"),
    "F": ("file_size_bits", "file_size"),
    "P_cI": ("idle_power_w", "idle_power"),
    "N_r": ("n_requests", None),
}
_VARIABLE_ALIASES = {
    "p_t": "P_t", "tx_power": "P_t", "ρ": "rho", "β": "beta",
    "battery_fraction": "rho", "zipf_exponent": "beta", "f": "F",
    "file_size": "F", "p_ci": "P_cI", "idle_power": "P_cI",
    "r_c": "r_c", "collab_distance": "r_c", "n_r": "N_r",
    "n_requests": "N_r",
}

# per-scheme metrics, in the order their columns appear
_SCHEME_OUTPUTS = ("p_offload", "p_ratio", "energy_cost",
                   "energy_complete_j", "p_star")
_MC_KEYS = {"p_o", "p_offload", "p_ratio", "energy_cost", "energy_complete_j"}
_OUTPUTS = {"p_o", "caching_head"} | set(_SCHEME_OUTPUTS)
_HEAD_FILES = 8

# override keys consumed by the sweep runner rather than SystemConfig
_RUNNER_KEYS = ("cache_policy", "n_requests", "include_self", "conflict",
                "truncate_interference", "mc_drops", "analytic", "tx_power")
_CFG_FIELDS = frozenset(f.name for f in dc_fields(SystemConfig))


@dataclass(frozen=True)
class SweepSpec:
    """One scan: variable, grid, fixed overrides, labelled variants.

    ``overrides`` and each variant's override set may mix SystemConfig
    fields with runner keys (cache_policy, n_requests, include_self,
    conflict, truncate_interference, mc_drops, analytic, tx_power).
    Variants are crossed with the grid; each contributes one row per grid
    value, labelled in a leading ``variant`` column.
    """

    variable: str
    grid: tuple[float, ...]
    overrides: tuple[tuple[str, object], ...] = ()
    variants: tuple[tuple[str, tuple[tuple[str, object], ...]], ...] = ()
    scheme: str = "both"
    outputs: tuple[str, ...] = ("p_o", "p_offload", "p_ratio", "energy_cost")
    mc_drops: int = 0
    tx_power: Optional[float] = None
    optimize_power: bool = False
    note: str = ""


def make_sweep(variable: str,
               grid,
               overrides: Optional[Mapping[str, object]] = None,
               variants: Optional[Sequence] = None,
               **kw) -> SweepSpec:
    """Build a validated :class:`SweepSpec`.

    ``grid`` is either an explicit sequence of values or a 4-tuple
    ``(lo, hi, n, "lin"|"log")``.
    """
    key = _VARIABLE_ALIASES.get(str(variable).lower(), variable)
    if key not in _VARIABLES:
        raise SweepError(f"unknown sweep variable: {variable!r}")

    if (isinstance(grid, tuple) and len(grid) == 4
            and isinstance(grid[3], str)):
        lo, hi, n, kind = grid
        n = int(n)
        if n < 1:
            raise SweepError("grid needs at least one point")
        if kind == "lin":
            values = np.linspace(float(lo), float(hi), n)
        elif kind == "log":
            if not (lo > 0 and hi > 0):
                raise SweepError("log grid endpoints must be > 0")
            values = np.geomspace(float(lo), float(hi), n)
        else:
            raise SweepError(f"grid kind must be lin or log, got {kind!r}")
        grid = tuple(float(v) for v in values)
    else:
        grid = tuple(float(v) for v in grid)
    if not grid:
        raise SweepError("grid must not be empty")
    if key == "N_r":
        if any(v != int(v) or v < 1 for v in grid):
            raise SweepError("N_r grid values must be integers >= 1")
    elif key != "P_cI" and any(v <= 0 for v in grid):
        raise SweepError(f"{key} grid values must be > 0")

    spec = SweepSpec(
        variable=key,
        grid=grid,
        overrides=_freeze(overrides),
        variants=tuple((label, _freeze(ov)) for label, ov in (variants or ())),
        **kw,
    )
    if spec.scheme not in ("full-reuse", "tdma", "both"):
        raise SweepError(f"unknown scheme: {spec.scheme!r}")
    if spec.optimize_power and key == "P_t":
        raise SweepError("cannot both sweep P_t and optimize it")
    for name in spec.outputs:
        if name not in _OUTPUTS:
            raise SweepError(f"unknown output metric: {name!r}")
    for _, ov in spec.variants or ():
        _split_overrides(dict(ov))
    _split_overrides(dict(spec.overrides))
    return spec


def _freeze(mapping) -> tuple:
    if not mapping:
        return ()
    return tuple((str(k), v) for k, v in dict(mapping).items())


def _split_overrides(opts: dict) -> tuple[dict, dict]:
    """Partition an override map into SystemConfig fields and runner keys."""
    cfg_part, run_part = {}, {}
    for k, v in opts.items():
        if k in _RUNNER_KEYS:
            run_part[k] = v
        elif k in _CFG_FIELDS:
            cfg_part[k] = v
        else:
            raise SweepError(f"unknown override key: {k!r}")
    return cfg_part, run_part


@dataclass
class SweepTable:
    """Ordered sweep output; one row per (variant, grid value)."""

    columns: list[str]
    rows: list[list]
    meta: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_cell(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"meta": self.meta, "columns": self.columns,
             "rows": [[_jsonable(v) for v in row] for row in self.rows]},
            indent=2, sort_keys=True) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".10g")


def _jsonable(v):
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _schemes(scheme: str) -> tuple[str, ...]:
    return ("full-reuse", "tdma") if scheme == "both" else (scheme,)


def _suffix(scheme: str, many: bool) -> str:
    if not many:
        return ""
    return "_fr" if scheme == "full-reuse" else "_tdma"


def _plan_columns(spec: SweepSpec, schemes: tuple[str, ...],
                  mc_on: bool) -> list[str]:
    many = len(schemes) > 1
    cols = []
    if spec.variants:
        cols.append("variant")
    cols.append(_VARIABLES[spec.variable][0])
    for name in spec.outputs:
        if name == "p_o":
            cols.append("p_o")
            if mc_on:
                cols += ["mc_p_o", "mc_p_o_hw"]
        elif name == "caching_head":
            cols += [f"pc_{i}" for i in range(1, _HEAD_FILES + 1)]
            cols.append("cutoff")
        else:
            for s in schemes:
                sfx = _suffix(s, many)
                if name == "p_star":
                    cols.append(f"p_star{sfx}_w")
                    continue
                cols.append(f"{name}{sfx}")
                if mc_on and name in _MC_KEYS:
                    cols += [f"mc_{name}{sfx}", f"mc_{name}{sfx}_hw"]
    return cols


def _resolve_point(cfg: SystemConfig, spec: SweepSpec, variant_ov: dict,
                   value: float):
    """Config, popularity, cache and scenario options for one grid point."""
    opts = dict(spec.overrides)
    opts.update(variant_ov)
    cfg_part, run_part = _split_overrides(opts)

    field = _VARIABLES[spec.variable][1]
    if field is not None:
        cfg_part[field] = value
    elif spec.variable == "N_r":
        run_part["n_requests"] = int(value)
    cfg_i = with_updates(cfg, **cfg_part) if cfg_part else cfg

    pop = zipf(cfg_i.catalog_size, cfg_i.zipf_exponent)
    policy = run_part.get("cache_policy", "optimal")
    if policy == "optimal":
        cache = optimal_caching(cfg_i.user_density, cfg_i.collab_distance, pop)
    else:
        cache = baseline_caching(policy, pop)
    return cfg_i, pop, cache, run_part


def _operating_powers(cfg_i, pop, cache, spec, run_part, value,
                      schemes) -> dict[str, float]:
    if spec.optimize_power:
        out = {}
        for s in schemes:
            if s == "full-reuse":
                out[s] = poweropt.optimize_power_full_reuse(
                    cfg_i, pop, cache).p_star
            else:
                out[s] = poweropt.optimize_power_tdma(cfg_i, pop, cache).p_star
        return out
    if spec.variable == "P_t":
        p = value
    else:
        p = run_part.get("tx_power", spec.tx_power)
        if p is None:
            p = cfg_i.max_tx_power
    return {s: float(p) for s in schemes}


def run_sweep(cfg: SystemConfig, sweep: SweepSpec,
              scheme: Optional[str] = None,
              outputs: Optional[Sequence[str]] = None, *,
              mc_drops: Optional[int] = None, seed: int = 20260814,
              workers: Optional[int] = None) -> SweepTable:
    """Evaluate a sweep; rows follow variant-major, grid-minor order.

    ``scheme``/``outputs``/``mc_drops`` override the corresponding spec
    fields when given.  Each row draws from an independent, deterministic
    seed stream, so the table is reproducible for a fixed ``seed``
    regardless of worker count.
    """
    if scheme is not None or outputs is not None or mc_drops is not None:
        sweep = replace(
            sweep,
            scheme=sweep.scheme if scheme is None else scheme,
            outputs=sweep.outputs if outputs is None else tuple(outputs),
            mc_drops=sweep.mc_drops if mc_drops is None else int(mc_drops),
        )
        # re-validate the replaced fields
        sweep = make_sweep(sweep.variable, sweep.grid,
                           dict(sweep.overrides),
                           [(l, dict(o)) for l, o in sweep.variants],
                           scheme=sweep.scheme, outputs=sweep.outputs,
                           mc_drops=sweep.mc_drops, tx_power=sweep.tx_power,
                           optimize_power=sweep.optimize_power,
                           note=sweep.note)

    schemes = _schemes(sweep.scheme)
    variants = sweep.variants or (("", ()),)
    mc_any = sweep.mc_drops > 0 or any(
        dict(ov).get("mc_drops", 0) > 0 for _, ov in variants)
    columns = _plan_columns(sweep, schemes, mc_any)

    rows = []
    row_idx = 0
    for label, var_ov in variants:
        for value in sweep.grid:
            rows.append(_eval_row(cfg, sweep, label, dict(var_ov), value,
                                  schemes, columns,
                                  seed + 7919 * row_idx, workers))
            row_idx += 1
    meta = {"variable": sweep.variable, "scheme": sweep.scheme,
            "seed": seed, "mc_drops": sweep.mc_drops, "note": sweep.note}
    return SweepTable(columns=columns, rows=rows, meta=meta)


def _eval_row(cfg, spec, label, variant_ov, value, schemes, columns,
              seed, workers) -> list:
    cfg_i, pop, cache, run_part = _resolve_point(cfg, spec, variant_ov, value)
    analytic_on = bool(run_part.get("analytic", True))
    drops = int(run_part.get("mc_drops", spec.mc_drops))
    powers = _operating_powers(cfg_i, pop, cache, spec, run_part, value,
                               schemes)

    cells: dict[str, object] = {}
    if spec.variants:
        cells["variant"] = label
    cells[_VARIABLES[spec.variable][0]] = value

    metric_names = [n for n in spec.outputs
                    if n not in ("p_o", "caching_head")]
    if analytic_on:
        if "p_o" in spec.outputs:
            cells["p_o"] = offloading_opportunity(
                cfg_i.user_density, cfg_i.collab_distance, pop, cache)
        if "caching_head" in spec.outputs:
            head = np.asarray(cache.pmf)[:_HEAD_FILES]
            for i in range(_HEAD_FILES):
                cells[f"pc_{i + 1}"] = (float(head[i]) if i < head.size
                                        else 0.0)
            cells["cutoff"] = int(cache.cutoff)
        bundle_needed = any(n != "p_star" for n in metric_names)
        for s in schemes:
            if not metric_names:
                break
            sfx = _suffix(s, len(schemes) > 1)
            if bundle_needed:
                if s == "full-reuse":
                    m = fullreuse.full_reuse_metrics(cfg_i, pop, cache,
                                                     powers[s])
                else:
                    m = tdma.tdma_metrics(cfg_i, pop, cache, powers[s])
                values = {"p_offload": m.p_offload, "p_ratio": m.p_ratio,
                          "energy_cost": m.energy_cost,
                          "energy_complete_j": m.energy_complete}
            for name in metric_names:
                if name == "p_star":
                    cells[f"p_star{sfx}_w"] = powers[s]
                else:
                    cells[f"{name}{sfx}"] = values[name]

    if drops > 0:
        for k, s in enumerate(schemes):
            sfx = _suffix(s, len(schemes) > 1)
            scen = Scenario(
                popularity=pop, cache=cache, scheme=s,
                tx_power=powers[s],
                n_requests=int(run_part.get("n_requests", 1)),
                cache_slots=cfg_i.cache_slots,
                conflict=run_part.get("conflict", "shared"),
                include_self=bool(run_part.get("include_self", False)),
                truncate_interference=run_part.get("truncate_interference"),
            )
            res = run_monte_carlo(cfg_i, scen, drops, seed + k, workers)
            if k == 0 and "p_o" in spec.outputs:
                cells["mc_p_o"] = res["p_o"].mean
                cells["mc_p_o_hw"] = res["p_o"].half_width_95
            for name in metric_names:
                if name in _MC_KEYS:
                    est = res[name]
                    cells[f"mc_{name}{sfx}"] = est.mean
                    cells[f"mc_{name}{sfx}_hw"] = est.half_width_95

    return [cells.get(c, float("nan")) for c in columns]


@lru_cache(maxsize=8)
def optimal_collab_distance(cfg: SystemConfig, scheme: str = "tdma",
                            grid: tuple[float, ...] = tuple(
                                range(50, 351, 25))) -> float:
    """Collaboration distance maximizing the offloading ratio at P*.

    Coarse grid scan; each candidate re-solves the caching distribution and
    re-optimizes the transmit power, since both shift with the distance.
    """
    best_rc, best = None, -np.inf
    for rc in grid:
        cfg_i = with_updates(cfg, collab_distance=float(rc))
        pop = zipf(cfg_i.catalog_size, cfg_i.zipf_exponent)
        cache = optimal_caching(cfg_i.user_density, rc, pop)
        if scheme == "tdma":
            p_star = poweropt.optimize_power_tdma(cfg_i, pop, cache).p_star
            ctx = tdma.tdma_context(cfg_i, pop, cache, p_star)
            val = tdma.offload_ratio_p2a(cfg_i, pop, cache, ctx)
        else:
            p_star = poweropt.optimize_power_full_reuse(
                cfg_i, pop, cache).p_star
            op = fullreuse.operating_point(cfg_i, p_star)
            dens = fullreuse.dt_densities(cfg_i, pop, cache)
            val = fullreuse.offload_ratio_p1a(cfg_i, pop, cache, op, dens)
        if val > best:
            best_rc, best = float(rc), val
    return best_rc


_PT_GRID = (1e-3, 1e-2, 5e-2, 1e-1, 2e-1)


def figure_preset(name: str, cfg: Optional[SystemConfig] = None,
                  full: bool = False) -> SweepSpec:
    """Sweep spec reproducing one figure-style experiment.

    Desk-scale grids and drop counts by default; ``full`` switches to
    full resolution.  Presets whose axes depend on the configuration
    (collaboration-distance optimum, interference truncation radius) read
    it from ``cfg``; the default urban scenario is used when omitted.
    """
    cfg = cfg or urban_defaults()
    d = not full  # desk scale

    if name == "fig2a":
        lam = cfg.user_density
        return make_sweep(
            "r_c", (20.0, 100.0, 500.0),
            variants=[
                ("base", {}),
                ("beta_0.6", {"zipf_exponent": 0.6}),
                ("beta_1.5", {"zipf_exponent": 1.5}),
                ("dense_4x", {"user_density": 4 * lam}),
                ("sparse_4x", {"user_density": lam / 4}),
            ],
            scheme="tdma",
            outputs=("caching_head", "p_o"),
            note="head of the optimal caching distribution under distance, "
                 "popularity-skew and density variants",
        )
    if name == "fig2b":
        return make_sweep(
            "r_c", (10.0, 500.0, 21 if d else 41, "lin"),
            variants=[
                ("optimal", {}),
                ("uniform", {"cache_policy": "uniform", "mc_drops": 0}),
                ("popularity", {"cache_policy": "popularity", "mc_drops": 0}),
                ("optimal_m2", {"cache_slots": 2, "analytic": False}),
                ("optimal_m3", {"cache_slots": 3, "analytic": False}),
            ],
            scheme="tdma",  # opportunity is scheme independent; cheap rounds
            outputs=("p_o",),
            mc_drops=120 if d else 1000,
            note="offloading opportunity vs collaboration distance for "
                 "caching policies and cache sizes; analytic curve covers "
                 "single-slot caches, larger caches are simulated",
        )
    if name == "fig3":
        return make_sweep(
            "P_t", (1e-3, 0.2, 9 if d else 15, "log"),
            scheme="both",
            outputs=("p_o", "p_offload", "p_ratio"),
            mc_drops=150 if d else 2000,
            note="analytic curves against simulation for both schemes at "
                 "the default distance and battery fraction",
        )
    if name == "fig4":
        r_max = cfg.interference_truncation
        return make_sweep(
            "P_t", (1e-3, 0.2, 9 if d else 15, "log"),
            variants=[
                ("los", {"pathloss_exponent": 2.0,
                         "truncate_interference": r_max}),
                ("alpha4", {"pathloss_exponent": 4.0}),
            ],
            scheme="both",
            outputs=("p_offload",),
            mc_drops=150 if d else 1500,
            note="special-case path losses: line of sight with truncated "
                 "interference, and a fourth-power outdoor profile",
        )
    if name == "fig5":
        return make_sweep(
            "F", (2.4e8, 2.4e10, 7 if d else 13, "log"),
            scheme="both",
            outputs=("p_offload", "p_ratio", "p_star"),
            optimize_power=True,
            mc_drops=0 if d else 400,
            note="file size impact at the per-point optimal transmit power",
        )
    if name == "fig6":
        return make_sweep(
            "P_cI", (0.0, 0.1, 11 if d else 21, "lin"),
            scheme="both",
            outputs=("p_ratio", "energy_cost", "p_star"),
            optimize_power=True,
            mc_drops=0 if d else 400,
            note="idle-power impact; only the one-at-a-time schedule "
                 "depends on it, the full-reuse columns are flat references",
        )
    if name == "fig7":
        return make_sweep(
            "r_c", (10.0, 400.0, 14 if d else 27, "lin"),
            scheme="both",
            outputs=("p_offload", "p_ratio", "energy_cost", "p_star"),
            optimize_power=True,
            mc_drops=0 if d else 400,
            note="collaboration distance scan with per-point optimal "
                 "transmit power",
        )
    if name == "fig8a":
        return make_sweep(
            "rho", (1e-3, 1.0, 13 if d else 25, "log"),
            scheme="both",
            outputs=("p_offload", "p_ratio", "energy_cost", "p_star"),
            optimize_power=True,
            mc_drops=0 if d else 400,
            note="battery-fraction scan with per-point optimal transmit "
                 "power",
        )
    if name == "fig8b":
        rc_star = optimal_collab_distance(cfg)
        grid = ((0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.85, 1.0) if d
                else (0.05, 1.0, 20, "lin"))
        return make_sweep(
            "rho", grid,
            overrides={"collab_distance": rc_star},
            variants=[
                ("nr1", {"n_requests": 1}),
                ("nr5", {"n_requests": 5}),
                ("nr10", {"n_requests": 10}),
            ],
            scheme="tdma",
            outputs=("p_ratio",),
            mc_drops=150 if d else 1000,
            note=f"multi-request battery scan at the ratio-optimal "
                 f"collaboration distance ({rc_star:g} m); the analytic "
                 f"ratio ignores battery depletion across rounds",
        )
    raise SweepError(f"unknown figure preset: {name!r}")


PRESET_NAMES = ("fig2a", "fig2b", "fig3", "fig4", "fig5", "fig6", "fig7",
                "fig8a", "fig8b")


@dataclass
class CompareReport:
    """Analytic-vs-MC agreement table over a transmit-power grid."""

    rows: list[dict]
    n_drops: int

    @property
    def all_pass(self) -> bool:
        return all(r["passed"] for r in self.rows)

    def to_csv(self) -> str:
        cols = ["tx_power_w", "scheme", "metric", "analytic", "mc_mean",
                "mc_half_width", "abs_diff", "tolerance", "passed"]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for r in self.rows:
            buf.write(",".join(_cell(r[c]) if c != "passed"
                               else ("pass" if r[c] else "FAIL")
                               for c in cols) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"n_drops": self.n_drops, "all_pass": self.all_pass,
             "rows": [{k: _jsonable(v) for k, v in r.items()}
                      for r in self.rows]},
            indent=2, sort_keys=True) + "\n"


def compare_report(cfg: SystemConfig, scheme: str,
                   grid: Sequence[float] = _PT_GRID, *,
                   n_drops: int = 400, abs_tol: float = 0.02,
                   rel_tol: float = 0.10, hw_factor: float = 3.0,
                   seed: int = 20260814,
                   workers: Optional[int] = None) -> CompareReport:
    """Check the analytic curves against simulation on a power grid.

    Probabilities pass when |analytic - MC| <= max(abs_tol,
    hw_factor * half_width); energy costs when the relative gap is within
    ``rel_tol``.  An empty grid yields an empty report.
    """
    schemes = _schemes(scheme)
    pop = zipf(cfg.catalog_size, cfg.zipf_exponent)
    cache = optimal_caching(cfg.user_density, cfg.collab_distance, pop)
    rows: list[dict] = []
    for i, p_t in enumerate(grid):
        p_t = float(p_t)
        for k, s in enumerate(schemes):
            if s == "full-reuse":
                m = fullreuse.full_reuse_metrics(cfg, pop, cache, p_t)
            else:
                m = tdma.tdma_metrics(cfg, pop, cache, p_t)
            scen = Scenario(popularity=pop, cache=cache, scheme=s,
                            tx_power=p_t, cache_slots=cfg.cache_slots)
            res = run_monte_carlo(cfg, scen, n_drops,
                                  seed + 7919 * i + k, workers)
            pairs = (
                ("p_o", m.p_opportunity, False),
                ("p_offload", m.p_offload, False),
                ("p_ratio", m.p_ratio, False),
                ("energy_cost", m.energy_cost, True),
                ("energy_complete_j", m.energy_complete, True),
            )
            for metric, ana, relative in pairs:
                est = res[metric]
                diff = abs(ana - est.mean)
                tol = (rel_tol * abs(ana) if relative
                       else max(abs_tol, hw_factor * est.half_width_95))
                rows.append({
                    "tx_power_w": p_t, "scheme": s, "metric": metric,
                    "analytic": ana, "mc_mean": est.mean,
                    "mc_half_width": est.half_width_95,
                    "abs_diff": diff, "tolerance": tol,
                    "passed": bool(diff <= tol),
                })
    return CompareReport(rows=rows, n_drops=n_drops)
