"""Analytic performance of D2D offloading with per-cell TDMA scheduling.

Each active link gets a dedicated slot, so reception is noise-limited; the
price is circuit energy: while one helper transmits, the other scheduled
helpers idle at ``idle_power``, which inflates the effective circuit draw to
``P_c + (N_a - 1) * P_cI`` with ``N_a`` the average number of scheduled
receivers.  Formally the metrics are the full-reuse ones with interference
switched off and that circuit draw folded into the SINR threshold, which is
how this module computes everything except the offloading ratio, where the
threshold integral collapses to exponential integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import fullreuse
from .caching import CachingDistribution, Popularity, offloading_opportunity
from .config import SystemConfig
from .fullreuse import (AnalyticMetrics, DtDensities, OperatingPoint,
                        dt_densities, link_distance_pdf, operating_point)
from .specfun import QuadSpec, expint_e1_scaled, integrate_batch

__all__ = [
    "TdmaContext", "tdma_context", "offload_prob_p2", "offload_prob_p2_los",
    "offload_ratio_p2a", "energy_complete_e2", "energy_cost_e2",
    "tdma_metrics",
]

_OUTER = QuadSpec(rel_tol=1e-8, abs_tol=1e-12, max_subdivisions=400)


@dataclass(frozen=True)
class TdmaContext:
    """Operating point plus the frame-size bookkeeping behind it."""

    op: OperatingPoint       # threshold built from the inflated circuit power
    avg_receivers: float     # N_a = p_o * lambda * cell area
    total_circuit: float     # P_c^T = P_c + max(N_a - 1, 0) * P_cI, W
    densities: DtDensities   # interference-free copy used by the integrals


def _quiet(dens: DtDensities) -> DtDensities:
    """Same helper geometry, no interference field."""
    return replace(dens, active_density=np.zeros_like(dens.active_density),
                   total_active=0.0, active_prob=0.0)


def tdma_context(cfg: SystemConfig, popularity: Popularity,
                 caching: CachingDistribution, tx_power: float,
                 battery_fraction: float | None = None) -> TdmaContext:
    """Threshold and circuit bookkeeping for one TDMA operating point."""
    p_o = offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                 popularity, caching)
    n_a = p_o * cfg.user_density * cfg.cell_area
    total = cfg.tx_circuit_power + max(n_a - 1.0, 0.0) * cfg.idle_power
    op = operating_point(cfg, tx_power, battery_fraction, circuit_power=total)
    dens = _quiet(dt_densities(cfg, popularity, caching))
    return TdmaContext(op=op, avg_receivers=n_a, total_circuit=total,
                       densities=dens)


def offload_prob_p2(cfg: SystemConfig, popularity: Popularity,
                    caching: CachingDistribution, ctx: TdmaContext) -> float:
    """Probability a scheduled link's SNR clears the TDMA threshold."""
    if cfg.pathloss_exponent == 2.0:
        return offload_prob_p2_los(cfg, popularity, caching, ctx)
    return fullreuse.offload_prob_p1(cfg, popularity, caching, ctx.op,
                                     dens=ctx.densities)


def offload_prob_p2_los(cfg: SystemConfig, popularity: Popularity,
                        caching: CachingDistribution,
                        ctx: TdmaContext) -> float:
    """Closed form of :func:`offload_prob_p2`; exact when alpha == 2."""
    lam_i = ctx.densities.helper_density
    phi = ctx.op.sigma0_sq * ctx.op.gamma + math.pi * lam_i
    terms = np.zeros_like(lam_i)
    live = lam_i > 0.0
    terms[live] = (math.pi * lam_i[live] / phi[live]
                   * -np.expm1(-phi[live] * cfg.collab_distance ** 2))
    return float(np.dot(popularity.pmf, terms))


def _ratio_kernel(a_vals: np.ndarray, gamma: float, ln1p: float) -> np.ndarray:
    """e^A (Ei(-A(1+Gamma)) - Ei(-A)) for noise exponents A = sigma0^2 r^alpha.

    Equals integral(exp(-A t)/(1+t), t=0..Gamma); evaluated through scaled
    exponential integrals with series fallbacks where they would cancel.
    """
    out = np.empty(len(a_vals))
    for k, a in enumerate(a_vals):
        if a == 0.0:
            out[k] = ln1p
        elif a * gamma <= 1e-3:
            # Short-window expansion in powers of A about the A -> 0 limit.
            j1 = gamma - ln1p
            j2 = 0.5 * gamma * gamma - gamma + ln1p
            out[k] = ln1p - a * j1 + 0.5 * a * a * j2
        elif a * gamma > 700.0:
            out[k] = expint_e1_scaled(a)
        else:
            out[k] = (expint_e1_scaled(a)
                      - math.exp(-a * gamma) * expint_e1_scaled(a * (1.0 + gamma)))
    return out


def offload_ratio_p2a(cfg: SystemConfig, popularity: Popularity,
                      caching: CachingDistribution, ctx: TdmaContext) -> float:
    """Expected fraction of requested traffic delivered under TDMA.

    The threshold integral of the Rayleigh SNR law has the exponential
    integral primitive, leaving a single radial quadrature.
    """
    op = ctx.op
    alpha = cfg.pathloss_exponent
    w = popularity.pmf
    lam_i = ctx.densities.helper_density

    def f(r: np.ndarray) -> np.ndarray:
        a_vals = op.sigma0_sq * r ** alpha
        window = _ratio_kernel(a_vals, op.gamma, op.log1p_gamma)
        return (link_distance_pdf(lam_i, r) @ w) * window

    value = integrate_batch(f, 0.0, cfg.collab_distance, _OUTER)
    return float(value) / op.log1p_gamma


def energy_complete_e2(cfg: SystemConfig, popularity: Popularity,
                       caching: CachingDistribution, ctx: TdmaContext) -> float:
    """Mean transmitter energy per completed transfer, J (transmit plus the
    idle draw across the frame)."""
    return fullreuse.energy_complete_e1(cfg, popularity, caching, ctx.op,
                                        dens=ctx.densities)


def energy_cost_e2(cfg: SystemConfig, popularity: Popularity,
                   caching: CachingDistribution, ctx: TdmaContext) -> float:
    """Mean transmitter energy per served request over battery energy QV_0."""
    return fullreuse.energy_cost_e1(cfg, popularity, caching, ctx.op,
                                    dens=ctx.densities)


def tdma_metrics(cfg: SystemConfig, popularity: Popularity,
                 caching: CachingDistribution, tx_power: float,
                 battery_fraction: float | None = None) -> AnalyticMetrics:
    """All TDMA metrics at one operating point."""
    ctx = tdma_context(cfg, popularity, caching, tx_power, battery_fraction)
    p_o = offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                 popularity, caching)
    return AnalyticMetrics(
        scheme="tdma",
        tx_power=tx_power,
        battery_fraction=ctx.op.battery_fraction,
        p_opportunity=p_o,
        p_offload=offload_prob_p2(cfg, popularity, caching, ctx),
        p_ratio=offload_ratio_p2a(cfg, popularity, caching, ctx),
        energy_complete=energy_complete_e2(cfg, popularity, caching, ctx),
        energy_cost=energy_cost_e2(cfg, popularity, caching, ctx),
    )
