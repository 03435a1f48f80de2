"""Transmit-power selection maximizing the offloading probability.

Three routes: bracketed golden-section search on the quadrature objective
(general pathloss), the cubic closed form for the line-of-sight model, and
the closed form for one-at-a-time scheduling with its maximum-power clamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SystemConfig, derived
from .caching import CachingDistribution, Popularity
from . import fullreuse, tdma

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class PowerOptError(ValueError):
    pass


@dataclass(frozen=True)
class PowerResult:
    p_star: float       # W
    objective: float    # offloading probability at p_star
    clamped: bool       # optimum sits at max_tx_power
    method: str         # "search" | "cubic" | "closed-form"


def _golden_max(f, lo: float, hi: float, rel_tol: float):
    """Golden-section maximizer on [lo, hi] for a unimodal f."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * max(abs(b), 1e-30):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def optimize_power_full_reuse(cfg: SystemConfig, pop: Popularity,
                              cache: CachingDistribution,
                              battery_fraction: Optional[float] = None,
                              rel_tol: float = 1e-4,
                              n_bracket: int = 24) -> PowerResult:
    """Maximize the full-reuse offloading probability over (0, max_tx_power].

    The objective rises then falls in the transmit power, so a coarse
    log-spaced scan brackets the peak and golden-section search refines it;
    the scan also guards against a peak at either end of the range.
    """
    dens = fullreuse.dt_densities(cfg, pop, cache)

    def objective(p_t: float) -> float:
        op = fullreuse.operating_point(cfg, p_t, battery_fraction)
        return fullreuse._p_offload(cfg, pop, cache, op, dens)

    p_max = cfg.max_tx_power
    grid = np.geomspace(1e-6, p_max, n_bracket)
    vals = np.array([objective(p) for p in grid])
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, n_bracket - 1)]
    p_star, obj = _golden_max(objective, lo, hi, rel_tol)
    if vals[k] > obj:
        p_star, obj = grid[k], vals[k]
    clamped = p_star >= p_max * (1.0 - 10.0 * rel_tol)
    if clamped:
        p_star, obj = p_max, objective(p_max)
    return PowerResult(p_star, obj, clamped, "search")


def optimize_power_los_cubic(cfg: SystemConfig, pop: Popularity,
                             cache: CachingDistribution,
                             battery_fraction: Optional[float] = None) -> PowerResult:
    """Line-of-sight optimum from the cubic stationarity condition.

    Linearizing the exponential in the survival exponent's derivative gives
      mu*a*x^3 + (mu*(a*eta*P_c + 1) + s2*a)*x^2
        + s2*a*eta*P_c*x - s2*eta*P_c = 0
    with mu = pi*lambda_I*ln(1 + r_max) and s2 the noise power referred to
    unit transmit power.  The coefficients change sign exactly once, so
    there is exactly one positive real root; a Newton step polishes it.
    """
    if cfg.pathloss_exponent != 2.0:
        raise PowerOptError("cubic closed form needs pathloss_exponent == 2")
    rho = cfg.battery_fraction if battery_fraction is None else battery_fraction
    dens = fullreuse.dt_densities(cfg, pop, cache)
    a = derived(cfg, cfg.max_tx_power, rho).rate_exponent_coeff
    eta_pc = cfg.pa_efficiency * cfg.tx_circuit_power
    s2 = cfg.noise_power / cfg.pathloss_gain
    mu = math.pi * dens.total_active * math.log1p(cfg.interference_truncation)

    coef = [mu * a,
            mu * (a * eta_pc + 1.0) + s2 * a,
            s2 * a * eta_pc,
            -s2 * eta_pc]
    roots = np.roots(coef)
    real = roots[np.abs(roots.imag) < 1e-9 * np.maximum(np.abs(roots.real), 1.0)].real
    pos = real[real > 0]
    if pos.size == 0:
        raise PowerOptError("no positive root of the power cubic")
    x = float(pos.min())
    for _ in range(3):
        fx = ((coef[0] * x + coef[1]) * x + coef[2]) * x + coef[3]
        dfx = (3.0 * coef[0] * x + 2.0 * coef[1]) * x + coef[2]
        if dfx == 0.0:
            break
        x -= fx / dfx

    clamped = x >= cfg.max_tx_power
    p_star = min(x, cfg.max_tx_power)
    op = fullreuse.operating_point(cfg, p_star, rho)
    obj = fullreuse.offload_prob_p1_los(cfg, pop, cache, op, dens)
    return PowerResult(p_star, obj, clamped, "cubic")


def optimize_power_tdma(cfg: SystemConfig, pop: Popularity,
                        cache: CachingDistribution,
                        battery_fraction: Optional[float] = None) -> PowerResult:
    """One-at-a-time scheduling optimum: the objective grows while the
    budget-equivalent threshold shrinks, giving the closed form
      P* = eta*P_cT*(sqrt(1/(a*eta*P_cT) + 1/4) - 1/2)
    clamped to max_tx_power (which is where typical parameters land)."""
    rho = cfg.battery_fraction if battery_fraction is None else battery_fraction
    ctx = tdma.tdma_context(cfg, pop, cache, cfg.max_tx_power, rho)
    a = derived(cfg, cfg.max_tx_power, rho).rate_exponent_coeff
    eta_pct = cfg.pa_efficiency * ctx.total_circuit
    p_unc = eta_pct * (math.sqrt(1.0 / (a * eta_pct) + 0.25) - 0.5)
    clamped = p_unc >= cfg.max_tx_power
    p_star = min(p_unc, cfg.max_tx_power)
    ctx_star = tdma.tdma_context(cfg, pop, cache, p_star, rho)
    obj = tdma.offload_prob_p2(cfg, pop, cache, ctx_star)
    return PowerResult(p_star, obj, clamped, "closed-form")
