"""Analytic performance of D2D offloading when all links share the band.

Model recap.  Users form a Poisson field of density lambda; each caches one
file by the caching distribution, requests follow the popularity law, and a
request attaches to the nearest helper caching the file within the
collaboration range.  A link completes the transfer within the helper's
energy allowance exactly when its SINR clears a threshold Gamma fixed by the
file size, bandwidth, and allowance.  Interference comes from the other
active helpers, approximated as independent thinned Poisson fields; the
per-file active densities follow from a Voronoi-cell service model.

All radial and threshold integrals run on the adaptive vector quadrature in
:mod:`d2dcache.specfun`, batched over the whole catalog at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .caching import CachingDistribution, Popularity, offloading_opportunity
from .config import SystemConfig, derived
from .specfun import QuadSpec, integrate_batch, lower_gamma, xi1, xi2_scaled

__all__ = [
    "OperatingPoint", "DtDensities", "AnalyticMetrics",
    "operating_point", "dt_densities", "link_distance_pdf",
    "survival_exponent", "offload_prob_p1", "offload_prob_p1_los",
    "offload_ratio_p1a", "energy_complete_e1", "energy_cost_e1",
    "full_reuse_metrics",
]

# Voronoi cell-area shape parameter for the service model.
_CELL_SHAPE = 3.5

_INNER = QuadSpec(rel_tol=1e-9, abs_tol=1e-13, max_subdivisions=400)
_OUTER = QuadSpec(rel_tol=1e-8, abs_tol=1e-12, max_subdivisions=400)


@dataclass(frozen=True)
class OperatingPoint:
    """Transmit power plus the derived SINR threshold for one scheme.

    ``log1p_gamma`` stores ln(1+Gamma) exactly (it is the rate exponent
    ``a * (P_t + eta * P_circuit)``), so huge thresholds never overflow the
    downstream integrals.
    """

    tx_power: float          # P_t in W
    battery_fraction: float  # rho for this operating point
    circuit_power: float     # P_c (full reuse) or P_c^T (TDMA), W
    gamma: float             # SINR threshold; may be inf for tiny budgets
    log1p_gamma: float       # ln(1 + gamma), always finite
    sigma0_sq: float         # sigma^2 / (P_t K)
    budget_joules: float     # rho Q V_0


@dataclass(frozen=True)
class DtDensities:
    """Per-file helper/active-transmitter densities and service probabilities."""

    helper_density: np.ndarray   # lambda_i = lambda * p_c(i)
    service_prob: np.ndarray     # p_s(i), helper idle probability
    active_density: np.ndarray   # lambda_i^d = lambda_i * (1 - p_s(i))
    total_active: float          # lambda_I = sum_i lambda_i^d
    active_prob: float           # p_a = lambda_I / lambda


@dataclass(frozen=True)
class AnalyticMetrics:
    """One scheme at one operating point."""

    scheme: str              # "full-reuse" | "tdma"
    tx_power: float          # W
    battery_fraction: float
    p_opportunity: float     # content found within range
    p_offload: float         # full file delivered within the allowance
    p_ratio: float           # expected fraction of traffic offloaded
    energy_complete: float   # mean DT spend per completed transfer, J
    energy_cost: float       # mean DT spend per request / battery energy


def operating_point(cfg: SystemConfig, tx_power: float,
                    battery_fraction: float | None = None,
                    circuit_power: float | None = None) -> OperatingPoint:
    """Build the SINR threshold for ``tx_power`` (full-reuse circuit power
    unless ``circuit_power`` overrides it, as TDMA does)."""
    if not 0.0 < tx_power:
        raise ValueError(f"tx_power must be > 0, got {tx_power}")
    rho = cfg.battery_fraction if battery_fraction is None else battery_fraction
    p_circ = cfg.tx_circuit_power if circuit_power is None else circuit_power
    der = derived(cfg, tx_power, rho)
    exponent = der.rate_exponent_coeff * (tx_power + cfg.pa_efficiency * p_circ)
    return OperatingPoint(
        tx_power=tx_power,
        battery_fraction=rho,
        circuit_power=p_circ,
        gamma=float(np.expm1(exponent)),
        log1p_gamma=exponent,
        sigma0_sq=der.sigma0_sq,
        budget_joules=der.budget_joules,
    )


def dt_densities(cfg: SystemConfig, popularity: Popularity,
                 caching: CachingDistribution) -> DtDensities:
    """Thinned helper densities and the share of helpers actually serving.

    A helper for file ``i`` stays idle when no requester of ``i`` lands in
    its service cell within range; the cell-area law gives
    ``p_s(i) = (1 + lambda p_r(i) / (3.5 lambda_i))**-3.5 * theta_i`` with a
    truncation correction ``theta_i`` for the finite collaboration range.
    Files nobody caches get ``p_s = 1`` so they never contribute interference.
    """
    lam = cfg.user_density
    area = math.pi * cfg.collab_distance ** 2
    lam_i = lam * caching.pmf
    req_i = lam * popularity.pmf

    p_s = np.ones_like(lam_i)
    live = lam_i > 0.0
    if live.any():
        li, ri = lam_i[live], req_i[live]
        base = (1.0 + ri / (_CELL_SHAPE * li)) ** -_CELL_SHAPE
        num = np.array([lower_gamma(_CELL_SHAPE, x)
                        for x in (_CELL_SHAPE * li + ri) * area])
        den = np.array([lower_gamma(_CELL_SHAPE, x)
                        for x in _CELL_SHAPE * li * area])
        p_s[live] = base * num / den

    active = lam_i * (1.0 - p_s)
    return DtDensities(
        helper_density=lam_i,
        service_prob=p_s,
        active_density=active,
        total_active=float(active.sum()),
        active_prob=float(1.0 - np.dot(caching.pmf, p_s)),
    )


def link_distance_pdf(helper_density, r):
    """Nearest-helper distance density 2 pi lambda_i r exp(-lambda_i pi r^2).

    Broadcasts nodes ``r`` (k,) against densities (n,) to shape (k, n); not
    normalized on [0, r_c] because the mass beyond range is exactly the miss
    probability.
    """
    lam = np.atleast_1d(np.asarray(helper_density, dtype=float))
    rr = np.asarray(r, dtype=float)[..., None]
    return 2.0 * math.pi * lam * rr * np.exp(-lam * math.pi * rr ** 2)


def _thresholds(s_nodes: np.ndarray) -> np.ndarray:
    # exp(s) - 1 with a finite stand-in past the overflow point; downstream
    # exponents only need "absurdly large", not inf (avoids 0*inf traps).
    return np.where(s_nodes > 709.0, 1e300, np.expm1(np.minimum(s_nodes, 709.0)))


class _Survival:
    """exp(-phi_i(x, r)) evaluator batched over files, thresholds and radii."""

    def __init__(self, cfg: SystemConfig, dens: DtDensities, op: OperatingPoint):
        self.alpha = cfg.pathloss_exponent
        self.sigma0 = op.sigma0_sq
        self.lam_d = dens.active_density      # (n,)
        self.lam_tot = dens.total_active
        self.los = self.alpha == 2.0
        if self.los:
            # Bounded-region approximation of the alpha=2 interference field.
            self.xi_s = math.log1p(cfg.interference_truncation)
        else:
            self.xi_1 = xi1(self.alpha)

    def exponent(self, x: np.ndarray, r: np.ndarray) -> np.ndarray:
        """phi with shape (len(x), n_files, len(r))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=float))
        r_amp = r ** self.alpha
        if self.los:
            coef = x * (self.sigma0 + math.pi * self.lam_tot * self.xi_s)
            phi = coef[:, None, None] * np.broadcast_to(
                r_amp, (len(x), len(self.lam_d), len(r)))
            return phi
        zeta = xi2_scaled(self.alpha, x)                       # (kx,)
        field = (self.lam_tot * self.xi_1 * x ** (2.0 / self.alpha))[:, None] \
            - np.outer(zeta, self.lam_d)                       # (kx, n)
        return (x[:, None, None] * self.sigma0 * r_amp[None, None, :]
                + math.pi * field[:, :, None] * (r ** 2)[None, None, :])

    def mean(self, weights: np.ndarray, pdf_vals: np.ndarray,
             x: np.ndarray, r: np.ndarray) -> np.ndarray:
        """sum_i w_i f_i(r) exp(-phi_i(x, r)) with shape (len(r), len(x))."""
        phi = self.exponent(x, r)                              # (kx, n, kr)
        return np.einsum("n,rn,xnr->rx", weights, pdf_vals, np.exp(-phi))


def survival_exponent(cfg: SystemConfig, dens: DtDensities, op: OperatingPoint,
                      x: float, r: float) -> np.ndarray:
    """Per-file SINR survival exponent phi_i(x, r); exp(-phi) is the chance a
    link at distance r clears threshold x.  Routes to the bounded-region
    variant when alpha == 2."""
    if x < 0.0 or r < 0.0:
        raise ValueError("threshold and distance must be >= 0")
    sv = _Survival(cfg, dens, op)
    return sv.exponent(np.array([x]), np.array([r]))[0, :, 0]


def _gamma_threshold(op: OperatingPoint) -> np.ndarray:
    return _thresholds(np.array([op.log1p_gamma]))


def offload_prob_p1(cfg: SystemConfig, popularity: Popularity,
                    caching: CachingDistribution, op: OperatingPoint,
                    dens: DtDensities | None = None) -> float:
    """Probability a request is fully served over D2D (SINR >= Gamma).

    Needs alpha > 2; use :func:`offload_prob_p1_los` at alpha == 2.
    """
    if cfg.pathloss_exponent <= 2.0:
        raise ValueError("offload_prob_p1 needs alpha > 2; "
                         "use offload_prob_p1_los for the alpha == 2 model")
    dens = dens or dt_densities(cfg, popularity, caching)
    sv = _Survival(cfg, dens, op)
    gam = _gamma_threshold(op)
    w = popularity.pmf

    def f(r: np.ndarray) -> np.ndarray:
        pdf = link_distance_pdf(dens.helper_density, r)
        return sv.mean(w, pdf, gam, r)[:, 0]

    return float(integrate_batch(f, 0.0, cfg.collab_distance, _OUTER))


def offload_prob_p1_los(cfg: SystemConfig, popularity: Popularity,
                        caching: CachingDistribution, op: OperatingPoint,
                        dens: DtDensities | None = None) -> float:
    """Closed-form offloading probability for the alpha == 2 model with the
    interference field truncated at ``cfg.interference_truncation``."""
    dens = dens or dt_densities(cfg, popularity, caching)
    xi_s = math.log1p(cfg.interference_truncation)
    gamma = op.gamma
    lam_i = dens.helper_density
    phi = (op.sigma0_sq * gamma + math.pi * dens.total_active * xi_s * gamma
           + math.pi * lam_i)
    terms = np.zeros_like(lam_i)
    live = lam_i > 0.0
    terms[live] = (math.pi * lam_i[live] / phi[live]
                   * -np.expm1(-phi[live] * cfg.collab_distance ** 2))
    return float(np.dot(popularity.pmf, terms))


def offload_ratio_p1a(cfg: SystemConfig, popularity: Popularity,
                      caching: CachingDistribution, op: OperatingPoint,
                      dens: DtDensities | None = None) -> float:
    """Expected fraction of requested traffic delivered over D2D.

    Averages the capped rate ratio min(ln(1+SINR)/ln(1+Gamma), 1) over the
    SINR law: the threshold variable is integrated on the log scale
    (s = ln(1+t)), which also tames huge Gamma.
    """
    dens = dens or dt_densities(cfg, popularity, caching)
    sv = _Survival(cfg, dens, op)
    ln1p = op.log1p_gamma
    w = popularity.pmf
    r_c = cfg.collab_distance

    def outer(s: np.ndarray) -> np.ndarray:
        x = _thresholds(s)

        def inner(r: np.ndarray) -> np.ndarray:
            return sv.mean(w, link_distance_pdf(dens.helper_density, r), x, r)

        return integrate_batch(inner, 0.0, r_c, _INNER)

    return float(integrate_batch(outer, 0.0, ln1p, _OUTER)) / ln1p


def _tail_integral(cfg: SystemConfig, popularity: Popularity,
                   dens: DtDensities, op: OperatingPoint, p_o: float) -> float:
    """integral(B(s)/s^2, s=ln(1+Gamma)..inf) where B(s) is the probability a
    link exists but its SINR misses threshold exp(s)-1.

    B increases to p_o; the domain is cut where the remainder p_o - B(s)
    stops mattering and the flat tail is added in closed form.
    """
    sv = _Survival(cfg, dens, op)
    w = popularity.pmf
    r_c = cfg.collab_distance
    lo = op.log1p_gamma

    def bracket(s: np.ndarray) -> np.ndarray:
        x = _thresholds(s)

        def inner(r: np.ndarray) -> np.ndarray:
            pdf = link_distance_pdf(dens.helper_density, r)
            surv = sv.mean(w, pdf, x, r)
            left = pdf @ w
            return left[:, None] - surv

        return integrate_batch(inner, 0.0, r_c, _INNER)

    hi = max(4.0, 2.0 * lo)
    for _ in range(40):
        miss = p_o - float(bracket(np.array([hi]))[0])
        if miss / hi <= 1e-12 * max(p_o, 1e-12):
            break
        hi *= 2.0

    def f(s: np.ndarray) -> np.ndarray:
        return bracket(s) / s ** 2

    return float(integrate_batch(f, lo, hi, _OUTER)) + p_o / hi


def energy_complete_e1(cfg: SystemConfig, popularity: Popularity,
                       caching: CachingDistribution, op: OperatingPoint,
                       dens: DtDensities | None = None,
                       _parts: tuple | None = None) -> float:
    """Mean transmitter energy per completed transfer, in J.

    Equals the budget scaled by E[ln(1+Gamma)/ln(1+SINR) | SINR >= Gamma];
    approaches the full budget as Gamma grows and the complete links
    concentrate at the threshold.
    """
    dens = dens or dt_densities(cfg, popularity, caching)
    if _parts is not None:
        p_o, p_1, tail = _parts
    else:
        p_o = offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                     popularity, caching)
        p_1 = _p_offload(cfg, popularity, caching, op, dens)
        tail = _tail_integral(cfg, popularity, dens, op, p_o)
    if p_1 <= 0.0:
        return op.budget_joules
    frac = 1.0 - p_o / p_1 + op.log1p_gamma * tail / p_1
    return op.budget_joules * min(max(frac, 0.0), 1.0)


def energy_cost_e1(cfg: SystemConfig, popularity: Popularity,
                   caching: CachingDistribution, op: OperatingPoint,
                   dens: DtDensities | None = None,
                   _parts: tuple | None = None) -> float:
    """Mean transmitter energy per served request over battery energy QV_0.

    Partial transfers burn the whole allowance, so this is the budget-scaled
    mixture of :func:`energy_complete_e1` over completes and rho over the
    rest; bounded by rho by construction.
    """
    dens = dens or dt_densities(cfg, popularity, caching)
    if _parts is not None:
        p_o, _, tail = _parts
    else:
        p_o = offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                     popularity, caching)
        tail = _tail_integral(cfg, popularity, dens, op, p_o)
    if p_o <= 0.0:
        return 0.0
    return op.battery_fraction * op.log1p_gamma * tail / p_o


def _p_offload(cfg, popularity, caching, op, dens) -> float:
    if cfg.pathloss_exponent == 2.0:
        return offload_prob_p1_los(cfg, popularity, caching, op, dens)
    return offload_prob_p1(cfg, popularity, caching, op, dens)


def full_reuse_metrics(cfg: SystemConfig, popularity: Popularity,
                       caching: CachingDistribution, tx_power: float,
                       battery_fraction: float | None = None) -> AnalyticMetrics:
    """All full-reuse metrics at one operating point (alpha == 2 routes to
    the bounded-interference closed form for the offload probability)."""
    op = operating_point(cfg, tx_power, battery_fraction)
    dens = dt_densities(cfg, popularity, caching)
    p_o = offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                 popularity, caching)
    p_1 = _p_offload(cfg, popularity, caching, op, dens)
    tail = _tail_integral(cfg, popularity, dens, op, p_o)
    parts = (p_o, p_1, tail)
    return AnalyticMetrics(
        scheme="full-reuse",
        tx_power=tx_power,
        battery_fraction=op.battery_fraction,
        p_opportunity=p_o,
        p_offload=p_1,
        p_ratio=offload_ratio_p1a(cfg, popularity, caching, op, dens),
        energy_complete=energy_complete_e1(cfg, popularity, caching, op, dens,
                                           _parts=parts),
        energy_cost=energy_cost_e1(cfg, popularity, caching, op, dens,
                                   _parts=parts),
    )
