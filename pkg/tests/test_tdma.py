"""Scheduled-access analytics against quadrature oracles and hand math."""

import math

import numpy as np
import pytest

from d2dcache import fullreuse as fr
from d2dcache import tdma as td
from d2dcache.config import urban_defaults, with_updates
from d2dcache.caching import optimal_caching, zipf

PT_GRID = (0.001, 0.01, 0.05, 0.1, 0.2)


@pytest.fixture(scope="module")
def dens(cfg, pop, cache):
    return fr.dt_densities(cfg, pop, cache)


def _helper_mixture(pop, cache, dens, r):
    # popularity-weighted nearest-helper distance density
    mix = np.zeros_like(r)
    for i in range(cache.cutoff):
        li = dens.helper_density[i]
        mix += pop.pmf[i] * 2.0 * math.pi * li * r * np.exp(
            -li * math.pi * r * r)
    return mix


def test_context_hand_math(cfg, pop, cache):
    ctx = td.tdma_context(cfg, pop, cache, 0.05)
    p_o = fr.offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                    pop, cache)
    n_active = p_o * cfg.user_density * cfg.cell_side ** 2
    assert ctx.avg_receivers == pytest.approx(n_active, rel=1e-13)
    assert ctx.avg_receivers == pytest.approx(1783.6924547648132, rel=1e-10)
    total = cfg.tx_circuit_power + (n_active - 1.0) * cfg.idle_power
    assert ctx.total_circuit == pytest.approx(total, rel=1e-13)
    assert ctx.total_circuit == pytest.approx(44.683211369120336, rel=1e-10)
    # same threshold law as the shared-band scheme, with the aggregate
    # circuit draw of every listener charged to the serving slot
    eta = cfg.pa_efficiency
    a = cfg.file_size * math.log(2.0) / (
        cfg.bandwidth * ctx.op.budget_joules * eta)
    assert ctx.op.log1p_gamma == pytest.approx(
        a * (0.05 + eta * ctx.total_circuit), rel=1e-13)
    assert ctx.op.gamma == pytest.approx(math.expm1(ctx.op.log1p_gamma),
                                         rel=1e-13)
    ref = fr.dt_densities(cfg, pop, cache)
    assert np.array_equal(ctx.densities.helper_density, ref.helper_density)
    # orthogonal slots: the stored interference field is silenced
    assert ctx.densities.total_active == 0.0
    assert not ctx.densities.active_density.any()


def test_context_battery_override(cfg, pop, cache):
    ctx = td.tdma_context(cfg, pop, cache, 0.05, battery_fraction=0.5)
    assert ctx.op.battery_fraction == 0.5
    assert ctx.op.budget_joules == pytest.approx(
        0.5 * cfg.battery_capacity * cfg.operating_voltage, rel=1e-13)


@pytest.mark.parametrize("pt", [0.001, 0.05])
def test_offload_prob_matches_quadrature(cfg, pop, cache, dens, pt):
    """No co-channel interference, so success is the fading tail alone."""
    ctx = td.tdma_context(cfg, pop, cache, pt)
    op = ctx.op
    r = np.linspace(0.0, cfg.collab_distance, 200001)
    mix = _helper_mixture(pop, cache, dens, r)
    surv = np.exp(-op.gamma * op.sigma0_sq * r ** cfg.pathloss_exponent)
    hand = np.trapezoid(surv * mix, r)
    assert td.offload_prob_p2(cfg, pop, cache, ctx) == pytest.approx(
        hand, abs=1e-7)


def test_los_closed_form(cfg):
    cfg2 = with_updates(cfg, pathloss_exponent=2.0)
    pop = zipf(cfg2.catalog_size, cfg2.zipf_exponent)
    cache = optimal_caching(cfg2.user_density, cfg2.collab_distance, pop)
    dens = fr.dt_densities(cfg2, pop, cache)
    ctx = td.tdma_context(cfg2, pop, cache, 0.05)
    los = td.offload_prob_p2_los(cfg2, pop, cache, ctx)
    assert los == pytest.approx(td.offload_prob_p2(cfg2, pop, cache, ctx),
                                rel=1e-12)
    r = np.linspace(0.0, cfg2.collab_distance, 200001)
    mix = _helper_mixture(pop, cache, dens, r)
    hand = np.trapezoid(np.exp(-ctx.op.gamma * ctx.op.sigma0_sq * r * r)
                        * mix, r)
    assert los == pytest.approx(hand, abs=1e-8)


def _energy_complete_by_quadrature(cfg, pop, cache, dens, ctx, nr, ny):
    # E[tau | complete]: substitute y = ln(1 + snr) so the completion
    # threshold is the constant y0 = ln(1 + gamma), then integrate the
    # exponential tail by parts. Chunked over r to bound memory.
    op = ctx.op
    alpha = cfg.pathloss_exponent
    r = np.linspace(1e-9, cfg.collab_distance, nr)
    mix = _helper_mixture(pop, cache, dens, r)
    h0 = op.gamma * op.sigma0_sq * r ** alpha
    p2 = np.trapezoid(np.exp(-h0) * mix, r)
    y0 = op.log1p_gamma
    y = np.linspace(y0, y0 + 45.0, ny)
    inv_y2 = 1.0 / (y * y)
    s_inv = op.sigma0_sq * r ** alpha
    J = np.empty_like(r)
    step = 1000
    for k in range(0, nr, step):
        expo = -np.expm1(y)[None, :] * s_inv[k:k + step, None]
        J[k:k + step] = np.trapezoid(
            np.exp(np.maximum(expo, -745.0)) * inv_y2[None, :], y, axis=1)
    cprime = cfg.file_size * math.log(2.0) / cfg.bandwidth
    inner = cprime * (np.exp(-h0) / y0 - J)
    draw = ctx.op.tx_power / cfg.pa_efficiency + ctx.total_circuit
    return draw * np.trapezoid(inner * mix, r) / p2


def test_energy_complete_matches_quadrature(cfg, pop, cache, dens):
    ctx = td.tdma_context(cfg, pop, cache, 0.05)
    coarse = _energy_complete_by_quadrature(cfg, pop, cache, dens, ctx,
                                            4001, 4001)
    fine = _energy_complete_by_quadrature(cfg, pop, cache, dens, ctx,
                                          8001, 8001)
    extrapolated = fine + (fine - coarse) / 3.0
    lib = td.energy_complete_e2(cfg, pop, cache, ctx)
    assert lib == pytest.approx(extrapolated, rel=1e-7)


def test_energy_cost_blend_identity(cfg, pop, cache):
    """Per-request cost mixes the completed spend with the burnt budget."""
    p_o = fr.offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                    pop, cache)
    qv = cfg.battery_capacity * cfg.operating_voltage
    for pt in PT_GRID:
        ctx = td.tdma_context(cfg, pop, cache, pt)
        p2 = td.offload_prob_p2(cfg, pop, cache, ctx)
        e_full = td.energy_complete_e2(cfg, pop, cache, ctx)
        e_cost = td.energy_cost_e2(cfg, pop, cache, ctx)
        blend = (e_full * (p2 / p_o)
                 + ctx.op.budget_joules * (1.0 - p2 / p_o)) / qv
        assert e_cost == pytest.approx(blend, rel=1e-12)
        op = fr.operating_point(cfg, pt)
        p1 = fr.offload_prob_p1(cfg, pop, cache, op)
        blend1 = (fr.energy_complete_e1(cfg, pop, cache, op) * (p1 / p_o)
                  + op.budget_joules * (1.0 - p1 / p_o)) / qv
        assert fr.energy_cost_e1(cfg, pop, cache, op) == pytest.approx(
            blend1, rel=1e-12)


def test_anchors(cfg, pop, cache):
    anchors = {
        0.001: (0.2337244505535618, 0.38400292894119004,
                139.39969085990637, 0.008485925927525768),
        0.05: (0.6416490497144504, 0.6839041862938973,
               100.36072697566104, 0.004488872197345815),
        0.2: (0.6928222099563914, 0.7054058265632498,
              79.24796216876528, 0.0032583902830635512),
    }
    for pt, (p2, p2a, e_full, e_cost) in anchors.items():
        ctx = td.tdma_context(cfg, pop, cache, pt)
        assert td.offload_prob_p2(cfg, pop, cache, ctx) == pytest.approx(
            p2, rel=1e-9)
        assert td.offload_ratio_p2a(cfg, pop, cache, ctx) == pytest.approx(
            p2a, rel=1e-9)
        assert td.energy_complete_e2(cfg, pop, cache, ctx) == pytest.approx(
            e_full, rel=1e-9)
        assert td.energy_cost_e2(cfg, pop, cache, ctx) == pytest.approx(
            e_cost, rel=1e-9)


def test_orderings_along_power_grid(cfg, pop, cache):
    p_o = fr.offloading_opportunity(cfg.user_density, cfg.collab_distance,
                                    pop, cache)
    last_p2 = None
    last_cost = None
    for pt in PT_GRID:
        ctx = td.tdma_context(cfg, pop, cache, pt)
        p2 = td.offload_prob_p2(cfg, pop, cache, ctx)
        p2a = td.offload_ratio_p2a(cfg, pop, cache, ctx)
        e_cost = td.energy_cost_e2(cfg, pop, cache, ctx)
        assert 0.0 < p2 <= p2a + 1e-12 <= p_o + 1e-12
        assert 0.0 < e_cost <= cfg.battery_fraction
        # noise-limited links: extra power always helps, and faster
        # serves leave more battery behind
        if last_p2 is not None:
            assert p2 > last_p2
            assert e_cost < last_cost
        last_p2, last_cost = p2, e_cost


def test_metrics_bundle_consistent(cfg, pop, cache):
    ctx = td.tdma_context(cfg, pop, cache, 0.05)
    m = td.tdma_metrics(cfg, pop, cache, 0.05)
    assert m.scheme == "tdma"
    assert m.tx_power == 0.05
    assert m.p_opportunity == pytest.approx(fr.offloading_opportunity(
        cfg.user_density, cfg.collab_distance, pop, cache), rel=1e-14)
    assert m.p_offload == pytest.approx(
        td.offload_prob_p2(cfg, pop, cache, ctx), rel=1e-14)
    assert m.p_ratio == pytest.approx(
        td.offload_ratio_p2a(cfg, pop, cache, ctx), rel=1e-14)
    assert m.energy_complete == pytest.approx(
        td.energy_complete_e2(cfg, pop, cache, ctx), rel=1e-14)
    assert m.energy_cost == pytest.approx(
        td.energy_cost_e2(cfg, pop, cache, ctx), rel=1e-14)
