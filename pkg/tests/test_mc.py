"""Simulator behavior: determinism, kernels, statistics, battery accounting."""

import numpy as np
import pytest

from d2dcache import fullreuse as fr
from d2dcache.config import urban_defaults, with_updates
from d2dcache.caching import optimal_caching, zipf
from d2dcache.mc import (Scenario, SimulationError, assign_caches,
                         backend_name, drop_rng, establish_links,
                         run_monte_carlo, sample_ppp, simulate_drop)
from d2dcache.mc import kernels_py
from d2dcache.mc import simulator as sim


@pytest.fixture(scope="module")
def small_cfg():
    # 300 m cell keeps full-reuse drops cheap while leaving an interior window
    return with_updates(urban_defaults(), cell_side=300.0)


@pytest.fixture(scope="module")
def scenario(pop, cache):
    return Scenario(popularity=pop, cache=cache)


def test_runs_are_deterministic(small_cfg, scenario):
    a = run_monte_carlo(small_cfg, scenario, 10, 424242)
    b = run_monte_carlo(small_cfg, scenario, 10, 424242)
    assert sorted(a.estimates) == sorted(b.estimates)
    for key, est in a.estimates.items():
        assert est.mean == b.estimates[key].mean
        assert est.half_width_95 == b.estimates[key].half_width_95
        assert est.n_drops == 10
    assert a.max_request_energy == b.max_request_energy


def test_worker_count_does_not_change_results(small_cfg, scenario):
    a = run_monte_carlo(small_cfg, scenario, 12, 99)
    b = run_monte_carlo(small_cfg, scenario, 12, 99, workers=2)
    for key, est in a.estimates.items():
        assert est.mean == b.estimates[key].mean
        assert est.half_width_95 == b.estimates[key].half_width_95
    assert a.max_request_energy == b.max_request_energy


def test_drop_rng_streams():
    first = drop_rng(7, 3).integers(0, 1 << 30, 8)
    again = drop_rng(7, 3).integers(0, 1 << 30, 8)
    other = drop_rng(7, 4).integers(0, 1 << 30, 8)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)


def test_sample_ppp_statistics():
    side = 300.0
    density = 0.01
    counts = [sample_ppp(density, side, seed).shape[0] for seed in range(300)]
    mean = np.mean(counts)
    expect = density * side * side
    # Poisson counts: 4 sigma of the sample mean
    assert abs(mean - expect) < 4.0 * np.sqrt(expect / len(counts))
    pos = sample_ppp(density, side, 11)
    assert pos.shape[1] == 2
    assert pos.min() >= 0.0 and pos.max() <= side
    assert sample_ppp(1e-12, side, 11).shape == (0, 2)


def test_assign_caches_frequencies(cache):
    pos = np.zeros((200000, 2))
    cached = assign_caches(pos, cache, 1, 12345)
    assert cached.shape == (200000, 1)
    freq = np.bincount(cached[:, 0], minlength=cache.pmf.size) / 200000.0
    tol = 4.0 * np.sqrt(np.maximum(cache.pmf, 1e-12) / 200000.0) + 1e-9
    assert np.all(np.abs(freq - cache.pmf) < tol)
    # nothing outside the cached prefix may ever be assigned
    assert cached.max() < cache.cutoff


def test_assign_caches_distinct_slots(cache):
    pos = np.zeros((5000, 2))
    cached = assign_caches(pos, cache, 2, 77)
    assert cached.shape == (5000, 2)
    assert (cached[:, 0] != cached[:, 1]).all()
    assert cached.max() < cache.cutoff


def test_establish_links_found_ignores_battery(small_cfg, pop, cache):
    pos = sample_ppp(0.01, 300.0, 3)
    cached = assign_caches(pos, cache, 1, 3)
    req = drop_rng(5, 0).choice(pop.pmf.size, size=pos.shape[0], p=pop.pmf)
    links, found = establish_links(pos, cached, req, 100.0, pop.pmf.size)
    dead = np.zeros(pos.shape[0], dtype=np.uint8)
    links2, found2 = establish_links(pos, cached, req, 100.0, pop.pmf.size,
                                     eligible=dead)
    assert np.array_equal(found, found2)
    assert links2.size == 0
    assert links.size > 0
    # every link stays in range and pairs distinct users
    assert (links["distance"] <= 100.0).all()
    assert (links["receiver"] != links["transmitter"]).all()


def test_exclusive_matching_keeps_transmitters_unique(pop, cache):
    pos = sample_ppp(0.02, 300.0, 9)
    cached = assign_caches(pos, cache, 1, 9)
    req = drop_rng(9, 0).choice(pop.pmf.size, size=pos.shape[0], p=pop.pmf)
    shared, found_s = establish_links(pos, cached, req, 100.0, pop.pmf.size)
    excl, found_e = establish_links(pos, cached, req, 100.0, pop.pmf.size,
                                    exclusive=True)
    assert np.array_equal(found_s, found_e)
    assert excl.size <= shared.size
    tx = excl["transmitter"]
    assert np.unique(tx).size == tx.size


def test_kernel_backends_agree(pop, cache):
    if backend_name() != "compiled":
        pytest.skip("compiled backend unavailable")
    from d2dcache.mc import _kernels as kc

    pos = sample_ppp(0.02, 300.0, 17)
    cached = assign_caches(pos, cache, 1, 17)
    n = pos.shape[0]
    req = drop_rng(17, 0).choice(pop.pmf.size, size=n, p=pop.pmf)
    helper_user, helper_start = sim._helper_buckets(cached, pop.pmf.size)
    rng = drop_rng(17, 1)
    eligible = (rng.random(n) > 0.2).astype(np.uint8)
    args = (pos, helper_user, helper_start, np.arange(n, dtype=np.int64),
            req.astype(np.int64), eligible, 100.0 ** 2)
    for exclusive in (False, True):
        tx_c, found_c, d2_c = kc.match_links(*args, exclusive)
        tx_p, found_p, d2_p = kernels_py.match_links(*args, exclusive)
        assert np.array_equal(np.asarray(tx_c), np.asarray(tx_p))
        assert np.array_equal(np.asarray(found_c), np.asarray(found_p))
        assert np.allclose(np.asarray(d2_c), np.asarray(d2_p), rtol=1e-13)

    rx_pos = np.ascontiguousarray(pos[:40])
    dt_pos = np.ascontiguousarray(pos[100:160])
    gains = rng.exponential(size=(40, 60))
    own = rng.integers(0, 60, size=40)
    rxc = rng.integers(0, 60, size=40)
    for trunc2 in (np.inf, 50.0 ** 2):
        got_c = np.asarray(kc.interference_power(rx_pos, dt_pos, gains, own,
                                                 rxc, 3.68, trunc2))
        got_p = np.asarray(kernels_py.interference_power(
            rx_pos, dt_pos, gains, own, rxc, 3.68, trunc2))
        assert np.allclose(got_c, got_p, rtol=1e-12)


def test_drop_metrics_relations(small_cfg, pop, cache):
    for scheme in ("full-reuse", "tdma"):
        sc = Scenario(popularity=pop, cache=cache, scheme=scheme,
                      n_requests=3)
        m = simulate_drop(small_cfg, sc, 42)
        assert m.n_requests == 3 * (m.n_requests // 3)
        assert m.n_found >= m.n_linked >= m.n_complete >= 0
        assert m.total_bits == m.n_requests * small_cfg.file_size
        assert m.n_complete * small_cfg.file_size <= m.delivered_bits
        assert m.delivered_bits <= m.total_bits
        assert m.energy_complete_sum <= m.energy_spent
        budget = (small_cfg.battery_fraction * small_cfg.battery_capacity
                  * small_cfg.operating_voltage)
        assert m.max_request_energy <= budget + 1e-9
        assert m.dt_energy.min() >= 0.0


def test_detail_returns_realization(small_cfg, scenario):
    metrics, net = simulate_drop(small_cfg, scenario, 8, detail=True)
    assert net.positions.shape[0] == metrics.n_users
    assert net.cached_files.shape[0] == metrics.n_users
    assert net.requests.shape[0] == metrics.n_users
    assert net.links["receiver"].size == 0 or (
        net.links["distance"] <= small_cfg.collab_distance).all()


def test_active_density_tracks_analytic(small_cfg, pop, cache, scenario):
    res = run_monte_carlo(small_cfg, scenario, 200, 11)
    dens = fr.dt_densities(small_cfg, pop, cache)
    est = res.estimates["active_density"]
    assert abs(est.mean - dens.total_active) <= 3.0 * est.half_width_95


def test_interference_truncation_helps(small_cfg, pop, cache, scenario):
    res_full = run_monte_carlo(small_cfg, scenario, 60, 21)
    trunc = Scenario(popularity=pop, cache=cache, truncate_interference=60.0)
    res_trunc = run_monte_carlo(small_cfg, trunc, 60, 21)
    assert (res_trunc.estimates["p_offload"].mean
            >= res_full.estimates["p_offload"].mean)


def test_realistic_interference_consistent(pop, cache, scenario):
    cfg = with_updates(urban_defaults(), cell_side=150.0)
    real = Scenario(popularity=pop, cache=cache, realistic_interference=True)
    res_s = run_monte_carlo(cfg, scenario, 100, 31)
    res_r = run_monte_carlo(cfg, real, 100, 31)
    a = res_s.estimates["p_offload"]
    b = res_r.estimates["p_offload"]
    hw = max(a.half_width_95, b.half_width_95)
    # resampling the interferer field adds variance but no large bias
    assert b.mean >= a.mean - 2.0 * hw
    assert abs(b.mean - a.mean) <= 3.0 * hw


def test_edge_margin_zero_biases_low(small_cfg, pop, cache, scenario):
    bare = Scenario(popularity=pop, cache=cache, edge_margin=0.0)
    res_bare = run_monte_carlo(small_cfg, bare, 100, 41)
    res_win = run_monte_carlo(small_cfg, scenario, 100, 41)
    a = res_bare.estimates["p_o"]
    b = res_win.estimates["p_o"]
    # without the interior window, border users see a clipped disc
    assert a.mean + 3.0 * a.half_width_95 < b.mean


def test_self_offloading_only_helps(small_cfg, pop, cache, scenario):
    with_self = Scenario(popularity=pop, cache=cache, include_self=True)
    res_on = run_monte_carlo(small_cfg, with_self, 60, 51)
    res_off = run_monte_carlo(small_cfg, scenario, 60, 51)
    assert (res_on.estimates["p_ratio"].mean
            >= res_off.estimates["p_ratio"].mean)
    assert res_on.estimates["p_o"].mean >= res_off.estimates["p_o"].mean


def test_half_width_shrinks_with_drops(small_cfg, scenario):
    h40 = run_monte_carlo(small_cfg, scenario, 40, 61)
    h160 = run_monte_carlo(small_cfg, scenario, 160, 61)
    ratio = (h160.estimates["p_offload"].half_width_95
             / h40.estimates["p_offload"].half_width_95)
    # 4x the drops should halve the interval, give or take noise
    assert 0.33 <= ratio <= 0.75


def test_battery_depletion_across_rounds(small_cfg, pop, cache):
    # 18 mAh at 4 V is one full budget: every helper dies after one serve
    cfgb = with_updates(small_cfg, battery_capacity=18.0)
    one = Scenario(popularity=pop, cache=cache, scheme="tdma",
                   battery_fraction=1.0, n_requests=1)
    ten = Scenario(popularity=pop, cache=cache, scheme="tdma",
                   battery_fraction=1.0, n_requests=10)
    res_one = run_monte_carlo(cfgb, one, 60, 71)
    res_ten = run_monte_carlo(cfgb, ten, 60, 71)
    assert (res_ten.estimates["p_ratio"].mean
            < res_one.estimates["p_ratio"].mean)


def test_exclusive_conflict_serves_fewer(small_cfg, pop, cache, scenario):
    excl = Scenario(popularity=pop, cache=cache, conflict="exclusive")
    res_e = run_monte_carlo(small_cfg, excl, 60, 81)
    res_s = run_monte_carlo(small_cfg, scenario, 60, 81)
    assert (res_e.estimates["p_offload"].mean
            <= res_s.estimates["p_offload"].mean)


def test_empty_cell_reports_nan(small_cfg, scenario):
    res = run_monte_carlo(with_updates(small_cfg, user_density=1e-12),
                          scenario, 3, 7)
    for key in ("p_o", "p_offload", "p_ratio", "energy_cost",
                "energy_complete_j"):
        assert np.isnan(res.estimates[key].mean)
    assert res.estimates["active_density"].mean == 0.0


def test_scenario_validation(pop, cache):
    good = Scenario(popularity=pop, cache=cache)
    assert good.validated() is good
    bad = [
        Scenario(popularity=pop, cache=cache, scheme="duplex"),
        Scenario(popularity=pop, cache=cache, conflict="queue"),
        Scenario(popularity=pop, cache=cache, n_requests=0),
        Scenario(popularity=pop, cache=cache, cache_slots=0),
        Scenario(popularity=pop, cache=cache, tx_power=0.0),
        Scenario(popularity=zipf(7, 1.0), cache=cache),
    ]
    for sc in bad:
        with pytest.raises(SimulationError):
            sc.validated()


def test_run_monte_carlo_needs_two_drops(small_cfg, scenario):
    with pytest.raises(SimulationError):
        run_monte_carlo(small_cfg, scenario, 1, 5)
