"""Drop-based Monte Carlo simulator for D2D offloading with battery budgets.

Independent of the analytic stack: users are sampled as a Poisson point
process in a square cell, caches and requests are drawn from the configured
distributions, nearest-holder links are formed, and SINR, delivered bits and
transmitter energy are measured directly.

Boundary handling: the cell is a plain square (no wrap-around) and only
in-cell transmitters interfere.  By default, statistics are collected only
for requesters at least one collaboration distance away from the boundary,
where the nearest-holder geometry matches the stationary process; set
``edge_margin=0`` to count every user and fold the boundary deficit into
the estimates.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..config import SystemConfig, derived
from ..caching import CachingDistribution, Popularity
from . import _backend


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """One simulated operating condition.

    ``n_requests`` is the number of synchronized request rounds per drop;
    each user issues one request per round.  Each serve draws at most
    rho*Q*V0 from the helper's battery; a helper whose battery is exhausted
    stops serving, though its cached files stay discoverable, keeping the
    opportunity estimate purely geometric.

    ``conflict`` picks the matching rule: "shared" serves every requester
    from its nearest eligible holder (several receivers may share one
    transmitter, mirroring the analytic model); "exclusive" lets each holder
    serve at most one receiver, with contested requesters falling back to
    the next-nearest free holder.
    """

    popularity: Popularity
    cache: CachingDistribution
    scheme: str = "full-reuse"
    tx_power: float = 0.05
    battery_fraction: Optional[float] = None
    n_requests: int = 1
    cache_slots: int = 1
    conflict: str = "shared"
    include_self: bool = False
    edge_margin: Optional[float] = None
    truncate_interference: Optional[float] = None
    realistic_interference: bool = False

    def validated(self) -> "Scenario":
        if self.scheme not in ("full-reuse", "tdma"):
            raise SimulationError(f"unknown scheme {self.scheme!r}")
        if self.conflict not in ("shared", "exclusive"):
            raise SimulationError(f"unknown conflict mode {self.conflict!r}")
        if self.n_requests < 1:
            raise SimulationError("n_requests must be >= 1")
        if self.cache_slots < 1:
            raise SimulationError("cache_slots must be >= 1")
        if self.tx_power <= 0:
            raise SimulationError("tx_power must be positive")
        if len(self.popularity.pmf) != len(self.cache.pmf):
            raise SimulationError("popularity and cache catalog sizes differ")
        return self


@dataclass
class DropMetrics:
    """Counters from one simulated cell, restricted to the measurement
    window except where noted."""

    n_users: int = 0
    n_requests: int = 0
    n_found: int = 0
    n_linked: int = 0
    n_complete: int = 0
    n_dts: int = 0              # distinct in-window transmitters, round 1
    self_offloaded: int = 0
    delivered_bits: float = 0.0
    total_bits: float = 0.0
    energy_spent: float = 0.0         # J, over in-window links
    energy_complete_sum: float = 0.0  # J, over in-window complete links
    max_request_energy: float = 0.0   # J, over ALL links of the drop
    dt_energy: Optional[np.ndarray] = None  # per-user J spent, whole cell


@dataclass(frozen=True)
class NetworkRealization:
    """Snapshot of one drop (produced in detail mode; links from round 1)."""

    positions: np.ndarray      # (n, 2) m
    cached_files: np.ndarray   # (n, M) int
    requests: np.ndarray       # (n, n_rounds) int
    fading: np.ndarray         # (L,) unit-mean exponential, serving links
    links: np.ndarray          # structured: receiver, transmitter, file, distance


@dataclass(frozen=True)
class McEstimate:
    mean: float
    half_width_95: float
    n_drops: int


@dataclass(frozen=True)
class McResult:
    estimates: dict
    n_drops: int
    backend: str
    max_request_energy: float

    def __getitem__(self, key: str) -> McEstimate:
        return self.estimates[key]


_LINK_DTYPE = np.dtype([("receiver", np.int64), ("transmitter", np.int64),
                        ("file", np.int64), ("distance", np.float64)])


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_or_rng)))


def drop_rng(base_seed: int, drop_index: int) -> np.random.Generator:
    """Independent stream for one drop, a pure function of (seed, index)."""
    ss = np.random.SeedSequence((int(base_seed), int(drop_index)))
    return np.random.Generator(np.random.Philox(ss))


def sample_ppp(density: float, side: float, seed_or_rng) -> np.ndarray:
    """Poisson(density*side^2) users placed uniformly in the side x side cell."""
    if density < 0 or side <= 0:
        raise SimulationError("density must be >= 0 and side > 0")
    rng = _as_rng(seed_or_rng)
    n = rng.poisson(density * side * side)
    return rng.uniform(0.0, side, size=(n, 2))


def assign_caches(positions, cache: CachingDistribution, slots: int,
                  seed_or_rng) -> np.ndarray:
    """Draw each user's cache contents: ``slots`` distinct files per user.

    A single slot is an i.i.d. draw from the caching distribution.  Multiple
    slots are distinct draws with sequential renormalization, realized via
    Gumbel-perturbed log-probability ranking (equivalent in distribution).
    """
    rng = _as_rng(seed_or_rng)
    p = np.asarray(cache.pmf)
    n = len(positions)
    support = int(np.count_nonzero(p > 0))
    if slots > support:
        raise SimulationError(
            f"cache_slots={slots} exceeds the {support} files with positive "
            "caching probability")
    if slots == 1:
        return rng.choice(p.size, size=n, p=p).reshape(n, 1).astype(np.int64)
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    keys = logp[None, :] + rng.gumbel(size=(n, p.size))
    part = np.argpartition(keys, -slots, axis=1)[:, -slots:]
    return np.ascontiguousarray(np.sort(part, axis=1).astype(np.int64))


def _helper_buckets(cached: np.ndarray, n_files: int):
    n, m = cached.shape
    files = cached.ravel()
    users = np.repeat(np.arange(n, dtype=np.int64), m)
    order = np.argsort(files, kind="stable")
    helper_user = np.ascontiguousarray(users[order])
    helper_start = np.searchsorted(
        files[order], np.arange(n_files + 1)).astype(np.int64)
    return helper_user, helper_start


def establish_links(positions, cached, req_file, r_c, n_files,
                    eligible=None, exclusive=False):
    """Form one round of D2D links; returns (links, found_mask).

    ``links`` is a structured array (receiver, transmitter, file, distance);
    ``found_mask[u]`` says whether some other user within ``r_c`` holds u's
    requested file, regardless of battery state.
    """
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    cached = np.asarray(cached, dtype=np.int64)
    if cached.ndim == 1:
        cached = cached.reshape(-1, 1)
    req_file = np.ascontiguousarray(req_file, dtype=np.int64)
    n = positions.shape[0]
    if eligible is None:
        eligible = np.ones(n, dtype=np.uint8)
    helper_user, helper_start = _helper_buckets(cached, n_files)
    req_user = np.arange(n, dtype=np.int64)
    tx, found, d2 = _backend.match_links(
        positions, helper_user, helper_start, req_user, req_file,
        np.ascontiguousarray(eligible, dtype=np.uint8), float(r_c) ** 2,
        bool(exclusive))
    sel = tx >= 0
    links = np.empty(int(sel.sum()), dtype=_LINK_DTYPE)
    links["receiver"] = req_user[sel]
    links["transmitter"] = tx[sel]
    links["file"] = req_file[sel]
    links["distance"] = np.sqrt(d2[sel])
    return links, found.astype(bool)


def _spend_energy(e_full, tx_users, spent, rho_budget, battery):
    """Energy actually drawn per link, honoring per-serve and battery caps.

    Links are settled in order; a transmitter serving several links in one
    round sees its remaining battery shrink between them, so rounds with a
    repeated transmitter take the sequential path.
    """
    if np.unique(tx_users).shape[0] == tx_users.shape[0]:
        cap = np.maximum(battery - spent[tx_users], 0.0)
        np.minimum(cap, rho_budget, out=cap)
        spend = np.minimum(e_full, cap)
        spent[tx_users] += spend
        return spend
    spend = np.empty(e_full.shape[0])
    for k in range(e_full.shape[0]):
        u = tx_users[k]
        cap = min(rho_budget, battery - spent[u])
        s = min(e_full[k], cap) if cap > 0 else 0.0
        spend[k] = s
        spent[u] += s
    return spend


def _static_sinr(pos, links, rng, alpha, sigma0_sq, trunc2):
    """Fading, SINR and transmitter bookkeeping for one full-reuse round.

    One fading matrix covers every receiver/transmitter pair; the serving
    gain is its own-column entry, so both backends consume identical draws.
    A receiver that is itself transmitting never hears its own signal.
    """
    L = len(links)
    rx = links["receiver"]
    dts, own_col = np.unique(links["transmitter"], return_inverse=True)
    gains = rng.exponential(size=(L, len(dts)))
    h_own = gains[np.arange(L), own_col]
    idx = np.minimum(np.searchsorted(dts, rx), len(dts) - 1)
    rx_col = np.where(dts[idx] == rx, idx, -1).astype(np.int64)
    interf = _backend.interference_power(
        np.ascontiguousarray(pos[rx]), np.ascontiguousarray(pos[dts]),
        gains, np.ascontiguousarray(own_col, dtype=np.int64), rx_col,
        float(alpha), float(trunc2))
    sinr = h_own * links["distance"] ** (-alpha) / (interf + sigma0_sq)
    return h_own, sinr


def _realistic_round(pos, links, rng, alpha, sigma0_sq, trunc2, bandwidth,
                     file_bits, p_total, caps):
    """Event-driven variant: a transmitter falls silent once its last link
    finishes or runs out of budget, so interference decays over the round.

    Returns (spend, bits, complete, h_own).  Quadratic in the link count;
    meant for spot checks rather than bulk estimation.
    """
    L = len(links)
    rx = links["receiver"]
    dts, own_col = np.unique(links["transmitter"], return_inverse=True)
    T = len(dts)
    gains = rng.exponential(size=(L, T))
    h_own = gains[np.arange(L), own_col]
    diff = pos[rx][:, None, :] - pos[dts][None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    with np.errstate(divide="ignore"):
        path = dist2 ** (-alpha / 2.0)
    path[dist2 > trunc2] = 0.0
    path[dist2 == 0.0] = 0.0
    rows = np.arange(L)
    path[rows, own_col] = 0.0
    idx = np.minimum(np.searchsorted(dts, rx), T - 1)
    sel = dts[idx] == rx
    path[rows[sel], idx[sel]] = 0.0
    contrib = gains * path
    active_dt = np.ones(T, dtype=bool)
    live = np.ones(L, dtype=bool)
    signal = h_own * links["distance"] ** (-alpha)
    bits_left = np.full(L, float(file_bits))
    budget_left = caps.astype(float).copy()
    spend = np.zeros(L)
    bits = np.zeros(L)
    links_of_dt = np.bincount(own_col, minlength=T)
    while live.any():
        interf = contrib[:, active_dt].sum(axis=1)
        rate = bandwidth * np.log2(1.0 + signal / (interf + sigma0_sq))
        li = np.flatnonzero(live)
        r = np.maximum(rate[li], 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_fin = np.where(r > 0, bits_left[li] / r, np.inf)
        t_bud = budget_left[li] / p_total
        t_evt = np.minimum(t_fin, t_bud)
        k = int(np.argmin(t_evt))
        step = t_evt[k]
        if not np.isfinite(step):
            break
        adv = r * step
        bits_left[li] -= adv
        bits[li] += adv
        budget_left[li] -= p_total * step
        spend[li] += p_total * step
        done = li[k]
        live[done] = False
        links_of_dt[own_col[done]] -= 1
        if links_of_dt[own_col[done]] == 0:
            active_dt[own_col[done]] = False
    complete = bits >= file_bits * (1.0 - 1e-12)
    return spend, np.minimum(bits, float(file_bits)), complete, h_own


def simulate_drop(cfg: SystemConfig, scenario: Scenario, seed_or_rng,
                  detail: bool = False):
    """Simulate one cell; returns DropMetrics, plus a NetworkRealization
    snapshot when ``detail`` is set."""
    scenario = scenario.validated()
    if len(scenario.popularity.pmf) != cfg.catalog_size:
        raise SimulationError("catalog size of cfg and scenario differ")
    rng = _as_rng(seed_or_rng)
    rho = scenario.battery_fraction
    if rho is None:
        rho = cfg.battery_fraction
    dv = derived(cfg, scenario.tx_power, rho)
    battery = cfg.battery_joules
    rho_budget = dv.budget_joules
    n_files = cfg.catalog_size
    alpha = cfg.pathloss_exponent
    trunc2 = (float(scenario.truncate_interference) ** 2
              if scenario.truncate_interference else np.inf)
    p_req = np.asarray(scenario.popularity.pmf)

    pos = sample_ppp(cfg.user_density, cfg.cell_side, rng)
    n = len(pos)
    metrics = DropMetrics(n_users=n)
    margin = scenario.edge_margin
    if margin is None:
        margin = min(cfg.collab_distance, 0.45 * cfg.cell_side)
    if n == 0:
        metrics.dt_energy = np.zeros(0)
        if detail:
            empty = NetworkRealization(
                positions=pos, cached_files=np.zeros((0, 1), np.int64),
                requests=np.zeros((0, 0), np.int64), fading=np.zeros(0),
                links=np.empty(0, dtype=_LINK_DTYPE))
            return metrics, empty
        return metrics

    cached = assign_caches(pos, scenario.cache, scenario.cache_slots, rng)
    lo, hi = margin, cfg.cell_side - margin
    window = ((pos[:, 0] >= lo) & (pos[:, 0] <= hi)
              & (pos[:, 1] >= lo) & (pos[:, 1] <= hi))
    spent = np.zeros(n)
    helper_user, helper_start = _helper_buckets(cached, n_files)
    req_user = np.arange(n, dtype=np.int64)
    detail_snapshot = None
    all_requests = [] if detail else None

    for rnd in range(scenario.n_requests):
        req = rng.choice(n_files, size=n, p=p_req)
        if all_requests is not None:
            all_requests.append(req)
        self_hit = (cached == req[:, None]).any(axis=1)
        eligible = (spent < battery).astype(np.uint8)
        tx, found, d2 = _backend.match_links(
            pos, helper_user, helper_start, req_user, req,
            eligible, cfg.collab_distance ** 2,
            scenario.conflict == "exclusive")
        if scenario.include_self:
            tx = np.where(self_hit, -1, tx)
        link_sel = tx >= 0
        links = np.empty(int(link_sel.sum()), dtype=_LINK_DTYPE)
        links["receiver"] = req_user[link_sel]
        links["transmitter"] = tx[link_sel]
        links["file"] = req[link_sel]
        links["distance"] = np.sqrt(d2[link_sel])
        L = len(links)

        if scenario.scheme == "tdma":
            p_circuit = cfg.tx_circuit_power + max(L - 1, 0) * cfg.idle_power
        else:
            p_circuit = cfg.tx_circuit_power
        p_total = scenario.tx_power / cfg.pa_efficiency + p_circuit

        if L:
            if scenario.scheme == "full-reuse" and scenario.realistic_interference:
                caps = np.minimum(
                    rho_budget,
                    np.maximum(battery - spent[links["transmitter"]], 0.0))
                spend, bits, complete, h_own = _realistic_round(
                    pos, links, rng, alpha, dv.sigma0_sq, trunc2,
                    cfg.bandwidth, cfg.file_size, p_total, caps)
                np.add.at(spent, links["transmitter"], spend)
            else:
                if scenario.scheme == "tdma":
                    h_own = rng.exponential(size=L)
                    sinr = h_own * links["distance"] ** (-alpha) / dv.sigma0_sq
                else:
                    h_own, sinr = _static_sinr(
                        pos, links, rng, alpha, dv.sigma0_sq, trunc2)
                rate = cfg.bandwidth * np.log2(1.0 + sinr)
                with np.errstate(divide="ignore"):
                    e_full = np.where(
                        rate > 0, cfg.file_size * p_total / rate, np.inf)
                spend = _spend_energy(e_full, links["transmitter"],
                                      spent, rho_budget, battery)
                complete = (spend == e_full) & np.isfinite(e_full)
                bits = np.where(complete, float(cfg.file_size),
                                rate * spend / p_total)
            metrics.max_request_energy = max(metrics.max_request_energy,
                                             float(spend.max()))
        else:
            spend = bits = h_own = np.zeros(0)
            complete = np.zeros(0, dtype=bool)

        in_w = window[links["receiver"]]
        n_w = int(window.sum())
        metrics.n_requests += n_w
        metrics.total_bits += cfg.file_size * n_w
        if scenario.include_self:
            metrics.n_found += int(((found | self_hit) & window).sum())
            sw = int((self_hit & window).sum())
            metrics.self_offloaded += sw
            metrics.n_complete += sw
            metrics.delivered_bits += cfg.file_size * sw
        else:
            metrics.n_found += int((found & window).sum())
        metrics.n_linked += int(in_w.sum())
        if L:
            metrics.n_complete += int((complete & in_w).sum())
            metrics.delivered_bits += float(bits[in_w].sum())
            metrics.energy_spent += float(spend[in_w].sum())
            metrics.energy_complete_sum += float(spend[complete & in_w].sum())
        if rnd == 0:
            if L:
                tx_in_w = links["transmitter"][window[links["transmitter"]]]
                metrics.n_dts = int(np.unique(tx_in_w).size)
            if detail:
                detail_snapshot = NetworkRealization(
                    positions=pos, cached_files=cached,
                    requests=req.reshape(-1, 1), fading=np.asarray(h_own),
                    links=links.copy())

    metrics.dt_energy = spent
    if detail:
        if detail_snapshot is None:
            detail_snapshot = NetworkRealization(
                positions=pos, cached_files=cached,
                requests=np.zeros((n, 0), np.int64), fading=np.zeros(0),
                links=np.empty(0, dtype=_LINK_DTYPE))
        if all_requests:
            detail_snapshot = replace(detail_snapshot,
                                      requests=np.stack(all_requests, axis=1))
        return metrics, detail_snapshot
    return metrics


_METRIC_KEYS = ("p_o", "p_offload", "p_ratio", "energy_cost",
                "energy_complete_j", "active_density")


def _drop_vector(cfg: SystemConfig, dm: DropMetrics, margin: float) -> np.ndarray:
    """Per-drop metric values; NaN marks 'nothing to average'."""
    nan = float("nan")
    n_req = dm.n_requests
    win_area = max(cfg.cell_side - 2.0 * margin, 0.0) ** 2
    return np.array([
        dm.n_found / n_req if n_req else nan,
        dm.n_complete / n_req if n_req else nan,
        dm.delivered_bits / dm.total_bits if dm.total_bits else nan,
        (dm.energy_spent / dm.n_linked / cfg.battery_joules) if dm.n_linked else nan,
        (dm.energy_complete_sum / dm.n_complete) if dm.n_complete else nan,
        dm.n_dts / win_area if win_area > 0 else nan,
    ])


def _run_chunk(args):
    cfg, scenario, base_seed, indices, margin = args
    out = np.empty((len(indices), len(_METRIC_KEYS)))
    max_e = 0.0
    for row, k in enumerate(indices):
        dm = simulate_drop(cfg, scenario, drop_rng(base_seed, k))
        out[row] = _drop_vector(cfg, dm, margin)
        max_e = max(max_e, dm.max_request_energy)
    return out, max_e


def run_monte_carlo(cfg: SystemConfig, scenario: Scenario, n_drops: int,
                    base_seed: int, workers: Optional[int] = None) -> McResult:
    """Estimate offloading metrics over independent drops.

    Returns a map of metric name to McEstimate: p_o (request found in
    range), p_offload (request completely delivered), p_ratio (bits
    delivered / bits requested), energy_cost (mean energy per served
    request / battery energy), energy_complete_j (mean J per completed
    request) and active_density (distinct transmitters per m^2).

    Drop k's stream depends only on (base_seed, k), so results are
    independent of ``workers`` and of scheduling order.
    """
    if n_drops < 2:
        raise SimulationError("n_drops must be >= 2")
    scenario = scenario.validated()
    margin = scenario.edge_margin
    if margin is None:
        margin = min(cfg.collab_distance, 0.45 * cfg.cell_side)

    if workers and workers > 1:
        chunks = [(cfg, scenario, base_seed, idx, margin)
                  for idx in np.array_split(np.arange(n_drops), workers * 4)
                  if len(idx)]
        with multiprocessing.Pool(workers) as pool:
            parts = pool.map(_run_chunk, chunks)
        table = np.vstack([p[0] for p in parts])
        max_e = max(p[1] for p in parts)
    else:
        table, max_e = _run_chunk((cfg, scenario, base_seed,
                                   np.arange(n_drops), margin))

    estimates = {}
    for j, key in enumerate(_METRIC_KEYS):
        col = table[:, j]
        keep = col[~np.isnan(col)]
        k = keep.size
        if k == 0:
            estimates[key] = McEstimate(float("nan"), float("nan"), 0)
            continue
        mean = float(keep.mean())
        hw = float(1.96 * keep.std(ddof=1) / np.sqrt(k)) if k > 1 else float("inf")
        estimates[key] = McEstimate(mean, hw, k)
    return McResult(estimates=estimates, n_drops=n_drops,
                    backend=_backend.BACKEND, max_request_energy=max_e)
