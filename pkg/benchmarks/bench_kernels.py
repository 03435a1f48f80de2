"""Timing comparison of the compiled and numpy simulation kernels.

Builds one representative network drop, then times ``match_links`` and
``interference_power`` from both backends on identical inputs and checks
they agree bit for bit.  Run from the repository root:

    python3 benchmarks/bench_kernels.py --side 500 --repeat 20
"""

import argparse
import time

import numpy as np

from d2dcache.caching import optimal_caching, zipf
from d2dcache.config import urban_defaults, with_updates
from d2dcache.mc import kernels_py, simulator

try:
    from d2dcache.mc import _kernels as kernels_c
except ImportError:
    kernels_c = None


def build_inputs(side: float, seed: int):
    cfg = with_updates(urban_defaults(), cell_side=side)
    pop = zipf(cfg.catalog_size, cfg.zipf_exponent)
    cache = optimal_caching(cfg.user_density, cfg.collab_distance, pop)
    rng = np.random.default_rng(seed)

    pos = simulator.sample_ppp(cfg.user_density, side, rng)
    n = pos.shape[0]
    cached = simulator.assign_caches(pos, cache, 1, rng)
    helper_user, helper_start = simulator._helper_buckets(
        cached, cfg.catalog_size)
    req_user = np.arange(n, dtype=np.int64)
    req_file = rng.choice(cfg.catalog_size, size=n,
                          p=np.asarray(pop.pmf)).astype(np.int64)
    eligible = np.ones(n, dtype=np.uint8)

    match_args = (pos, helper_user, helper_start, req_user, req_file,
                  eligible, cfg.collab_distance ** 2)

    # interference inputs sized like a busy full-reuse round
    n_links = max(n // 3, 1)
    rx = pos[rng.choice(n, n_links, replace=False)]
    dt = pos[rng.choice(n, n_links, replace=False)]
    gains = rng.exponential(size=(n_links, n_links))
    own = np.arange(n_links, dtype=np.int64)
    rxc = np.full(n_links, -1, dtype=np.int64)
    intf_args = (rx, dt, gains, own, rxc, cfg.pathloss_exponent, np.inf)
    return match_args, intf_args


def time_call(fn, args, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=float, default=500.0,
                    help="cell side in m (users scale with the area)")
    ap.add_argument("--seed", type=int, default=20260814)
    ap.add_argument("--repeat", type=int, default=20,
                    help="timing repetitions; the best run is reported")
    args = ap.parse_args()

    match_args, intf_args = build_inputs(args.side, args.seed)
    n_req = match_args[3].shape[0]
    print(f"{n_req} users, {intf_args[0].shape[0]} concurrent links")

    if kernels_c is None:
        print("compiled extension not built; timing the numpy backend only")

    for shared in (True, False):
        margs = match_args + (not shared,)
        label = "exclusive" if not shared else "shared   "
        t_py = time_call(kernels_py.match_links, margs, args.repeat)
        line = f"match_links {label}  numpy {1e3 * t_py:8.2f} ms"
        if kernels_c is not None:
            t_c = time_call(kernels_c.match_links, margs, args.repeat)
            got_c = kernels_c.match_links(*margs)
            got_py = kernels_py.match_links(*margs)
            same = all(np.array_equal(a, b) for a, b in zip(got_c, got_py))
            line += (f"   compiled {1e3 * t_c:8.2f} ms   "
                     f"speedup {t_py / t_c:5.1f}x   agree {same}")
        print(line)

    t_py = time_call(kernels_py.interference_power, intf_args, args.repeat)
    line = f"interference_power    numpy {1e3 * t_py:8.2f} ms"
    if kernels_c is not None:
        t_c = time_call(kernels_c.interference_power, intf_args, args.repeat)
        close = np.allclose(kernels_c.interference_power(*intf_args),
                            kernels_py.interference_power(*intf_args),
                            rtol=1e-12, atol=0.0)
        line += (f"   compiled {1e3 * t_c:8.2f} ms   "
                 f"speedup {t_py / t_c:5.1f}x   agree {close}")
    print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
