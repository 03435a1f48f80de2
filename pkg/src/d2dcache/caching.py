"""Content popularity and probabilistic caching placement.

Every device independently caches file ``i`` with probability ``p_c(i)``;
helpers for file ``i`` then form a thinned point process of density
``lambda * p_c(i)``.  The optimizer maximizes the chance that a request finds
its file cached within the collaboration distance, which trades the head of
the popularity law against coverage of the tail: below a density threshold
every file gets cache share, above it a hard cutoff appears and files past
the cutoff are never cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CachingError", "Popularity", "CachingDistribution", "zipf",
    "optimal_caching", "baseline_caching", "offloading_opportunity",
]


class CachingError(ValueError):
    """Raised when a caching problem is infeasible or numerically inconsistent."""


@dataclass(frozen=True)
class Popularity:
    """Request distribution over the file catalog (most popular first)."""

    pmf: np.ndarray        # p_r(i), descending
    zipf_exponent: float   # beta
    size: int              # N_f


@dataclass(frozen=True)
class CachingDistribution:
    """Per-file caching probabilities for single-slot device caches."""

    pmf: np.ndarray   # p_c(i), sums to 1
    cutoff: int       # number of files with positive cache share
    policy: str       # "optimal" | "uniform" | "popularity"


def zipf(catalog_size: int, exponent: float) -> Popularity:
    """Zipf popularity: p_r(i) proportional to i**-exponent, i = 1..N_f."""
    if catalog_size < 1:
        raise CachingError("catalog_size must be >= 1")
    if exponent < 0.0:
        raise CachingError("zipf exponent must be >= 0")
    ranks = np.arange(1, catalog_size + 1, dtype=float)
    weights = ranks ** -exponent
    return Popularity(pmf=weights / weights.sum(), zipf_exponent=float(exponent),
                      size=int(catalog_size))


def _cutoff_stat(i: np.ndarray) -> np.ndarray:
    # g(n) = n ln n - ln n!, strictly increasing; the cache cutoff is the
    # largest n with g(n) < lambda*pi*r_c^2 / beta.
    return i * np.log(i) - np.array([math.lgamma(n + 1.0) for n in i])


def optimal_caching(user_density: float, collab_distance: float,
                    popularity: Popularity) -> CachingDistribution:
    """Caching distribution maximizing the offloading opportunity.

    Water-filling against the Zipf weights: either every file is cached with
    positive probability (dense-helper regime) or only the ``i*`` most
    popular ones are.  ``i*`` is located by scanning a provably sufficient
    window around ``lambda*pi*r_c**2 / beta`` and checking the stationarity
    sign conditions on both sides.
    """
    n_f = popularity.size
    beta = popularity.zipf_exponent
    c = user_density * math.pi * collab_distance ** 2
    if c < 0.0 or not math.isfinite(c):
        raise CachingError(f"invalid helper density scale {c}")

    if beta == 0.0 or n_f == 1:
        # Uniform popularity makes every file interchangeable.
        return CachingDistribution(pmf=np.full(n_f, 1.0 / n_f), cutoff=n_f,
                                   policy="optimal")
    if c == 0.0:
        # No collaboration range: the limit concentrates on the top file.
        pmf = np.zeros(n_f)
        pmf[0] = 1.0
        return CachingDistribution(pmf=pmf, cutoff=1, policy="optimal")

    target = c / beta
    ranks = np.arange(1, n_f + 1, dtype=float)
    ln_ranks = np.log(ranks)

    if _cutoff_stat(np.array([float(n_f)]))[0] < target:
        # Every file keeps positive cache share.
        star = n_f
    else:
        lo = max(1, math.ceil(target) - 2)
        hi = min(n_f, math.floor(target + math.log(math.sqrt(2.0 * math.pi * n_f))) + 2)
        window = np.arange(lo, hi + 1, dtype=float)
        g = _cutoff_stat(window)
        # g(i) < target <= g(i+1) pins the unique cutoff.
        ok = (g < target) & (target <= _cutoff_stat(window + 1.0))
        hits = np.flatnonzero(ok)
        if len(hits) != 1:
            raise CachingError(
                f"cutoff scan failed on [{lo}, {hi}] (found {len(hits)} candidates); "
                "parameters are numerically inconsistent")
        star = int(window[hits[0]])

    pmf = np.zeros(n_f)
    head = slice(0, star)
    pmf[head] = (1.0 + (beta / c) * (math.lgamma(star + 1.0)
                                     - star * ln_ranks[head])) / star
    if pmf[head].min() < -1e-9:
        raise CachingError(f"negative cache probability {pmf[head].min():.3e} at cutoff {star}")
    np.clip(pmf, 0.0, None, out=pmf)

    drift = abs(pmf.sum() - 1.0)
    if drift > 1e-9:
        raise CachingError(f"cache pmf sums to 1{drift:+.3e}")
    if drift > 1e-12:
        pmf /= pmf.sum()
    return CachingDistribution(pmf=pmf, cutoff=star, policy="optimal")


def baseline_caching(policy: str, popularity: Popularity) -> CachingDistribution:
    """Reference placements: ``uniform`` over the catalog, or ``popularity``
    (cache share proportional to request probability)."""
    if policy == "uniform":
        pmf = np.full(popularity.size, 1.0 / popularity.size)
    elif policy == "popularity":
        pmf = popularity.pmf.copy()
    else:
        raise CachingError(f"unknown baseline policy {policy!r}")
    return CachingDistribution(pmf=pmf, cutoff=int(np.count_nonzero(pmf)),
                               policy=policy)


def offloading_opportunity(user_density: float, collab_distance: float,
                           popularity: Popularity,
                           caching: CachingDistribution) -> float:
    """Probability that a request finds its file cached within ``collab_distance``.

    Expectation over the request law of the void probability of each thinned
    helper process: ``sum_i p_r(i) * (1 - exp(-lambda*p_c(i)*pi*r_c**2))``.
    """
    if len(caching.pmf) != popularity.size:
        raise CachingError("catalog size mismatch between popularity and caching")
    c = user_density * math.pi * collab_distance ** 2
    return float(np.dot(popularity.pmf, -np.expm1(-c * caching.pmf)))
