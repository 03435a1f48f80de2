"""Cache-enabled D2D traffic offloading: analysis and simulation.

The analytic layer predicts, for a Poisson field of users with per-helper
battery budgets, how much cellular traffic device-to-device links can
offload under two spectrum schedules (full frequency reuse and
one-at-a-time TDMA), and how to place files and pick transmit powers to
maximize it.  The ``mc`` subpackage estimates the same quantities from
independent network drops for validation.
"""

from .caching import (CachingDistribution, CachingError, Popularity,
                      baseline_caching, offloading_opportunity,
                      optimal_caching, zipf)
from .config import (ConfigError, DerivedQuantities, SystemConfig,
                     apply_overrides, derived, load_config, urban_defaults,
                     save_config, validate, with_updates)
from .fullreuse import (AnalyticMetrics, DtDensities, OperatingPoint,
                        dt_densities, energy_complete_e1, energy_cost_e1,
                        full_reuse_metrics, link_distance_pdf,
                        offload_prob_p1, offload_prob_p1_los,
                        offload_ratio_p1a, operating_point)
from .mc import (DropMetrics, McEstimate, McResult, NetworkRealization,
                 Scenario, SimulationError, assign_caches, backend_name,
                 establish_links, run_monte_carlo, sample_ppp, simulate_drop)
from .poweropt import (PowerOptError, PowerResult, optimize_power_full_reuse,
                       optimize_power_los_cubic, optimize_power_tdma)
from .sweeps import (CompareReport, PRESET_NAMES, SweepError, SweepSpec,
                     SweepTable, compare_report, figure_preset, make_sweep,
                     optimal_collab_distance, run_sweep)
from .tdma import (TdmaContext, energy_complete_e2, energy_cost_e2,
                   offload_prob_p2, offload_prob_p2_los, offload_ratio_p2a,
                   tdma_context, tdma_metrics)

__version__ = "0.1.0"

__all__ = [
    "AnalyticMetrics", "CachingDistribution", "CachingError",
    "CompareReport", "ConfigError", "DerivedQuantities", "DropMetrics",
    "DtDensities", "McEstimate", "McResult", "NetworkRealization",
    "OperatingPoint", "PRESET_NAMES", "Popularity", "PowerOptError",
    "PowerResult", "Scenario", "SimulationError", "SweepError", "SweepSpec",
    "SweepTable", "SystemConfig", "TdmaContext", "apply_overrides",
    "assign_caches", "backend_name", "baseline_caching", "compare_report",
    "derived", "dt_densities", "energy_complete_e1", "energy_complete_e2",
    "energy_cost_e1", "energy_cost_e2", "establish_links", "figure_preset",
    "full_reuse_metrics", "link_distance_pdf", "load_config", "make_sweep",
    "offload_prob_p1", "offload_prob_p1_los", "offload_prob_p2",
    "offload_prob_p2_los", "offload_ratio_p1a", "offload_ratio_p2a",
    "offloading_opportunity", "operating_point", "optimal_caching",
    "optimal_collab_distance", "optimize_power_full_reuse",
    "optimize_power_los_cubic", "optimize_power_tdma", "urban_defaults",
    "run_monte_carlo", "run_sweep", "sample_ppp", "save_config",
    "simulate_drop", "tdma_context", "tdma_metrics", "validate",
    "with_updates", "zipf",
]
