"""Monte Carlo subsystem: PPP cell drops with a compiled or numpy kernel."""

from ._backend import BACKEND
from .simulator import (
    DropMetrics,
    McEstimate,
    McResult,
    NetworkRealization,
    Scenario,
    SimulationError,
    assign_caches,
    drop_rng,
    establish_links,
    run_monte_carlo,
    sample_ppp,
    simulate_drop,
)

__all__ = [
    "BACKEND",
    "DropMetrics",
    "McEstimate",
    "McResult",
    "NetworkRealization",
    "Scenario",
    "SimulationError",
    "assign_caches",
    "backend_name",
    "drop_rng",
    "establish_links",
    "run_monte_carlo",
    "sample_ppp",
    "simulate_drop",
]


def backend_name() -> str:
    """Which kernel implementation is active: "compiled" or "python"."""
    return BACKEND
