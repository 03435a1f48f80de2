"""Shared fixtures and the acceptance-criteria summary hook."""

import pytest

from d2dcache import optimal_caching, urban_defaults, zipf

_CRITERION_LINES: list[tuple[int, str]] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Collect one pass/fail line per acceptance criterion; the lines are
    printed after the run so they survive pytest's output capture."""
    word = "PASS" if passed else "FAIL"
    _CRITERION_LINES.append((number, f"[criterion {number:2d}] {word}  {detail}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg():
    return urban_defaults()


@pytest.fixture(scope="session")
def pop(cfg):
    return zipf(cfg.catalog_size, cfg.zipf_exponent)


@pytest.fixture(scope="session")
def cache(cfg, pop):
    return optimal_caching(cfg.user_density, cfg.collab_distance, pop)
