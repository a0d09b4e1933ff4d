import functools

import pytest

from missile_afl import AeroModel, VehicleConfig, resolve_scenario, run_scenario
from missile_afl.vehicle import AeroPolynomial, AeroTerm


def toy_aero(cz=-20.0, czd=-2.0, cm=-30.0, cmq=0.0, cmd=-12.0) -> AeroModel:
    """Every coefficient linear in alpha (or constant); used for hand-derived checks."""

    def poly(*terms):
        return AeroPolynomial(terms=[AeroTerm(basis=b, c0=c) for b, c in terms])

    return AeroModel(
        CZ0=poly(("a", cz)),
        CZd=poly(("1", czd)),
        CM0=poly(("a", cm)),
        CMq=poly(("1", cmq)),
        CMd=poly(("1", cmd)),
    )


@pytest.fixture
def vehicle():
    return VehicleConfig()


@pytest.fixture
def toy_vehicle():
    return VehicleConfig(aero=toy_aero())


@functools.lru_cache(maxsize=None)
def cached_run(name: str, overrides: tuple = ()):
    cfg = resolve_scenario(name)
    if overrides:
        cfg = cfg.replace(**dict(overrides))
    return cfg, run_scenario(cfg)


@pytest.fixture
def scenario_run():
    """``scenario_run(name, **{"a.b": v})`` -> (config, trace), memoised per session."""

    def _run(name, **overrides):
        return cached_run(name, tuple(sorted(overrides.items())))

    return _run


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test then asserts the same condition."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def _record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
