import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import icca.simulator as _sim  # noqa: E402
from icca import zoo  # noqa: E402
from icca.cost import CostModelConfig  # noqa: E402
from icca.hw import load_preset  # noqa: E402

import acceptance_log  # noqa: E402

_simulate_full = _sim.simulate_full


def _validated_simulate_full(plan, g, c, cm):
    # every simulation run by any test must produce a causal, conserving trace
    res = _simulate_full(plan, g, c, cm)
    v = _sim.validate_trace(res.trace)
    acceptance_log.SIM_CHECKS["runs"] += 1
    if v is not None:
        acceptance_log.SIM_CHECKS["violations"].append(str(v))
        raise AssertionError(f"trace violation: {v}")
    return res


# patched before any test module imports simulate_full by name
_sim.simulate_full = _validated_simulate_full


@pytest.fixture(scope="session")
def a2a():
    return load_preset("ipu-mk2-a2a")


@pytest.fixture(scope="session")
def cm():
    return CostModelConfig()


@pytest.fixture(scope="session")
def tiny():
    return zoo.tiny_block()


def pytest_terminal_summary(terminalreporter):
    res = acceptance_log.RESULTS
    if not res:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    sims = acceptance_log.SIM_CHECKS
    for n, title in acceptance_log.TITLES.items():
        if n not in res:
            tr.write_line(f"criterion {n:2d} FAIL  {title}: did not complete")
            continue
        ok, detail = res[n]
        if n == 5:
            ok = ok and not sims["violations"]
            detail += f"; {sims['runs']} simulations in this run validated, {len(sims['violations'])} violations"
        tr.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
