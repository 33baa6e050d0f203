import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icca import zoo
from icca.cost import CostModelConfig, SramContention
from icca.curves import build_curves
from icca.hw import ChipConfig, HbmSpec, Topology, TopologyKind, load_preset
from icca.reorder import search_best_order
from icca.scheduler import EndToEndPlan, schedule_model
from icca.simulator import EventKind, simulate, simulate_full, trace_to_rows, validate_trace

# one core, no latency, links much faster than HBM
SOLO = ChipConfig(1, 1 << 20, core_flops={"matmul": 1e10, "other": 1e9},
                  topology=Topology(TopologyKind.ALL_TO_ALL, 1e12), hbm=HbmSpec(1, 1e9))


def run(g, c, cm=CostModelConfig(), reorder=False):
    cv = build_curves(g, cm, c)
    plan = search_best_order(g, cv, reorder=reorder) if reorder else schedule_model(range(1, len(cv) + 1), cv)
    return plan, simulate_full(plan, g, c, cm)


def test_one_operator_closed_form():
    b, k = 4, 256
    g = zoo.matmul_chain([k], batch=b)
    plan, res = run(g, SOLO)
    expected = b * k * 2 / 1e9 + b * k / 1e9
    assert res.report.total_time == pytest.approx(expected, rel=1e-12)
    assert plan.t_end == pytest.approx(expected, rel=1e-12)
    assert validate_trace(res.trace) is None


def test_two_operator_closed_form():
    b, k, n = 4, 64, 256
    g = zoo.matmul_chain([k, n], batch=b)
    plan, res = run(g, SOLO)
    p1, l1 = b * k * 2 / 1e9, b * k / 1e9
    p2, l2 = k * n * 2 / 1e9, 2 * b * k * n / 1e10
    assert plan.counts == [2, 2]
    expected = p1 + max(l1, p2) + l2
    assert plan.t_end == pytest.approx(expected, rel=1e-12)
    assert res.report.total_time == pytest.approx(expected, rel=1e-12)
    assert res.report.hbm_bytes == (b * k + k * n) * 2


def test_empty_plan():
    plan = EndToEndPlan((), (), 0.0, 0.0)
    rep = simulate(plan, zoo.matmul_chain([8]), SOLO, CostModelConfig())
    assert rep.total_time == 0 and rep.num_events == 0


def test_deterministic(tiny, a2a, cm):
    _, a = run(tiny, load_preset("a2a-64"))
    _, b = run(tiny, load_preset("a2a-64"))
    assert a.report == b.report
    assert list(trace_to_rows(a.trace)) == list(trace_to_rows(b.trace))


@pytest.mark.parametrize("preset", ["a2a-64", "mesh-8x8"])
@pytest.mark.parametrize("mode", list(SramContention))
def test_fixture_traces_are_valid(tiny, preset, mode):
    c = load_preset(preset)
    cm = CostModelConfig(sram_contention=mode)
    plan, res = run(tiny, c, cm, reorder=True)
    assert validate_trace(res.trace) is None
    rep = res.report
    b = rep.breakdown
    assert b.preload_only + b.execute_only + b.overlapped + b.interconnect_stall == pytest.approx(rep.total_time)
    assert rep.occupancy_peak <= c.capacity
    assert rep.hbm_bytes == pytest.approx(sum(op.hbm_load_bytes for op in tiny.operators))
    assert 0 <= rep.hbm_utilization <= 1 and 0 <= rep.interconnect_utilization <= 1
    assert rep.total_time >= rep.hbm_bytes / c.hbm.total_bandwidth


@pytest.fixture(scope="module")
def trace():
    _, res = run(zoo.tiny_block(), load_preset("a2a-64"), reorder=True)
    return res.trace


def _copy(tr):
    return dataclasses.replace(tr, start=tr.start.copy(), end=tr.end.copy(), nbytes=tr.nbytes.copy())


def test_mutation_end_before_start(trace):
    tr = _copy(trace)
    e = int(np.flatnonzero(tr.end > tr.start)[0])
    tr.end[e] = tr.start[e] - 1e-6
    assert validate_trace(tr).kind == "causality"


def test_mutation_starts_before_dependency(trace):
    tr = _copy(trace)
    owner = np.repeat(np.arange(len(tr)), np.diff(tr.dep_ptr))
    j = int(np.flatnonzero((~tr.dep_stream) & (tr.end[tr.dep_idx] > 0))[0])
    e, d = int(owner[j]), int(tr.dep_idx[j])
    shift = tr.start[e] - tr.end[d] + 1e-7
    tr.start[e] -= shift
    tr.end[e] -= shift
    v = validate_trace(tr)
    assert v is not None and v.kind in ("causality", "overlap")


def test_mutation_resource_overlap(trace):
    tr = _copy(trace)
    fetch = np.flatnonzero(tr.kind == EventKind.HBM_FETCH)
    r = tr.resource[fetch[0]]
    same = [e for e in fetch if tr.resource[e] == r]
    a, b = sorted(same, key=lambda e: tr.start[e])[:2]
    tr.start[a] = tr.start[b]
    tr.end[a] = tr.end[b] + (tr.end[b] - tr.start[b])
    v = validate_trace(tr)
    assert v is not None and v.kind in ("overlap", "causality")


def test_mutation_lost_hbm_bytes(trace):
    tr = _copy(trace)
    e = int(np.flatnonzero(tr.kind == EventKind.HBM_FETCH)[0])
    tr.nbytes[e] *= 0.5
    assert validate_trace(tr).kind == "conservation"


def test_mutation_lost_delivery(trace):
    tr = _copy(trace)
    e = int(np.flatnonzero((tr.kind == EventKind.TRANSFER_TILE) & (tr.core >= 0))[0])
    tr.nbytes[e] = 0.0
    assert validate_trace(tr).kind == "conservation"


@given(st.integers(0, 10_000), st.sampled_from(["a2a-64", "mesh-8x8"]), st.integers(2, 8))
@settings(max_examples=25, deadline=None)
def test_random_chains_simulate_cleanly(seed, preset, n):
    c = load_preset(preset)
    g = zoo.random_chain(np.random.default_rng(seed), n)
    plan, res = run(g, c)
    assert validate_trace(res.trace) is None
    assert res.report.occupancy_peak <= c.capacity
    assert res.report.total_time >= res.report.hbm_bytes / c.hbm.total_bandwidth * (1 - 1e-12)
