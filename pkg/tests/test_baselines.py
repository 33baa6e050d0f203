import math

import pytest

from icca import zoo
from icca.baselines import KINDS, ideal_roofline, ideal_times, naive_overlap, run_baseline, static_partition
from icca.curves import build_curves, simple_curves
from icca.scheduler import check_counts, run_timeline


def one(em, L, pm, P):
    return ([(em, L)], [(pm, 0, P)])


def test_naive_preloads_only_next():
    cv = simple_curves([one(4, 5.0, 2, 3.0), one(4, 2.0, 3, 4.0), one(4, 1.0, 3, 1.0)], 10)
    plan = naive_overlap(cv)
    assert all(c - i <= 1 for i, c in enumerate(plan.counts, start=1))
    assert plan.counts == [2, 3, 3]
    assert plan.t_end == 3 + max(5, 4) + max(2, 1) + 1


def test_naive_falls_back_to_serial():
    cv = simple_curves([one(8, 5.0, 2, 3.0), one(8, 2.0, 3, 4.0)], 10)
    plan = naive_overlap(cv)
    assert plan.counts == [1, 2]
    assert plan.t_end == 3 + 5 + 4 + 2


def test_static_uses_one_split():
    specs = [([(8, 1.0), (4, 2.0)], [(4, 0, 1.0)]) for _ in range(4)]
    plan = static_partition(simple_curves(specs, 12))
    check_counts(plan.preload_order, plan.counts)
    frac = plan.stats["static_exec_fraction"]
    assert all(s.exec_space <= 12 * frac for s in plan.schedules)
    assert max(b for _, b in plan.occupancy) <= 12


def test_ideal_ignores_memory():
    specs = [one(8, 5.0, 8, 3.0), one(8, 2.0, 8, 4.0)]
    cv = simple_curves(specs, 9)  # nothing overlaps in practice
    t = ideal_roofline(cv)
    assert t == run_timeline([1, 2], [2, 2], [5.0, 2.0], [3.0, 4.0], [0, 0], [0, 0]).t_end == 3 + 5 + 2


def test_ideal_uses_full_hbm_bandwidth(tiny, a2a, cm):
    cv = build_curves(tiny, cm, a2a)
    et, pt = ideal_times(cv, a2a.hbm.total_bandwidth)
    for oc, e, p in zip(cv.ops, et, pt):
        assert p == oc.space.hbm_bytes / a2a.hbm.total_bandwidth
        assert e == oc.min_exec_time <= min(pt.plan.exec_time for pt in oc.exec_curve)


@pytest.mark.parametrize("kind", [k for k in KINDS if k != "ideal"])
def test_every_scheduler_gives_a_valid_plan(kind, tiny, cm):
    from icca.hw import load_preset
    c = load_preset("a2a-64")
    cv = build_curves(tiny, cm, c)
    plan = run_baseline(kind, tiny, cv)
    check_counts(plan.preload_order, plan.counts)
    assert plan.t_end >= ideal_roofline(cv, c.hbm.total_bandwidth) * (1 - 1e-12)
    assert max(b for _, b in plan.occupancy) <= cv.capacity * (1 + 1e-9)


def test_full_beats_dynamic_beats_naive_analytically(cm):
    from icca.hw import load_preset
    c = load_preset("a2a-64")
    g = zoo.gpt_like(layers=2, hidden=256, heads=4, batch=4, context=64)
    cv = build_curves(g, cm, c)
    full = run_baseline("full", g, cv)
    dyn = run_baseline("dynamic", g, cv)
    naive = run_baseline("naive", g, cv)
    assert full.t_end <= dyn.t_end <= naive.t_end


def test_ideal_has_no_plan(tiny, a2a, cm):
    with pytest.raises(ValueError):
        run_baseline("ideal", tiny, build_curves(tiny, cm, a2a))
    assert not math.isnan(ideal_roofline(build_curves(tiny, cm, a2a)))
