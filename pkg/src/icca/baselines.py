"""Reference schedulers used to judge the full pipeline.

naive    fastest execute plan everywhere; preload only the next operator, with
         whatever space is left
static   one global split of SRAM into an execute region and a preload region,
         picked from a fixed grid
dynamic  full scheduler, preload order fixed to execution order
full     full scheduler plus preload-order search
ideal    analytic bound: fastest execute plans, free distribution, preloads at
         full HBM bandwidth with unlimited memory
"""
from __future__ import annotations

import math
from enum import Enum

from .memalloc import AllocationProblem, dist_of, exec_of, time_components
from .scheduler import EndToEndPlan, SchedulingInfeasible, SramOverflow, build_plan, run_timeline


class BaselineKind(str, Enum):
    NAIVE = "naive"
    STATIC = "static"
    DYNAMIC = "dynamic"
    FULL = "full"
    IDEAL = "ideal"


KINDS = tuple(k.value for k in BaselineKind)


def _latency(curves, i, ex, pre, inflight):
    """Execute latency of op i while the preloads of ``inflight`` ops are under way."""
    prob = AllocationProblem(i, curves[i].exec_curve, tuple(inflight),
                             tuple(ex[j - 1].plan.preload for j in inflight), math.inf, curves.link_bandwidth)
    idx = (_pos(prob.exec_curve, ex[i - 1]),) + tuple(
        _pos(cv, pre[j - 1]) for cv, j in zip(prob.preload_curves, inflight))
    comps = time_components(prob, idx)
    return exec_of(ex[i - 1]) + dist_of(pre[i - 1]) + comps.contention + comps.memory_access


def _pos(curve, point):
    return next(k for k, p in enumerate(curve.points) if p is point)


def _preload_time(pt):
    return pt.plan.preload_time


def naive_overlap(curves) -> EndToEndPlan:
    n = len(curves)
    cap = curves.capacity
    order = tuple(range(1, n + 1))
    ex = [curves[i].exec_curve.fastest for i in order]
    pre = [None] * n
    counts = []

    def fastest_fitting(i, room):
        for p in ex[i - 1].plan.preload:  # ordered fastest first
            if p.memory <= room:
                return p
        return None

    first = fastest_fitting(1, cap)
    if first is None:
        raise SchedulingInfeasible(1, "preload does not fit on chip")
    pre[0] = first
    for i in range(1, n + 1):
        if i == n:
            counts.append(n)
            continue
        room = cap - max(ex[i - 1].memory, pre[i - 1].memory)
        p = fastest_fitting(i + 1, room)
        if p is not None:
            pre[i] = p
            counts.append(i + 1)
        else:
            alone = fastest_fitting(i + 1, cap)
            if alone is None:
                raise SchedulingInfeasible(i + 1, "preload does not fit on chip")
            pre[i] = alone
            counts.append(i)
    et = []
    for i in order:
        inflight = [i + 1] if counts[i - 1] == i + 1 else []
        et.append(_latency(curves, i, ex, pre, inflight))
    pt = [_preload_time(p) for p in pre]
    return build_plan(order, counts, curves, ex, pre, et, pt, "naive", {"alloc_invocations": 0})


def _static_split(curves, exec_space, use_max):
    n = len(curves)
    cap = curves.capacity
    room = cap - exec_space
    order = tuple(range(1, n + 1))
    ex, pre = [], []
    for i in order:
        fit = [p for p in curves[i].exec_curve if p.memory <= exec_space * (1 + 1e-12)]
        if not fit:
            return None
        e = fit[0]
        pc = e.plan.preload
        p = pc.fastest if use_max else pc.smallest
        if p.memory > cap:
            return None
        ex.append(e)
        pre.append(p)
    counts = []
    prev = 0
    for i in order:
        # greedily fill the preload region with upcoming operators, in order
        k, used = i, 0.0
        while (k < n and used + pre[k].memory <= room * (1 + 1e-12)
               and pre[i - 1].memory + used + pre[k].memory <= cap * (1 + 1e-12)):
            used += pre[k].memory
            k += 1
        k = max(k, prev, i)
        counts.append(k)
        prev = k
    et = []
    for i in order:
        et.append(_latency(curves, i, ex, pre, range(i + 1, counts[i - 1] + 1)))
    pt = [_preload_time(p) for p in pre]
    try:
        return build_plan(order, counts, curves, ex, pre, et, pt, "static", {"alloc_invocations": 0})
    except SramOverflow:
        return None


def static_partition(curves, grid=16) -> EndToEndPlan:
    """Best single execute/preload split over ``grid`` evenly spaced sizes."""
    best = None
    best_key = None
    for k in range(1, grid + 1):
        exec_space = curves.capacity * k / grid
        for use_max in (True, False):
            plan = _static_split(curves, exec_space, use_max)
            if plan is None:
                continue
            key = (plan.t_end, k, not use_max)
            if best is None or key < best_key:
                best, best_key = plan, key
                best.stats.update({"static_exec_fraction": k / grid,
                                   "static_preload_plans": "max" if use_max else "min"})
    if best is None:
        raise SchedulingInfeasible(0, "no static split admits a feasible schedule")
    return best


def ideal_times(curves, hbm_bandwidth=None):
    """Per-op (execute, preload) times for the ideal bound."""
    et, pt = [], []
    for oc in curves.ops:
        et.append(oc.min_exec_time)
        if oc.space is not None and hbm_bandwidth:
            pt.append(oc.space.hbm_bytes / hbm_bandwidth)
        else:
            pt.append(min(_preload_time(p) for e in oc.exec_curve for p in e.plan.preload))
    return et, pt


def ideal_roofline(curves, hbm_bandwidth=None) -> float:
    n = len(curves)
    if n == 0:
        return 0.0
    et, pt = ideal_times(curves, hbm_bandwidth)
    order = list(range(1, n + 1))
    tl = run_timeline(order, [n] * n, et, pt, [0.0] * n, [0.0] * n, check=False)
    return tl.t_end


def run_baseline(kind, g, curves, max_orders=None) -> EndToEndPlan:
    from .reorder import search_best_order

    kind = BaselineKind(kind)
    if kind is BaselineKind.NAIVE:
        return naive_overlap(curves)
    if kind is BaselineKind.STATIC:
        return static_partition(curves)
    if kind is BaselineKind.DYNAMIC:
        return search_best_order(g, curves, reorder=False, scheduler="dynamic")
    if kind is BaselineKind.FULL:
        return search_best_order(g, curves, max_orders=max_orders, scheduler="full")
    raise ValueError("the ideal bound is analytic; use ideal_roofline")
