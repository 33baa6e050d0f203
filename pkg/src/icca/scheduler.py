"""Preload-number scheduling by backward induction, and the timeline evaluator.

Program model: the host issues ``preload_async`` calls in preload order,
interleaved with blocking ``execute`` calls in model order.  ``counts[i-1]``
(written c_i) is how many preloads have been issued before ``execute(i)``;
the preload number is p_i = c_i - i.  Rules:

* preloads run one at a time in issue order;
* a preload cannot start before it is issued, i.e. before the previous
  ``execute`` in program order has returned;
* ``execute(i)`` waits for ``execute(i-1)`` and for its own preload.

SRAM is reserved at issue: a preload's footprint is held from issue until its
operator starts executing, when the execute-state footprint takes over until
execution ends.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from .memalloc import (AllocationInfeasible, AllocationProblem, AllocationSolution, allocate, dist_of, exec_of,
                        time_components)
from .pareto import ParetoPoint
from .curves import own_preload


class SchedulingInfeasible(RuntimeError):
    def __init__(self, op_id, msg=""):
        super().__init__(msg or f"operator {op_id}: no preload number yields a feasible allocation")
        self.op_id = op_id


class SramOverflow(RuntimeError):
    def __init__(self, time, occupancy, capacity, op_id):
        super().__init__(f"SRAM overflow at t={time:.9g}s during operator {op_id}: "
                         f"{occupancy:.0f} > {capacity:.0f} bytes")
        self.time = time
        self.occupancy = occupancy
        self.op_id = op_id


class InvalidAssignment(ValueError):
    pass


# ---------------------------------------------------------------------------
# timeline


@dataclass(frozen=True)
class Timeline:
    t_end: float
    s_pre: tuple[float, ...]  # by preload position
    e_pre: tuple[float, ...]
    s_exe: tuple[float, ...]  # by op id - 1
    e_exe: tuple[float, ...]
    issue: tuple[float, ...]  # by preload position
    occupancy: tuple[tuple[float, float], ...]  # (time, bytes) after each change
    peak: float


def min_counts(order: Sequence[int]) -> list[int]:
    """Smallest legal c_i: every operator up to i must have been issued."""
    n = len(order)
    pos = [0] * (n + 1)
    for k, op in enumerate(order):
        pos[op] = k
    out, m = [], 0
    for i in range(1, n + 1):
        m = max(m, pos[i] + 1)
        out.append(m)
    return out


def check_counts(order: Sequence[int], counts: Sequence[int]) -> None:
    n = len(order)
    if sorted(order) != list(range(1, n + 1)):
        raise InvalidAssignment("preload order is not a permutation of 1..N")
    if len(counts) != n:
        raise InvalidAssignment("one preload count per operator required")
    lo = min_counts(order)
    prev = 0
    for i, (c, m) in enumerate(zip(counts, lo), start=1):
        if c < m:
            raise InvalidAssignment(f"operator {i}: its preload (or an earlier one) is issued after execution")
        if c < prev:
            raise InvalidAssignment(f"operator {i}: preload count decreases ({prev} -> {c})")
        if c > n:
            raise InvalidAssignment(f"operator {i}: preload count {c} exceeds N")
        prev = c
    if counts[-1] != n:
        raise InvalidAssignment("the last operator must have preload number 0")


def run_timeline(order, counts, exec_time, preload_time, exec_mem, preload_mem, capacity=math.inf,
                 check=True) -> Timeline:
    """ASAP evaluation of a complete assignment; per-op arrays are indexed by op id - 1."""
    if check:
        check_counts(order, counts)
    n = len(order)
    pos = [0] * n
    for k, op in enumerate(order):
        pos[op - 1] = k
    s_pre = [0.0] * n
    e_pre = [0.0] * n
    issue = [0.0] * n
    s_exe = [0.0] * n
    e_exe = [0.0] * n
    occ = 0.0
    peak = 0.0
    profile = [(0.0, 0.0)]
    tol = 1e-9 * max(1.0, capacity if math.isfinite(capacity) else 1.0)
    issued = 0
    last_e_pre = 0.0
    prev_end = 0.0
    for i in range(n):
        while issued < counts[i]:
            k = issued
            op = order[k] - 1
            issue[k] = prev_end
            s_pre[k] = max(last_e_pre, prev_end)
            e_pre[k] = s_pre[k] + preload_time[op]
            last_e_pre = e_pre[k]
            occ += preload_mem[op]
            issued += 1
        if occ > peak:
            peak = occ
        profile.append((prev_end, occ))
        if occ > capacity + tol:
            raise SramOverflow(prev_end, occ, capacity, i + 1)
        s_exe[i] = max(prev_end, e_pre[pos[i]])
        occ += exec_mem[i] - preload_mem[i]
        profile.append((s_exe[i], occ))
        if occ > peak:
            peak = occ
        if occ > capacity + tol:
            raise SramOverflow(s_exe[i], occ, capacity, i + 1)
        e_exe[i] = s_exe[i] + exec_time[i]
        occ -= exec_mem[i]
        prev_end = e_exe[i]
    profile.append((prev_end, occ))
    return Timeline(prev_end, tuple(s_pre), tuple(e_pre), tuple(s_exe), tuple(e_exe), tuple(issue),
                    tuple(profile), peak)


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class OpSchedule:
    op_id: int
    preload_number: int
    t_s_pre: float
    t_e_pre: float
    t_s_exe: float
    t_e_exe: float
    exec_time: float
    preload_time: float
    exec_space: float
    preload_space: float
    exec_factors: tuple = ()
    chunk_factor: int = 1
    exec_plan_id: int = 0
    preload_plan_id: int = 0


@dataclass(frozen=True)
class EndToEndPlan:
    preload_order: tuple[int, ...]
    schedules: tuple[OpSchedule, ...]
    t_start: float
    t_end: float
    occupancy: tuple[tuple[float, float], ...] = ()
    capacity: float = math.inf
    scheduler: str = "full"
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def counts(self) -> list[int]:
        return [s.op_id + s.preload_number for s in self.schedules]

    @property
    def latency(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class Assignment:
    """Per-operator decision for evaluate_timeline."""

    preload_number: int
    exec_point: ParetoPoint
    preload_point: ParetoPoint
    exec_time: float | None = None  # defaults to exec point time + distribution time
    preload_time: float | None = None


def _assignment_times(a: Assignment):
    et = a.exec_time if a.exec_time is not None else exec_of(a.exec_point) + dist_of(a.preload_point)
    pt = a.preload_time if a.preload_time is not None else a.preload_point.plan.preload_time
    return et, pt


def evaluate_timeline(assignments: Sequence[Assignment], order: Sequence[int], capacity=math.inf) -> Timeline:
    """ASAP timeline of a complete assignment; raises SramOverflow at the first violating instant."""
    counts = [i + a.preload_number for i, a in enumerate(assignments, start=1)]
    et, pt = zip(*(_assignment_times(a) for a in assignments))
    return run_timeline(order, counts, et, pt, [a.exec_point.memory for a in assignments],
                        [a.preload_point.memory for a in assignments], capacity)


def build_plan(order, counts, curves, exec_pts, pre_pts, exec_times, pre_times, scheduler, stats) -> EndToEndPlan:
    n = len(order)
    tl = run_timeline(order, counts, exec_times, pre_times, [p.memory for p in exec_pts],
                      [p.memory for p in pre_pts], curves.capacity)
    pos = {op: k for k, op in enumerate(order)}
    scheds = []
    for i in range(1, n + 1):
        k = pos[i]
        ep, pp = exec_pts[i - 1], pre_pts[i - 1]
        scheds.append(OpSchedule(
            i, counts[i - 1] - i, tl.s_pre[k], tl.e_pre[k], tl.s_exe[i - 1], tl.e_exe[i - 1],
            exec_times[i - 1], pre_times[i - 1], ep.memory, pp.memory,
            tuple(getattr(ep.plan, "factors", ())), getattr(pp.plan, "chunk_factor", 1), ep.plan_id, pp.plan_id))
    return EndToEndPlan(tuple(order), tuple(scheds), 0.0, tl.t_end, tl.occupancy, curves.capacity,
                        scheduler, dict(stats, peak_occupancy=tl.peak))


# ---------------------------------------------------------------------------
# backward induction


class _AllocCache:
    """Allocation memo keyed by operator shapes, so identical layers share work."""

    def __init__(self, curves):
        self.curves = curves
        self.memo = {}
        self.invocations = 0

    def __call__(self, i, preload_ops, exec_choice):
        self.invocations += 1
        cv = self.curves
        key = (cv[i].shape_key, tuple((cv[j].shape_key, exec_choice[j].plan_id) for j in preload_ops))
        hit = self.memo.get(key, False)
        if hit is not False:
            if hit is None:
                raise AllocationInfeasible(f"operator {i}")
            idx = hit
        else:
            prob = AllocationProblem(i, cv[i].exec_curve, tuple(preload_ops),
                                     tuple(exec_choice[j].plan.preload for j in preload_ops),
                                     cv.capacity, cv.link_bandwidth)
            try:
                sol = allocate(prob)
            except AllocationInfeasible:
                self.memo[key] = None
                raise
            idx = sol.indices
            self.memo[key] = idx
        prob = AllocationProblem(i, cv[i].exec_curve, tuple(preload_ops),
                                 tuple(exec_choice[j].plan.preload for j in preload_ops),
                                 cv.capacity, cv.link_bandwidth)
        comps = time_components(prob, idx)
        sel = {op: c[x] for op, c, x in zip(prob.op_ids, prob.curves, idx)}
        return AllocationSolution(sel, idx, comps.total, 0.0, comps)


def _index(curve, point) -> int:
    return next(k for k, p in enumerate(curve.points) if p is point)


def _exec_latency(exec_pt, own_pre_pt, comps) -> float:
    # own distribution happens at the start of execution; contention and
    # memory-access terms come from the operators preloading alongside
    return exec_of(exec_pt) + dist_of(own_pre_pt) + comps.contention + comps.memory_access


def _extra_penalty(sol, i, exec_choice) -> float:
    """Ranking penalty beyond what every preloaded operator pays at its own preferred point.

    Counts differ in which operators are in flight, so only the excess is
    comparable between them.
    """
    pen = sol.components.penalty
    for j in sol.selection:
        if j != i:
            own = own_preload(exec_choice[j])
            pen -= own.time - dist_of(own)
    return pen


def schedule_model(order: Sequence[int], curves, scheduler="full", alloc=None) -> EndToEndPlan:
    """Choose preload counts and plans for a fixed preload order.

    Backward induction from the last operator: for operator i, every legal
    count c (from the minimum up to c_{i+1}) is tried in increasing order,
    stopping at the first infeasible allocation; the count giving the latest
    execution start, relative to a fixed end of the model, is kept.
    """
    n = len(curves)
    order = tuple(order)
    if sorted(order) != list(range(1, n + 1)):
        raise InvalidAssignment("preload order is not a permutation of 1..N")
    alloc = alloc or _AllocCache(curves)
    start_inv = alloc.invocations
    lo = min_counts(order)
    processed = [False] * (n + 1)
    t_s_exe = [0.0] * (n + 2)
    t_s_pre = [math.inf] * (n + 1)  # by position; t_s_pre[n] = +inf sentinel
    lean_pre = {}  # op -> minimum-memory preload point for its chosen exec plan
    exec_choice = {}
    solutions = {}
    counts = [0] * (n + 1)
    ready = n  # positions >= ready have ALAP preload times
    next_count = n
    max_tried = 0
    for i in range(n, 0, -1):
        bound_exe = t_s_exe[i + 1] if i < n else 0.0
        best = None
        tried = 0
        for c in range(lo[i - 1], next_count + 1):
            s_ops = [j for j in order[:c] if j > i]
            tried += 1
            try:
                sol = alloc(i, s_ops, exec_choice)
            except AllocationInfeasible:
                break
            ep = sol.selection[i]
            lat = _exec_latency(ep, own_preload(ep), sol.components)
            bound = min(bound_exe, t_s_pre[c]) if c < n else bound_exe
            val = bound - lat
            key = val - _extra_penalty(sol, i, exec_choice)
            if best is None or key > best[3]:
                best = (val, c, sol, key)
        max_tried = max(max_tried, tried)
        if best is None:
            raise SchedulingInfeasible(i)
        val, c, sol, _ = best
        t_s_exe[i] = val
        counts[i] = c
        next_count = c
        solutions[i] = sol
        exec_choice[i] = sol.selection[i]
        lean_pre[i] = own_preload(exec_choice[i])
        processed[i] = True
        while ready > 0 and processed[order[ready - 1]]:
            k = ready - 1
            op = order[k]
            e = min(t_s_pre[k + 1], t_s_exe[op])
            t_s_pre[k] = e - lean_pre[op].plan.preload_time
            ready = k

    # each preloaded operator keeps the leanest preload layout any allocation gave it
    pre_pick = {}
    for i, sol in solutions.items():
        for j, pt in sol.selection.items():
            if j == i:
                continue
            cur = pre_pick.get(j)
            if cur is None or (pt.memory, pt.plan_id) < (cur.memory, cur.plan_id):
                pre_pick[j] = pt
    exec_pts, pre_pts, exec_times, pre_times = [], [], [], []
    for i in range(1, n + 1):
        ep = exec_choice[i]
        pp = pre_pick.get(i) or own_preload(ep)
        s_ops = [j for j in order[:counts[i]] if j > i]
        prob = AllocationProblem(i, curves[i].exec_curve, tuple(s_ops),
                                 tuple(exec_choice[j].plan.preload for j in s_ops),
                                 curves.capacity, curves.link_bandwidth)
        idx = (_index(curves[i].exec_curve, ep), *(_index(exec_choice[j].plan.preload, pre_pick[j]) for j in s_ops))
        comps = time_components(prob, idx)
        exec_pts.append(ep)
        pre_pts.append(pp)
        exec_times.append(_exec_latency(ep, pp, comps))
        pre_times.append(pp.plan.preload_time)
    stats = {"alloc_invocations": alloc.invocations - start_inv, "max_counts_tried": max_tried,
             "induction_t_span": -t_s_exe[1] if n else 0.0}
    return build_plan(order, counts[1:], curves, exec_pts, pre_pts, exec_times, pre_times, scheduler, stats)


# ---------------------------------------------------------------------------
# schedule files


def plan_to_dict(plan: EndToEndPlan) -> dict:
    pos = {op: k for k, op in enumerate(plan.preload_order)}
    return {
        "format_version": 1,
        "scheduler": plan.scheduler,
        "t_start": plan.t_start,
        "t_end": plan.t_end,
        "capacity": plan.capacity,
        "preload_order": list(plan.preload_order),
        "operators": [
            {
                "op_id": s.op_id,
                "preload_position": pos[s.op_id],
                "preload_number": s.preload_number,
                "exec_factors": list(s.exec_factors),
                "chunk_factor": s.chunk_factor,
                "exec_plan_id": s.exec_plan_id,
                "preload_plan_id": s.preload_plan_id,
                "exec_space": s.exec_space,
                "preload_space": s.preload_space,
                "exec_time": s.exec_time,
                "preload_time": s.preload_time,
                "t_s_pre": s.t_s_pre,
                "t_e_pre": s.t_e_pre,
                "t_s_exe": s.t_s_exe,
                "t_e_exe": s.t_e_exe,
            }
            for s in plan.schedules
        ],
    }


def plan_from_dict(doc: dict) -> EndToEndPlan:
    if doc.get("format_version") != 1:
        raise ValueError("unsupported schedule format_version")
    scheds = []
    for r in doc["operators"]:
        scheds.append(OpSchedule(int(r["op_id"]), int(r["preload_number"]), float(r["t_s_pre"]),
                                 float(r["t_e_pre"]), float(r["t_s_exe"]), float(r["t_e_exe"]),
                                 float(r["exec_time"]), float(r["preload_time"]), float(r["exec_space"]),
                                 float(r["preload_space"]), tuple(int(x) for x in r["exec_factors"]),
                                 int(r["chunk_factor"]), int(r.get("exec_plan_id", 0)),
                                 int(r.get("preload_plan_id", 0))))
    order = tuple(int(x) for x in doc["preload_order"])
    plan = EndToEndPlan(order, tuple(scheds), float(doc.get("t_start", 0.0)), float(doc["t_end"]),
                        (), float(doc.get("capacity", math.inf)), str(doc.get("scheduler", "full")))
    check_counts(order, plan.counts)
    return plan


def save_plan(plan: EndToEndPlan, path) -> None:
    Path(path).write_text(yaml.safe_dump(plan_to_dict(plan), sort_keys=False))


def load_plan(path) -> EndToEndPlan:
    return plan_from_dict(yaml.safe_load(Path(path).read_text()))
