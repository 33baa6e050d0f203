"""Greedy memory allocation between the executing operator and concurrent preloads.

Start every operator at its fastest point, then repeatedly step one operator to
its next-smaller point, picking the step that frees the most space per second
of added time, until the combination fits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .pareto import ParetoCurve, ParetoPoint


class AllocationInfeasible(RuntimeError):
    """Even the minimum-memory combination exceeds capacity."""


@dataclass(frozen=True)
class AllocationProblem:
    exec_op: int
    exec_curve: ParetoCurve
    preload_ops: tuple[int, ...] = ()
    preload_curves: tuple[ParetoCurve, ...] = ()
    capacity: float = math.inf
    link_bandwidth: float | None = None  # enables the contention terms

    def __post_init__(self):
        if len(self.preload_ops) != len(self.preload_curves):
            raise ValueError("one curve per preloaded operator")
        if not self.capacity > 0:
            raise ValueError("capacity must be positive")
        if not len(self.exec_curve) or any(not len(cv) for cv in self.preload_curves):
            raise ValueError("curves must be non-empty")

    @property
    def op_ids(self) -> tuple[int, ...]:
        return (self.exec_op, *self.preload_ops)

    @property
    def curves(self) -> tuple[ParetoCurve, ...]:
        return (self.exec_curve, *self.preload_curves)


@dataclass(frozen=True)
class TimeComponents:
    exec_time: float
    dist_time: float
    contention: float
    memory_access: float
    penalty: float = 0.0  # ranking only, never part of latency

    @property
    def latency(self) -> float:
        return self.exec_time + self.dist_time + self.contention + self.memory_access

    @property
    def total(self) -> float:
        return self.latency + self.penalty


@dataclass(frozen=True)
class AllocStep:
    op_id: int
    from_index: int
    to_index: int
    delta: float
    space_reduced: float
    time_increase: float
    # (op_id, delta, space_reduced) for every operator that could have stepped
    candidates: tuple = ()


@dataclass(frozen=True)
class AllocationSolution:
    selection: dict  # op id -> ParetoPoint
    indices: tuple[int, ...]  # point index per operator, exec op first
    total_time: float
    total_space: float
    components: TimeComponents
    steps: tuple[AllocStep, ...] = field(default=(), repr=False)


def _attr(point: ParetoPoint, name: str) -> float:
    return getattr(point.plan, name, 0.0) or 0.0


def exec_of(point: ParetoPoint) -> float:
    """Execution latency of an exec point (its curve time may include a ranking penalty)."""
    t = getattr(point.plan, "exec_time", None)
    return point.time if t is None else t


def dist_of(point: ParetoPoint) -> float:
    """Distribution latency of a preload point (its curve time may include a ranking penalty)."""
    d = getattr(point.plan, "dist_time", None)
    return point.time if d is None else d


def time_components(p: AllocationProblem, indices) -> TimeComponents:
    pts = [cv[i] for cv, i in zip(p.curves, indices)]
    exec_pt, pre_pts = pts[0], pts[1:]
    dist = sum(dist_of(q) for q in pre_pts)
    penalty = (exec_pt.time - exec_of(exec_pt)) + sum(q.time - dist_of(q) for q in pre_pts)
    cont = mem = 0.0
    if p.link_bandwidth:
        x = _attr(exec_pt, "inbound")
        pre_in = sum(_attr(q, "inbound") for q in pre_pts)
        # execute-phase exchange and preload delivery share each core's inbound
        # link; delivery fits in the link's idle time while the core computes,
        # only the overflow beyond the execute window stalls
        bw = p.link_bandwidth
        cont = min(min(x, pre_in) / bw, max(0.0, (x + pre_in) / bw - exec_of(exec_pt)))
        mem = max(0.0, _attr(exec_pt, "serve") - x) / p.link_bandwidth
    return TimeComponents(exec_of(exec_pt), dist, cont, mem, penalty)


def zero_step_time(p: AllocationProblem, indices=None) -> float:
    """Total time of a concrete selection (fastest points when ``indices`` is None)."""
    if indices is None:
        indices = (0,) * len(p.curves)
    return time_components(p, indices).total


def allocate(p: AllocationProblem) -> AllocationSolution:
    curves = p.curves
    ids = p.op_ids
    idx = [0] * len(curves)
    if sum(cv.smallest.memory for cv in curves) > p.capacity:
        raise AllocationInfeasible(
            f"operator {p.exec_op}: minimum footprint exceeds capacity {p.capacity:g} with {len(p.preload_ops)} preloads")
    space = sum(cv[0].memory for cv in curves)
    cur_time = zero_step_time(p, idx)
    steps = []
    while space > p.capacity:
        best = None
        cands = []
        for k, cv in enumerate(curves):
            if idx[k] + 1 >= len(cv):
                continue
            trial = list(idx)
            trial[k] += 1
            t = zero_step_time(p, trial)
            red = cv[idx[k]].memory - cv[idx[k] + 1].memory
            inc = t - cur_time
            delta = math.inf if inc <= 0 else red / inc
            cands.append((ids[k], delta, red))
            key = (delta, red, -ids[k])
            if best is None or key > best[0]:
                best = (key, k, t, red, inc)
        # the minimum-memory check above guarantees a step exists
        _, k, t, red, inc = best
        steps.append(AllocStep(ids[k], idx[k], idx[k] + 1, best[0][0], red, inc, tuple(cands)))
        idx[k] += 1
        space = sum(cv[i].memory for cv, i in zip(curves, idx))
        cur_time = t
    comps = time_components(p, idx)
    sel = {i: cv[j] for i, cv, j in zip(ids, curves, idx)}
    return AllocationSolution(sel, tuple(idx), comps.total, space, comps, tuple(steps))
