"""Per-operator tradeoff curves consumed by the allocator and schedulers.

Each operator gets an execute-state curve (execution space vs execution time).
Every point on it carries its own preload-state curve (preload space vs
data-distribution time), since the preload layout derives from the execute
layout.
"""
from __future__ import annotations

from dataclasses import dataclass

from .cost import CostModelConfig, dist_time, estimate_preload_time, exec_breakdown, interchip_time
from .hw import ChipConfig
from .model_ir import ModelGraph
from .pareto import ParetoCurve, ParetoPoint, pareto_frontier
from .plans import (OpSpace, PartitionPlan, PlanGeometry, PreloadStatePlan, enumerate_partition_plans,
                    enumerate_preload_plans, iteration_space)


@dataclass(frozen=True)
class PreloadOption:
    chunk_factor: int
    dist_time: float
    preload_time: float
    inbound: float = 0.0  # bytes per core arriving from HBM
    dist_bytes: float = 0.0
    plan: PreloadStatePlan | None = None


@dataclass(frozen=True)
class ExecOption:
    factors: tuple
    exec_time: float
    preload: ParetoCurve
    inbound: float = 0.0  # execute-phase bytes per core arriving from peers
    serve: float = 0.0  # execute-phase bytes per core read by peers
    plan: PartitionPlan | None = None
    own_preload: int = -1  # index of the preferred preload point; -1 means the leanest


@dataclass(frozen=True)
class OpCurves:
    op_id: int
    exec_curve: ParetoCurve
    shape_key: object = None  # equal for structurally identical operators
    space: OpSpace | None = None
    all_exec_times: tuple | None = None  # every plan's execution time, dominated ones included

    def preload_curve(self, exec_point: ParetoPoint) -> ParetoCurve:
        return exec_point.plan.preload

    @property
    def min_exec_memory(self) -> float:
        return self.exec_curve.smallest.memory

    @property
    def min_exec_time(self) -> float:
        return min(p.plan.exec_time for p in self.exec_curve) if self.all_exec_times is None else min(self.all_exec_times)

    @property
    def min_preload_memory(self) -> float:
        return min(p.plan.preload.smallest.memory for p in self.exec_curve)


@dataclass(frozen=True)
class CurveSet:
    ops: tuple[OpCurves, ...]
    capacity: float
    link_bandwidth: float | None = None  # None disables contention terms

    def __getitem__(self, op_id: int) -> OpCurves:
        return self.ops[op_id - 1]

    def __len__(self):
        return len(self.ops)


def own_preload(exec_point: ParetoPoint) -> ParetoPoint:
    """Preload point an operator uses when nothing else competes for its space."""
    opt = exec_point.plan
    k = getattr(opt, "own_preload", -1)
    return opt.preload.smallest if k < 0 else opt.preload[k]


def _op_curves(space: OpSpace, cm: CostModelConfig, c: ChipConfig) -> ParetoCurve:
    points = []
    for plan in enumerate_partition_plans(space, c):
        geo = PlanGeometry(space, plan.slice_factors)
        b = exec_breakdown(geo, cm, c)
        t = b.total + interchip_time(space, c)
        roof = space.hbm_bytes / c.hbm.total_bandwidth
        pre_pts = []
        for k, ps in enumerate(enumerate_preload_plans(plan, space)):
            opt = PreloadOption(ps.chunk_factor, dist_time(ps, cm, c), estimate_preload_time(ps, cm, c),
                                ps.inbound_bytes_per_core, ps.dist_bytes_per_core, ps)
            # ranked by distribution time plus any delivery lag behind the HBM roofline
            cost = opt.dist_time + max(0.0, opt.preload_time - roof)
            pre_pts.append(ParetoPoint(ps.preload_space_per_core, cost, opt, k))
        pre_curve = pareto_frontier(pre_pts)
        inbound = geo.gather_bytes + geo.reduction_bytes
        own = min(range(len(pre_curve)), key=lambda k: (pre_curve[k].time, k))
        opt = ExecOption(plan.slice_factors, t, pre_curve, inbound, inbound,
                         PartitionPlan(plan.op_id, plan.slice_factors, plan.tile_dims, plan.num_tiles,
                                       plan.exec_space_per_core, t, plan.plan_id), own)
        # plans are ranked by execution plus the cheapest way to bring their own weights in
        points.append(ParetoPoint(plan.exec_space_per_core, t + pre_curve[own].time, opt, plan.plan_id))
    return pareto_frontier(points), tuple(p.plan.exec_time for p in points)


def build_curves(g: ModelGraph, cm: CostModelConfig, c: ChipConfig) -> CurveSet:
    """Curves for every operator; structurally identical operators share one curve."""
    cache: dict = {}
    ops = []
    for op in g.operators:
        key = (op.signature(), tuple(t.is_hbm for t in op.inputs), op.flops, op.output.dims)
        if key not in cache:
            space = iteration_space(op, c.num_chips)
            cache[key] = (*_op_curves(space, cm, c), space)
        curve, times, space = cache[key]
        ops.append(OpCurves(op.id, curve, key, space, times))
    return CurveSet(tuple(ops), float(c.capacity), c.link_bandwidth)


def simple_curves(specs, capacity: float) -> CurveSet:
    """Abstract curves for tests and examples.

    ``specs`` holds one ``(exec_points, preload_points)`` pair per operator;
    exec points are ``(memory, time)`` and preload points are
    ``(memory, dist_time, preload_time)``.  Every exec point shares the same
    preload curve.  Contention terms are disabled.
    """
    ops = []
    for i, (ex, pre) in enumerate(specs, start=1):
        pre_curve = pareto_frontier(
            ParetoPoint(m, d, PreloadOption(k + 1, d, t), k) for k, (m, d, t) in enumerate(pre))
        ex_curve = pareto_frontier(
            ParetoPoint(m, t, ExecOption((k,), t, pre_curve), k) for k, (m, t) in enumerate(ex))
        ops.append(OpCurves(i, ex_curve, (tuple(ex), tuple(pre))))
    return CurveSet(tuple(ops), float(capacity), None)
