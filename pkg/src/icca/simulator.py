"""Tile-granularity discrete-event simulator.

Resources (HBM controllers, core ingress ports or mesh links, cores, the
inter-chip link) serve events one at a time in arrival order.  Events are
built from a plan as a dependency graph:

* preload k: each controller fetches its share in a few sequential bursts.
  All-to-all: each core receives one delivery TransferTile per burst on its
  ingress port.  Mesh: one TransferTile per (controller, core) flow per hop, plus one
  resource-free delay for the path's link latency.
  Deliveries stream behind their fetch: a delivery may start once the fetch
  has started, but cannot finish before it.
* execute i: per core, the distribution TransferTile, the gather
  TransferTile, ComputeTile, then a reduction TransferTile when the reduction
  dimension is split.  Under blocking SRAM contention compute waits for every
  core's exchange of the operator; otherwise it streams behind its own.

PreloadDone/ExecDone markers carry the host-level rules: preloads run one at a
time, preload k starts only after the execute that precedes its issue, and
execute i waits for execute i-1 and for preload i.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .cost import CostModelConfig, SramContention, exec_breakdown, latency, transfer_time
from .hw import ChipConfig, Link, mesh_links, route
from .model_ir import ModelGraph
from .plans import PartitionPlan, PlanGeometry, iteration_space, map_tiles_to_cores
from .scheduler import EndToEndPlan


class EventKind(IntEnum):
    COMPUTE_TILE = 0
    TRANSFER_TILE = 1
    HBM_FETCH = 2
    PRELOAD_DONE = 3
    EXEC_DONE = 4
    BARRIER = 5


# transfer roles, kept per event for reporting and conservation checks
ROLE_NONE, ROLE_DELIVERY, ROLE_DIST, ROLE_GATHER, ROLE_REDUCE, ROLE_INTERCHIP = range(6)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Event:
    id: int
    kind: EventKind
    resource: int
    start: float
    end: float
    payload: dict
    deps: tuple[int, ...]


@dataclass
class Trace:
    """Columnar event log plus the byte totals it must conserve."""

    kind: np.ndarray
    resource: np.ndarray
    start: np.ndarray
    end: np.ndarray
    nbytes: np.ndarray
    op: np.ndarray
    core: np.ndarray  # receiving core for final-hop transfers, else -1
    role: np.ndarray
    dep_ptr: np.ndarray
    dep_idx: np.ndarray
    dep_stream: np.ndarray
    expected_hbm: dict  # op id -> HBM bytes
    expected_recv: np.ndarray  # per core received bytes
    resource_names: list = field(default_factory=list)

    def __len__(self):
        return len(self.kind)

    def events(self) -> list[Event]:
        out = []
        for e in range(len(self.kind)):
            deps = tuple(int(d) for d in self.dep_idx[self.dep_ptr[e]:self.dep_ptr[e + 1]])
            out.append(Event(e, EventKind(int(self.kind[e])), int(self.resource[e]), float(self.start[e]),
                             float(self.end[e]),
                             {"op": int(self.op[e]), "core": int(self.core[e]), "bytes": float(self.nbytes[e]),
                              "role": int(self.role[e])}, deps))
        return out


@dataclass(frozen=True)
class Breakdown:
    preload_only: float
    execute_only: float
    overlapped: float
    interconnect_stall: float


@dataclass(frozen=True)
class SimReport:
    total_time: float
    breakdown: Breakdown
    hbm_utilization: float
    interconnect_utilization: float
    intercore_utilization: float
    preload_link_utilization: float
    achieved_flops: float  # fraction of peak
    achieved_flop_rate: float  # FLOP/s per chip
    occupancy_peak: float
    hbm_bytes: float
    num_events: int

    def as_dict(self) -> dict:
        return {
            "total_time": self.total_time,
            "preload_only": self.breakdown.preload_only,
            "execute_only": self.breakdown.execute_only,
            "overlapped": self.breakdown.overlapped,
            "interconnect_stall": self.breakdown.interconnect_stall,
            "hbm_utilization": self.hbm_utilization,
            "interconnect_utilization": self.interconnect_utilization,
            "intercore_utilization": self.intercore_utilization,
            "preload_link_utilization": self.preload_link_utilization,
            "achieved_flops": self.achieved_flops,
            "achieved_flop_rate": self.achieved_flop_rate,
            "occupancy_peak": self.occupancy_peak,
            "hbm_bytes": self.hbm_bytes,
            "num_events": self.num_events,
        }


class _Graph:
    """Event graph under construction (parallel lists for speed)."""

    def __init__(self):
        self.kind = []
        self.res = []
        self.dur = []
        self.nbytes = []
        self.op = []
        self.core = []
        self.role = []
        self.deps = []  # list of (dep, streaming)

    def add(self, kind, res, dur, deps, op, nbytes=0.0, core=-1, role=ROLE_NONE):
        self.kind.append(kind)
        self.res.append(res)
        self.dur.append(dur)
        self.deps.append(deps)
        self.op.append(op)
        self.nbytes.append(nbytes)
        self.core.append(core)
        self.role.append(role)
        return len(self.kind) - 1

    def run(self):
        n = len(self.kind)
        remaining = [len(d) for d in self.deps]
        hard = [[] for _ in range(n)]
        soft = [[] for _ in range(n)]
        for e, deps in enumerate(self.deps):
            for d, s in deps:
                (soft if s else hard)[d].append(e)
        ready = [0.0] * n
        start = [0.0] * n
        end = [0.0] * n
        free = {}
        dur = self.dur
        res = self.res
        heap = [(0.0, res[e], e) for e in range(n) if remaining[e] == 0]
        heapq.heapify(heap)
        pop, push = heapq.heappop, heapq.heappush
        done = 0
        while heap:
            r, rs, e = pop(heap)
            if rs >= 0:
                s = free.get(rs, 0.0)
                if s < r:
                    s = r
                t = s + dur[e]
                free[rs] = t
            else:
                s = r
                t = r + dur[e]
            start[e] = s
            end[e] = t
            done += 1
            for f in hard[e]:
                if ready[f] < t:
                    ready[f] = t
                remaining[f] -= 1
                if remaining[f] == 0:
                    push(heap, (ready[f], res[f], f))
            for f in soft[e]:
                # stream: start no earlier than the producer, finish no earlier
                lb = t - dur[f]
                if lb < s:
                    lb = s
                if ready[f] < lb:
                    ready[f] = lb
                remaining[f] -= 1
                if remaining[f] == 0:
                    push(heap, (ready[f], res[f], f))
        if done != n:
            raise SimulationError("dependency cycle in event graph")
        return start, end


class _Resources:
    def __init__(self, c: ChipConfig):
        self.c = c
        self.names = []
        self.ids = {}
        n = c.num_cores
        if c.is_mesh:
            for link in mesh_links(c):
                self._add(("link", link.src, link.dst))
        else:
            for core in range(n):
                self._add(("port", core))
        self.num_links = len(self.names)
        for h in range(c.hbm.num_controllers):
            self._add(("hbm", h))
        for core in range(n):
            self._add(("core", core))
        self._add(("interchip",))

    def _add(self, name):
        self.ids[name] = len(self.names)
        self.names.append(name)

    def link(self, link: Link) -> int:
        return self.ids[("link", link.src, link.dst)]

    def port(self, core: int) -> int:
        return self.ids[("port", core)]

    def hbm(self, h: int) -> int:
        return self.ids[("hbm", h)]

    def core(self, core: int) -> int:
        return self.ids[("core", core)]

    @property
    def interchip(self) -> int:
        return self.ids[("interchip",)]

    def neighbor_link(self, core: int) -> int | None:
        """Link used for one-hop peer exchange into ``core`` on a mesh."""
        c = self.c
        r, col = c.coords(core)
        rows, cols = c.topology.mesh_dims
        for dr, dc in ((0, -1), (0, 1), (-1, 0), (1, 0)):
            rr, cc = r + dr, col + dc
            if 0 <= rr < rows and 0 <= cc < cols:
                return self.link(Link(c.core_at(rr, cc), core))
        return None


@dataclass
class _OpData:
    geo: PlanGeometry
    cores: list
    exec_fp: float
    pre_fp: float
    inbound: float
    dist: float
    hbm_bytes: float
    flops: float


def _op_data(g: ModelGraph, plan: EndToEndPlan, c: ChipConfig) -> list[_OpData]:
    out = []
    cache = {}
    for s in plan.schedules:
        op = g.op(s.op_id)
        key = (op.signature(), tuple(t.is_hbm for t in op.inputs), op.flops, op.output.dims,
               s.exec_factors, s.chunk_factor)
        if key not in cache:
            space = iteration_space(op, c.num_chips)
            if len(s.exec_factors) != len(space.dims):
                raise SimulationError(f"operator {s.op_id}: plan has {len(s.exec_factors)} factors, "
                                      f"operator has {len(space.dims)} dimensions")
            geo = PlanGeometry(space, tuple(s.exec_factors))
            base = PartitionPlan(s.op_id, geo.factors)
            ps = geo.preload_plan(base, s.chunk_factor)
            cache[key] = _OpData(geo, map_tiles_to_cores(base, c), geo.exec_footprint, ps.preload_space_per_core,
                                 ps.inbound_bytes_per_core, ps.dist_bytes_per_core, space.hbm_bytes, space.flops)
        out.append(cache[key])
    return out


def build_events(plan: EndToEndPlan, g: ModelGraph, c: ChipConfig, cm: CostModelConfig, pieces=4):
    n = len(plan.schedules)
    if n != g.num_operators:
        raise SimulationError("plan and model disagree on operator count")
    data = _op_data(g, plan, c)
    R = _Resources(c)
    G = _Graph()
    lat = latency(cm, c)
    nc = c.hbm.num_controllers
    ctrl_bw = c.hbm.total_bandwidth / nc
    bw = c.link_bandwidth
    blocking = cm.sram_contention is SramContention.BLOCKING
    counts = plan.counts
    order = plan.preload_order
    expected_recv = np.zeros(c.num_cores)
    mesh_paths = {}

    def xfer(nbytes):
        return transfer_time(nbytes, cm, c)

    # gate[k]: the execute whose return precedes the issue of preload k (0 = none)
    gate = [0] * n
    i = 0
    for k in range(n):
        while i < n and counts[i] <= k:
            i += 1
        gate[k] = i  # ops 1..i have counts <= k, so execute(i) is issued before preload k
    pre_done = [None] * n  # by position
    exec_done = [None] * (n + 1)
    pos = {op: k for k, op in enumerate(order)}

    def emit_preload(k):
        op = order[k]
        d = data[op - 1]
        deps = []
        if k > 0:
            deps.append((pre_done[k - 1], False))
        if gate[k] > 0:
            deps.append((exec_done[gate[k]], False))
        finals = []
        if d.hbm_bytes > 0:
            # every controller reads its share in `pieces` sequential bursts; delivery
            # piece j streams behind burst j so ports and controllers pipeline
            share = d.hbm_bytes / nc / pieces
            bursts = []
            for h in range(nc):
                prev = list(deps)
                row = []
                for j in range(pieces):
                    e = G.add(EventKind.HBM_FETCH, R.hbm(h), share / ctrl_bw, prev, op, share)
                    row.append(e)
                    prev = [(e, False)]
                bursts.append(row)
            finals += [row[-1] for row in bursts]
            if c.is_mesh:
                per_flow = d.inbound / nc
                for core in d.cores:
                    expected_recv[core] += d.inbound
                    for h in range(nc):
                        ctrl = c.num_cores + h
                        key = (h, core)
                        path = mesh_paths.get(key)
                        if path is None:
                            path = [] if c.controller_attach(ctrl) == core else [R.link(l) for l in route(c, ctrl, core)]
                            mesh_paths[key] = path
                        prev = bursts[h][-1]
                        if not path:
                            # the core shares the controller's router; bytes land with the fetch
                            finals.append(G.add(EventKind.TRANSFER_TILE, -1, 0.0, [(prev, True)], op, per_flow,
                                                core, ROLE_DELIVERY))
                            continue
                        # links are held for the serialization time only; propagation
                        # latency is one resource-free delay per flow
                        hop_t = per_flow / bw
                        for j, lid in enumerate(path):
                            last = j == len(path) - 1
                            prev = G.add(EventKind.TRANSFER_TILE, lid, hop_t, [(prev, True)], op, per_flow,
                                         core if last else -1, ROLE_DELIVERY)
                        if lat > 0:
                            prev = G.add(EventKind.TRANSFER_TILE, -1, len(path) * lat, [(prev, False)], op, 0.0,
                                         -1, ROLE_DELIVERY)
                        finals.append(prev)
            else:
                per_piece = d.inbound / pieces
                # link latency is paid once per delivery, not once per piece
                t = xfer(d.inbound) / pieces
                for core in d.cores:
                    expected_recv[core] += d.inbound
                    port = R.port(core)
                    for j in range(pieces):
                        finals.append(G.add(EventKind.TRANSFER_TILE, port, t, [(row[j], True) for row in bursts],
                                            op, per_piece, core, ROLE_DELIVERY))
        pre_done[k] = G.add(EventKind.PRELOAD_DONE, -1, 0.0, [(f, False) for f in finals] or deps, op)

    def emit_exec(i):
        d = data[i - 1]
        geo = d.geo
        gate_deps = [(pre_done[pos[i]], False)]
        if i > 1:
            gate_deps.append((exec_done[i - 1], False))
        gather = geo.gather_bytes
        red = geo.reduction_bytes
        comp_t = exec_breakdown(geo, cm, c).compute
        exch = {}
        for core in d.cores:
            port = R.port(core) if not c.is_mesh else R.neighbor_link(core)
            chain = []
            prev = gate_deps
            for nbytes, role in ((d.dist, ROLE_DIST), (gather, ROLE_GATHER)):
                if nbytes > 0 and port is not None:
                    e = G.add(EventKind.TRANSFER_TILE, port, xfer(nbytes), list(prev), i, nbytes, core, role)
                    expected_recv[core] += nbytes
                    chain.append(e)
                    prev = [(e, False)]
            exch[core] = chain
        if blocking:
            all_x = [(e, False) for ch in exch.values() for e in ch]
            barrier = G.add(EventKind.BARRIER, -1, 0.0, all_x or gate_deps, i) if all_x else None
        tails = []
        for core in d.cores:
            if blocking:
                deps = [(barrier, False)] if barrier is not None else list(gate_deps)
            else:
                deps = [(e, True) for e in exch[core][-1:]] + list(gate_deps)
            e = G.add(EventKind.COMPUTE_TILE, R.core(core), comp_t, deps, i, geo.flops_per_tile, core)
            if red > 0:
                port = R.port(core) if not c.is_mesh else R.neighbor_link(core)
                if port is not None:
                    e = G.add(EventKind.TRANSFER_TILE, port, xfer(red), [(e, False)], i, red, core, ROLE_REDUCE)
                    expected_recv[core] += red
            tails.append((e, False))
        if c.num_chips > 1:
            t = geo.space.activation_bytes / c.inter_chip_bandwidth
            tails = [(G.add(EventKind.TRANSFER_TILE, R.interchip, t, tails, i, geo.space.activation_bytes,
                            -1, ROLE_INTERCHIP), False)]
        exec_done[i] = G.add(EventKind.EXEC_DONE, -1, 0.0, tails, i)

    # emit in program order so every dependency already exists
    issued = 0
    for i in range(1, n + 1):
        while issued < counts[i - 1]:
            emit_preload(issued)
            issued += 1
        emit_exec(i)
    expected_hbm = {s.op_id: data[s.op_id - 1].hbm_bytes for s in plan.schedules}
    return G, R, data, expected_hbm, expected_recv, gate


def _union(starts, ends):
    if len(starts) == 0:
        return np.empty(0), np.empty(0)
    o = np.argsort(starts, kind="stable")
    s, e = starts[o], ends[o]
    run_end = np.maximum.accumulate(e)
    new = np.ones(len(s), bool)
    new[1:] = s[1:] > run_end[:-1]
    idx = np.flatnonzero(new)
    us = s[idx]
    ue = np.maximum.reduceat(e, idx) if len(idx) else np.empty(0)
    # a merged run ends at the running max, not just the max inside the run
    ue = run_end[np.append(idx[1:] - 1, len(s) - 1)]
    return us, ue


def _measure(s, e):
    return float(np.sum(e - s)) if len(s) else 0.0


def _intersect(a, b):
    (as_, ae), (bs, be) = a, b
    i = j = 0
    tot = 0.0
    while i < len(as_) and j < len(bs):
        lo = max(as_[i], bs[j])
        hi = min(ae[i], be[j])
        if hi > lo:
            tot += hi - lo
        if ae[i] < be[j]:
            i += 1
        else:
            j += 1
    return tot


@dataclass
class SimResult:
    report: SimReport
    trace: Trace
    occupancy: list  # (time, bytes)


def simulate_full(plan: EndToEndPlan, g: ModelGraph, c: ChipConfig, cm: CostModelConfig) -> SimResult:
    if not plan.schedules:
        empty = np.empty(0)
        tr = Trace(empty.astype(np.int8), empty.astype(np.int32), empty, empty, empty, empty.astype(np.int32),
                   empty.astype(np.int32), empty.astype(np.int8), np.zeros(1, np.int64), empty.astype(np.int64),
                   empty.astype(bool), {}, np.zeros(c.num_cores))
        rep = SimReport(0.0, Breakdown(0.0, 0.0, 0.0, 0.0), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0)
        return SimResult(rep, tr, [(0.0, 0.0)])
    G, R, data, expected_hbm, expected_recv, gate = build_events(plan, g, c, cm)
    start, end = G.run()
    start = np.asarray(start)
    end = np.asarray(end)
    kind = np.asarray(G.kind, np.int8)
    res = np.asarray(G.res, np.int32)
    role = np.asarray(G.role, np.int8)
    nb = np.asarray(G.nbytes)
    ptr = np.zeros(len(G.deps) + 1, np.int64)
    ptr[1:] = np.cumsum([len(d) for d in G.deps])
    flat = [x for d in G.deps for x in d]
    dep_idx = np.asarray([d for d, _ in flat], np.int64)
    dep_stream = np.asarray([s for _, s in flat], bool)
    trace = Trace(kind, res, start, end, nb, np.asarray(G.op, np.int32), np.asarray(G.core, np.int32), role,
                  ptr, dep_idx, dep_stream, expected_hbm, expected_recv, R.names)

    total = float(end.max()) if len(end) else 0.0
    n = len(plan.schedules)

    # SRAM occupancy replay, reserved at issue
    exec_done_t = {}
    exec_start_t = {}
    for e in np.flatnonzero(kind == EventKind.EXEC_DONE):
        exec_done_t[int(G.op[e])] = float(end[e])
    is_exec_work = (kind == EventKind.COMPUTE_TILE) | ((kind == EventKind.TRANSFER_TILE) &
                                                      (role != ROLE_DELIVERY))
    ops_arr = np.asarray(G.op)
    for e in np.flatnonzero(is_exec_work | (kind == EventKind.EXEC_DONE)):
        op = int(ops_arr[e])
        exec_start_t[op] = min(exec_start_t.get(op, math.inf), float(start[e]))
    changes = []
    for k, op in enumerate(plan.preload_order):
        issue = exec_done_t[gate[k]] if gate[k] > 0 else 0.0
        changes.append((issue, 1, data[op - 1].pre_fp))
    for i in range(1, n + 1):
        d = data[i - 1]
        changes.append((exec_start_t[i], 1, d.exec_fp - d.pre_fp))
        changes.append((exec_done_t[i], 0, -d.exec_fp))
    changes.sort(key=lambda x: (x[0], x[1]))
    occ = 0.0
    peak = 0.0
    profile = [(0.0, 0.0)]
    cap = c.capacity
    for t, _, delta in changes:
        occ += delta
        profile.append((t, occ))
        if occ > peak:
            peak = occ
        if occ > cap * (1 + 1e-9):
            raise SimulationError(f"SRAM overflow during replay at t={t:.9g}s: {occ:.0f} > {cap} bytes")

    # breakdown
    fetch = kind == EventKind.HBM_FETCH
    execm = is_exec_work & (role != ROLE_INTERCHIP) | (role == ROLE_INTERCHIP)
    a = _union(start[fetch], end[fetch])
    b = _union(start[execm], end[execm])
    la, lb = _measure(*a), _measure(*b)
    ov = _intersect(a, b)
    u = _union(np.concatenate([a[0], b[0]]), np.concatenate([a[1], b[1]]))
    lu = _measure(*u)
    brk = Breakdown(float(la - ov), float(lb - ov), float(ov), float(max(0.0, total - lu)))

    busy = end - start
    on_link = (res >= 0) & (res < R.num_links) & (kind == EventKind.TRANSFER_TILE)
    denom = max(total, 1e-300)
    link_busy = float(busy[on_link].sum())
    pre_busy = float(busy[on_link & (role == ROLE_DELIVERY)].sum())
    hbm_busy = float(busy[fetch].sum())
    flops = sum(d.flops for d in data)
    peak_rate = c.num_cores * c.flop_rate(True)
    report = SimReport(
        total_time=total,
        breakdown=brk,
        hbm_utilization=min(1.0, hbm_busy / (c.hbm.num_controllers * denom)),
        interconnect_utilization=min(1.0, link_busy / (R.num_links * denom)),
        intercore_utilization=min(1.0, (link_busy - pre_busy) / (R.num_links * denom)),
        preload_link_utilization=min(1.0, pre_busy / (R.num_links * denom)),
        achieved_flops=flops / (peak_rate * denom),
        achieved_flop_rate=flops / denom,
        occupancy_peak=peak,
        hbm_bytes=float(nb[fetch].sum()),
        num_events=len(kind),
    )
    return SimResult(report, trace, profile)


def simulate(plan: EndToEndPlan, g: ModelGraph, c: ChipConfig, cm: CostModelConfig) -> SimReport:
    return simulate_full(plan, g, c, cm).report


# ---------------------------------------------------------------------------
# trace validation


@dataclass(frozen=True)
class Violation:
    kind: str  # causality | overlap | conservation
    events: tuple[int, ...]
    message: str


def validate_trace(trace: Trace, rel_tol=1e-9):
    """Return None when the trace is consistent, else the first Violation found."""
    n = len(trace)
    if n == 0:
        return None
    scale = float(np.max(np.abs(trace.end))) or 1.0  # tolerance relative to the trace span
    eps = rel_tol * scale
    bad = np.flatnonzero(trace.end < trace.start - eps)
    if len(bad):
        e = int(bad[0])
        return Violation("causality", (e,), f"event {e} ends before it starts")
    # dependencies
    if len(trace.dep_idx):
        owner = np.repeat(np.arange(n), np.diff(trace.dep_ptr))
        dep = trace.dep_idx
        hard = ~trace.dep_stream
        ok_hard = trace.start[owner] >= trace.end[dep] - eps
        ok_soft = (trace.start[owner] >= trace.start[dep] - eps) & (trace.end[owner] >= trace.end[dep] - eps)
        ok = np.where(hard, ok_hard, ok_soft)
        if not ok.all():
            j = int(np.flatnonzero(~ok)[0])
            return Violation("causality", (int(dep[j]), int(owner[j])),
                             f"event {int(owner[j])} starts before its dependency {int(dep[j])} allows")
    # one event at a time per resource
    real = np.flatnonzero(trace.resource >= 0)
    if len(real):
        o = real[np.lexsort((trace.start[real], trace.resource[real]))]
        same = trace.resource[o[1:]] == trace.resource[o[:-1]]
        clash = same & (trace.start[o[1:]] < trace.end[o[:-1]] - eps)
        if clash.any():
            j = int(np.flatnonzero(clash)[0])
            a, b = int(o[j]), int(o[j + 1])
            return Violation("overlap", (a, b), f"events {a} and {b} overlap on resource {int(trace.resource[a])}")
    # conservation
    fetch = trace.kind == EventKind.HBM_FETCH
    for op, want in sorted(trace.expected_hbm.items()):
        got = float(trace.nbytes[fetch & (trace.op == op)].sum())
        if abs(got - want) > 1e-6 * max(1.0, want):
            return Violation("conservation", (), f"operator {op}: HBM delivered {got:.0f} of {want:.0f} bytes")
    recv = np.zeros(len(trace.expected_recv))
    final = (trace.kind == EventKind.TRANSFER_TILE) & (trace.core >= 0)
    np.add.at(recv, trace.core[final], trace.nbytes[final])
    diff = np.abs(recv - trace.expected_recv) > 1e-6 * np.maximum(1.0, trace.expected_recv)
    if diff.any():
        core = int(np.flatnonzero(diff)[0])
        return Violation("conservation", (),
                         f"core {core}: received {recv[core]:.0f} of {trace.expected_recv[core]:.0f} bytes")
    return None


def trace_to_rows(trace: Trace):
    names = {EventKind.COMPUTE_TILE: "ComputeTile", EventKind.TRANSFER_TILE: "TransferTile",
             EventKind.HBM_FETCH: "HbmFetch", EventKind.PRELOAD_DONE: "PreloadDone",
             EventKind.EXEC_DONE: "ExecDone", EventKind.BARRIER: "Barrier"}
    for e in range(len(trace)):
        yield (e, names[EventKind(int(trace.kind[e]))], int(trace.resource[e]), repr(float(trace.start[e])),
               repr(float(trace.end[e])), int(trace.op[e]), int(trace.core[e]), repr(float(trace.nbytes[e])))
