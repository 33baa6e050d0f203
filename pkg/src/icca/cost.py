"""Execution, transfer, preload and contention time estimates.

Analytic mode uses the chip's rates directly.  Calibrated mode replaces the
per-tile compute time and the inter-core transfer time with piecewise-linear
fits learned from a profile CSV; the HBM term stays analytic.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .hw import ChipConfig, Link, route
from .plans import OpSpace, PartitionPlan, PlanGeometry, PreloadStatePlan, map_tiles_to_cores


class CostMode(str, Enum):
    ANALYTIC = "analytic"
    CALIBRATED = "calibrated"


class SramContention(str, Enum):
    # blocking: a core serving peers cannot compute, so exchange and compute serialize
    BLOCKING = "blocking"
    # free: exchange streams underneath compute
    FREE = "free"


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class PiecewiseLinear:
    """y = slope[s] * x + intercept[s] on segment s; segments split at ``breaks``.

    Segment s covers ``breaks[s-1] < x <= breaks[s]``; the outer segments extend
    to infinity, so the model covers the whole axis.
    """

    breaks: tuple[float, ...]
    slopes: tuple[float, ...]
    intercepts: tuple[float, ...]

    def segment(self, x: float) -> int:
        for s, b in enumerate(self.breaks):
            if x <= b:
                return s
        return len(self.breaks)

    def __call__(self, x: float) -> float:
        s = self.segment(x)
        return max(0.0, self.slopes[s] * x + self.intercepts[s])


@dataclass(frozen=True)
class CostModelConfig:
    mode: CostMode = CostMode.ANALYTIC
    sram_contention: SramContention = SramContention.BLOCKING
    # per-op-type FLOP/s overrides; missing types use the chip's matmul/other rates
    op_rates: dict = field(default_factory=dict)
    sram_read_bandwidth: float = math.inf  # bytes/s per core; inf disables the term
    transfer_latency: float | None = None  # None uses the topology's link latency
    compute_models: dict = field(default_factory=dict)  # op_type -> PiecewiseLinear(flops per tile)
    link_models: dict = field(default_factory=dict)  # link kind -> PiecewiseLinear(bytes)

    def __post_init__(self):
        for k, v in self.op_rates.items():
            if v <= 0:
                raise ValueError(f"op_rates[{k}] must be positive")
        if self.sram_read_bandwidth <= 0:
            raise ValueError("sram_read_bandwidth must be positive")


@dataclass(frozen=True)
class CostEstimate:
    exec_time: float
    transfer_time: float
    dist_time: float
    preload_time: float

    def __post_init__(self):
        if min(self.exec_time, self.transfer_time, self.dist_time, self.preload_time) < 0:
            raise ValueError("cost estimates must be non-negative")


# ---------------------------------------------------------------------------
# primitive terms


def latency(cm: CostModelConfig, c: ChipConfig) -> float:
    return c.topology.link_latency if cm.transfer_latency is None else cm.transfer_latency


def transfer_time(nbytes: float, cm: CostModelConfig, c: ChipConfig) -> float:
    """One peer transfer of ``nbytes`` into a core over its link."""
    if nbytes <= 0:
        return 0.0
    model = cm.link_models.get("intercore") if cm.mode is CostMode.CALIBRATED else None
    if model is not None:
        return model(nbytes)
    return nbytes / c.link_bandwidth + latency(cm, c)


def compute_time(space: OpSpace, flops_per_tile: float, cm: CostModelConfig, c: ChipConfig) -> float:
    if cm.mode is CostMode.CALIBRATED and space.op_type.value in cm.compute_models:
        return cm.compute_models[space.op_type.value](flops_per_tile)
    rate = cm.op_rates.get(space.op_type.value) or c.flop_rate(space.op_type.is_matmul)
    return flops_per_tile / rate


def interchip_time(space: OpSpace, c: ChipConfig) -> float:
    """Flat per-operator cost of exchanging activations between chips."""
    if c.num_chips <= 1:
        return 0.0
    return space.activation_bytes / c.inter_chip_bandwidth


@dataclass(frozen=True)
class ExecBreakdown:
    compute: float
    exchange: float  # gather of intermediate inputs
    reduction: float
    sram_read: float
    total: float


def exec_breakdown(geo: PlanGeometry, cm: CostModelConfig, c: ChipConfig) -> ExecBreakdown:
    comp = compute_time(geo.space, geo.flops_per_tile, cm, c)
    sram = geo.exec_footprint / cm.sram_read_bandwidth if math.isfinite(cm.sram_read_bandwidth) else 0.0
    comp = max(comp, sram)
    xfer = transfer_time(geo.gather_bytes, cm, c)
    red = transfer_time(geo.reduction_bytes, cm, c)
    if cm.sram_contention is SramContention.BLOCKING:
        total = xfer + comp + red
    else:
        total = max(xfer, comp) + red
    return ExecBreakdown(comp, xfer, red, sram, total)


def estimate_execution_time(plan: PartitionPlan, cm: CostModelConfig, c: ChipConfig, space: OpSpace) -> float:
    """Per-core compute plus the execute-phase exchange, for the slowest (largest) tile."""
    return exec_breakdown(PlanGeometry(space, plan.slice_factors), cm, c).total


def dist_time(ps: PreloadStatePlan, cm: CostModelConfig, c: ChipConfig) -> float:
    return transfer_time(ps.dist_bytes_per_core, cm, c)


# ---------------------------------------------------------------------------
# preload delivery


_FLOW_CACHE: dict = {}


def delivery_flows(c: ChipConfig, cores: tuple[int, ...]):
    """Per-link flow counts when every controller sends an equal share to each core.

    Returns (max flows on any link, max hop count).  All-to-all: each core's
    ingress port carries one aggregate flow.
    """
    if not c.is_mesh:
        return 1, 1
    key = (c.topology, c.hbm.num_controllers, cores)
    hit = _FLOW_CACHE.get(key)
    if hit is not None:
        return hit
    counts: dict[Link, int] = {}
    hops = 0
    for h in range(c.hbm.num_controllers):
        ctrl = c.num_cores + h
        for core in cores:
            path = route(c, ctrl, core) if c.controller_attach(ctrl) != core else []
            hops = max(hops, len(path))
            for link in path:
                counts[link] = counts.get(link, 0) + 1
    res = (max(counts.values()) if counts else 0, hops)
    _FLOW_CACHE[key] = res
    return res


def estimate_preload_time(ps: PreloadStatePlan, cm: CostModelConfig, c: ChipConfig) -> float:
    """max(HBM roofline term, interconnect delivery term)."""
    if ps.hbm_bytes <= 0:
        return 0.0
    hbm = ps.hbm_bytes / c.hbm.total_bandwidth
    inbound = ps.inbound_bytes_per_core
    if not c.is_mesh:
        link = transfer_time(inbound, cm, c)
    else:
        cores = tuple(map_tiles_to_cores(ps.base, c))
        flows, hops = delivery_flows(c, cores)
        per_flow = inbound / c.hbm.num_controllers
        link = flows * per_flow / c.link_bandwidth + hops * latency(cm, c) if flows else 0.0
    return max(hbm, link)


def estimate_contention_overhead(traffic: dict, c: ChipConfig) -> dict:
    """Per-link serialization overhead: total bytes minus the largest single flow, over bandwidth."""
    out = {}
    for link, flows in traffic.items():
        flows = [f for f in flows if f > 0]
        out[link] = (sum(flows) - max(flows)) / c.link_bandwidth if flows else 0.0
    return out


def estimate(plan: PartitionPlan, ps: PreloadStatePlan, cm: CostModelConfig, c: ChipConfig,
             space: OpSpace) -> CostEstimate:
    b = exec_breakdown(PlanGeometry(space, plan.slice_factors), cm, c)
    return CostEstimate(b.total + interchip_time(space, c), b.exchange + b.reduction,
                        dist_time(ps, cm, c), estimate_preload_time(ps, cm, c))


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class ProfileSample:
    kind: str  # "compute" or "link"
    key: str  # op type or link kind
    features: tuple[float, ...]
    seconds: float

    @property
    def x(self) -> float:
        # compute samples carry tile dims; their product is the work volume
        return float(np.prod(self.features))


def read_profile(path: str | Path) -> list[ProfileSample]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        feats = sorted((k for k in reader.fieldnames or [] if k.startswith("feature_")),
                       key=lambda k: int(k.split("_")[1]))
        for n, rec in enumerate(reader, start=2):
            try:
                values = tuple(float(rec[k]) for k in feats if rec.get(k) not in (None, ""))
                rows.append(ProfileSample(rec["kind"].strip(), rec["op_type_or_link"].strip(), values,
                                          float(rec["measured_seconds"])))
            except (KeyError, ValueError) as exc:
                raise CalibrationError(f"{path}:{n}: bad profile row ({exc})") from None
    return rows


def _lstsq(x, y):
    if np.ptp(x) == 0:
        return 0.0, float(np.mean(y))
    a = np.vstack([x, np.ones_like(x)]).T
    (m, b), *_ = np.linalg.lstsq(a, y, rcond=None)
    return float(m), float(b)


def _sse(x, y, m, b):
    r = y - (m * x + b)
    return float(r @ r)


def fit_piecewise(x, y, max_segments=2, monotone=False, min_points=2) -> PiecewiseLinear:
    """Least-squares piecewise-linear fit with an exhaustive breakpoint search."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    order = np.argsort(x, kind="stable")
    x, y = x[order], y[order]

    def line(xs, ys):
        m, b = _lstsq(xs, ys)
        if monotone and m < 0:
            m, b = 0.0, float(np.mean(ys))
        return m, b

    m, b = line(x, y)
    best = (_sse(x, y, m, b), PiecewiseLinear((), (m,), (b,)))
    if max_segments >= 2:
        scale = float(y @ y) or 1.0
        for i in range(min_points, len(x) - min_points + 1):
            if x[i - 1] == x[i]:
                continue
            m1, b1 = line(x[:i], y[:i])
            m2, b2 = line(x[i:], y[i:])
            if monotone and m2 * x[i] + b2 < m1 * x[i - 1] + b1 - 1e-12 * abs(b1):
                continue
            err = _sse(x[:i], y[:i], m1, b1) + _sse(x[i:], y[i:], m2, b2)
            # a split must buy a real improvement, not float noise
            if err < best[0] - 1e-12 * scale:
                best = (err, PiecewiseLinear((float(x[i - 1]),), (m1, m2), (b1, b2)))
    return best[1]


def fit_calibrated(profile: list[ProfileSample], base: CostModelConfig | None = None) -> CostModelConfig:
    groups: dict[tuple[str, str], list[ProfileSample]] = {}
    for s in profile:
        if s.kind not in ("compute", "link"):
            raise CalibrationError(f"unknown sample kind {s.kind!r}")
        groups.setdefault((s.kind, s.key), []).append(s)
    if not groups:
        raise CalibrationError("empty profile")
    compute, links = {}, {}
    for (kind, key), samples in sorted(groups.items()):
        if len(samples) < 2:
            raise CalibrationError(f"{kind}/{key}: need at least 2 samples, got {len(samples)}")
        xs = [s.x for s in samples]
        ys = [s.seconds for s in samples]
        model = fit_piecewise(xs, ys, monotone=(kind == "link"))
        (links if kind == "link" else compute)[key] = model
    base = base or CostModelConfig()
    return CostModelConfig(CostMode.CALIBRATED, base.sram_contention, dict(base.op_rates),
                           base.sram_read_bandwidth, base.transfer_latency, compute, links)
