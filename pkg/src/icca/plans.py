"""Partition plans, tile-to-core mapping and preload-state variants.

Every operator is viewed as an iteration space of named dimensions.  A plan
slices each partitionable dimension by an integer factor (ceiling tiling), and
each tensor occupies the sub-space of the dimensions it indexes:

=============  ==================  ===========================================
op type        dimensions          tensors
=============  ==================  ===========================================
MatMul         M, N, K (K reduce)  A[M,K]  B[K,N]  out[M,N]
BatchMatMul    Bt, M, N, K         A[Bt,M,K]  B[Bt,K,N]  out[Bt,M,N]
Softmax, LN    R, C (C whole)      x[R,C]  gamma[C]  out[R,C]
Reduce         R, C (C reduce)     x[R,C]  out[R]
Elementwise    L                   inputs sized k*|L| split with L, rest whole
Other          L                   as Elementwise
=============  ==================  ===========================================

A tensor is replicated across the tiles that differ only in dimensions it does
not index; those tiles form its sharing group.  With ``num_chips > 1`` the
largest non-reduction dimension is first split across chips and plans describe
one chip's share.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

from .hw import ChipConfig
from .model_ir import OperatorSpec, OpType


class NoFeasiblePlan(ValueError):
    """The operator does not fit on the chip even at maximum slicing."""


@dataclass(frozen=True)
class IterDim:
    name: str
    size: int
    partitionable: bool = True
    reduction: bool = False


@dataclass(frozen=True)
class TensorUse:
    name: str
    nbytes: float
    dims: frozenset  # indices into OpSpace.dims
    is_hbm: bool
    is_output: bool = False


@dataclass(frozen=True)
class OpSpace:
    op_id: int
    op_type: OpType
    dims: tuple[IterDim, ...]
    tensors: tuple[TensorUse, ...]
    flops: float
    chip_share: float = 1.0  # fraction of the operator one chip handles
    activation_bytes: float = 0.0  # full output size, exchanged between chips

    @property
    def inputs(self):
        return [t for t in self.tensors if not t.is_output]

    @property
    def output(self) -> TensorUse:
        return next(t for t in self.tensors if t.is_output)

    @property
    def hbm_bytes(self) -> float:
        return sum(t.nbytes for t in self.tensors if t.is_hbm)


def _uses(op: OperatorSpec, dims, in_dims, out_dims):
    uses = [TensorUse(t.name, float(t.nbytes), frozenset(d), t.is_hbm) for t, d in zip(op.inputs, in_dims)]
    uses.append(TensorUse(op.output.name, float(op.output.nbytes), frozenset(out_dims), False, True))
    return tuple(uses)


def iteration_space(op: OperatorSpec, num_chips: int = 1) -> OpSpace:
    t = op.op_type
    out = op.output
    if t is OpType.MATMUL:
        a, b = op.inputs[0], op.inputs[1]
        k, n = (b.dims[-2] if len(b.dims) >= 2 else 1), b.dims[-1]
        m = max(1, out.numel // n)
        dims = (IterDim("M", m), IterDim("N", n), IterDim("K", k, reduction=True))
        in_dims = [(0, 2), (2, 1)] + [(1,) if x.numel == n else () for x in op.inputs[2:]]
        space = OpSpace(op.id, t, dims, _uses(op, dims, in_dims, (0, 1)), op.flops)
    elif t is OpType.BATCH_MATMUL:
        b = op.inputs[1]
        k, n = b.dims[-2], b.dims[-1]
        bt = math.prod(b.dims[:-2]) or 1
        m = max(1, out.numel // (bt * n))
        dims = (IterDim("Bt", bt), IterDim("M", m), IterDim("N", n), IterDim("K", k, reduction=True))
        in_dims = [(0, 1, 3), (0, 3, 2)] + [() for _ in op.inputs[2:]]
        space = OpSpace(op.id, t, dims, _uses(op, dims, in_dims, (0, 1, 2)), op.flops)
    elif t in (OpType.SOFTMAX, OpType.LAYERNORM):
        c = out.dims[-1]
        r = max(1, out.numel // c)
        dims = (IterDim("R", r), IterDim("C", c, partitionable=False))
        in_dims = [(0, 1) if x.numel == out.numel else (1,) if x.numel == c else () for x in op.inputs]
        space = OpSpace(op.id, t, dims, _uses(op, dims, in_dims, (0, 1)), op.flops)
    elif t is OpType.REDUCE:
        big = max(op.inputs, key=lambda x: x.numel)
        r = out.numel
        c = max(1, big.numel // r)
        dims = (IterDim("R", r), IterDim("C", c, reduction=True))
        in_dims = [(0, 1) if x is big else () for x in op.inputs]
        space = OpSpace(op.id, t, dims, _uses(op, dims, in_dims, (0,)), op.flops)
    else:
        n = out.numel
        dims = (IterDim("L", n),)
        # inputs that are whole multiples of the output (e.g. fused gate/up halves) split with it
        in_dims = [(0,) if x.numel % n == 0 else () for x in op.inputs]
        space = OpSpace(op.id, t, dims, _uses(op, dims, in_dims, (0,)), op.flops)
    space = replace(space, activation_bytes=float(out.nbytes))
    if num_chips > 1:
        space = shard_across_chips(space, num_chips)
    return space


def shard_across_chips(space: OpSpace, num_chips: int) -> OpSpace:
    """Model parallelism: split the largest non-reduction dimension across chips."""
    cands = [i for i, d in enumerate(space.dims) if d.partitionable and not d.reduction and d.size > 1]
    if not cands:
        return space
    i = max(cands, key=lambda j: (space.dims[j].size, -j))
    d = space.dims[i]
    size = math.ceil(d.size / num_chips)
    ratio = size / d.size
    dims = tuple(replace(x, size=size) if j == i else x for j, x in enumerate(space.dims))
    tensors = tuple(replace(tu, nbytes=tu.nbytes * ratio) if i in tu.dims else tu for tu in space.tensors)
    return replace(space, dims=dims, tensors=tensors, flops=space.flops * ratio, chip_share=ratio)


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class PartitionPlan:
    op_id: int
    slice_factors: tuple[int, ...]
    tile_dims: tuple[int, ...] = ()
    num_tiles: int = 0
    exec_space_per_core: float = 0.0
    est_exec_time: float | None = None
    plan_id: int = 0

    def __post_init__(self):
        if any(f < 1 for f in self.slice_factors):
            raise ValueError("slice factors must be positive")
        if not self.num_tiles:
            object.__setattr__(self, "num_tiles", math.prod(self.slice_factors))

    @property
    def label(self) -> str:
        return "<" + ",".join(str(f) for f in self.slice_factors) + ">"


@dataclass(frozen=True)
class PreloadStatePlan:
    base: PartitionPlan
    chunk_factor: int
    preload_space_per_core: float
    dist_bytes_per_core: float
    inbound_bytes_per_core: float  # bytes each core receives from HBM
    hbm_bytes: float  # distinct bytes read from HBM (replication happens in the network)


@dataclass
class PlanGeometry:
    """Derived per-tile quantities for one plan; shared by cost model and simulator."""

    space: OpSpace
    factors: tuple[int, ...]
    tile_dims: tuple[int, ...] = field(init=False)
    num_tiles: int = field(init=False)

    def __post_init__(self):
        self.tile_dims = tuple(math.ceil(d.size / f) for d, f in zip(self.space.dims, self.factors))
        self.num_tiles = math.prod(self.factors)

    def _frac(self, dims, ceil):
        out = 1.0
        for i in dims:
            d = self.space.dims[i]
            out *= (self.tile_dims[i] / d.size) if ceil else (1.0 / self.factors[i])
        return out

    def tile_bytes(self, t: TensorUse, ceil=True) -> float:
        return t.nbytes * self._frac(t.dims, ceil)

    def group_size(self, t: TensorUse) -> int:
        return math.prod(f for i, f in enumerate(self.factors) if i not in t.dims)

    @property
    def exec_footprint(self) -> float:
        ins = sum(self.tile_bytes(t) for t in self.space.inputs)
        return ins + 2 * self.tile_bytes(self.space.output)

    @property
    def flops_per_tile(self) -> float:
        return self.space.flops * self._frac(range(len(self.space.dims)), True)

    @property
    def reduction_factor(self) -> int:
        return math.prod(f for d, f in zip(self.space.dims, self.factors) if d.reduction)

    @property
    def gather_bytes(self) -> float:
        """Per-core inbound bytes to assemble intermediate inputs at execution."""
        tot = 0.0
        for t in self.space.inputs:
            if not t.is_hbm:
                g = self.group_size(t)
                tot += self.tile_bytes(t, ceil=False) * (1 - 1 / g)
        return tot

    @property
    def reduction_bytes(self) -> float:
        r = self.reduction_factor
        if r <= 1:
            return 0.0
        return 2 * (r - 1) / r * self.tile_bytes(self.space.output, ceil=False)

    def shared_hbm(self):
        return [t for t in self.space.tensors if t.is_hbm and self.group_size(t) > 1]

    def preload_plan(self, base: PartitionPlan, c: int) -> PreloadStatePlan:
        space = dist = inbound = 0.0
        for t in self.space.tensors:
            if not t.is_hbm:
                continue
            ct = c if self.group_size(t) > 1 else 1
            space += self.tile_bytes(t) / ct
            inbound += self.tile_bytes(t, ceil=False) / ct
            dist += self.tile_bytes(t, ceil=False) * (1 - 1 / ct)
        return PreloadStatePlan(base, c, space, dist, inbound, self.space.hbm_bytes)


def factor_candidates(size: int, limit: int) -> list[int]:
    cap = min(size, limit)
    cands = {d for d in range(1, math.isqrt(size) + 1) if size % d == 0 and d <= cap}
    cands |= {size // d for d in list(cands) if size // d <= cap}
    p = 1
    while p <= cap:
        cands.add(p)
        p *= 2
    return sorted(cands)


def _mesh_ok(factors, c: ChipConfig) -> bool:
    split = [f for f in factors if f > 1]
    if len(split) > 2:
        return False
    rows, cols = c.topology.mesh_dims
    if len(split) == 2:
        return split[0] <= rows and split[1] <= cols
    return True


def enumerate_partition_plans(op: OperatorSpec | OpSpace, c: ChipConfig) -> list[PartitionPlan]:
    """All factor combinations that fit the core count and per-core capacity."""
    space = op if isinstance(op, OpSpace) else iteration_space(op, c.num_chips)
    grids = [factor_candidates(d.size, c.num_cores) if d.partitionable else [1] for d in space.dims]
    plans = []
    for factors in itertools.product(*grids):
        if math.prod(factors) > c.num_cores:
            continue
        if c.is_mesh and not _mesh_ok(factors, c):
            continue
        geo = PlanGeometry(space, factors)
        fp = geo.exec_footprint
        if fp > c.capacity:
            continue
        plans.append(PartitionPlan(space.op_id, factors, geo.tile_dims, geo.num_tiles, fp, plan_id=len(plans)))
    if not plans:
        raise NoFeasiblePlan(f"operator {space.op_id}: no partition plan fits {c.capacity} bytes per core")
    return plans


def map_tiles_to_cores(p: PartitionPlan, c: ChipConfig) -> list[int]:
    """Core id of each tile, tiles numbered row-major over the slice factors."""
    if p.num_tiles > c.num_cores:
        raise ValueError(f"{p.num_tiles} tiles exceed {c.num_cores} cores")
    if not c.is_mesh:
        return list(range(p.num_tiles))
    split = [f for f in p.slice_factors if f > 1]
    if len(split) < 2:
        return list(range(p.num_tiles))
    f1, f2 = split
    return [c.core_at(i, j) for i in range(f1) for j in range(f2)]


def enumerate_preload_plans(p: PartitionPlan, space: OpSpace) -> list[PreloadStatePlan]:
    """One preload-state plan per power-of-two chunk factor dividing every shared group."""
    geo = PlanGeometry(space, p.slice_factors)
    groups = [geo.group_size(t) for t in geo.shared_hbm()]
    out = [geo.preload_plan(p, 1)]
    if groups:
        cf = 2
        while all(g % cf == 0 for g in groups):
            out.append(geo.preload_plan(p, cf))
            cf *= 2
    return out
