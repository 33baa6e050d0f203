import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icca import zoo
from icca.hw import ChipConfig, load_preset
from icca.model_ir import OpType
from icca.plans import (NoFeasiblePlan, PlanGeometry, enumerate_partition_plans, enumerate_preload_plans,
                        factor_candidates, iteration_space, map_tiles_to_cores, shard_across_chips)


@pytest.fixture
def chain():
    # op 2: y0[8,16] = x[8,32] @ w0[32,16], x produced on chip
    return zoo.matmul_chain([32, 16], batch=8)


def test_factor_candidates():
    assert factor_candidates(12, 8) == [1, 2, 3, 4, 6, 8]
    assert factor_candidates(1, 64) == [1]


def test_matmul_space(chain):
    sp = iteration_space(chain.op(2))
    assert [(d.name, d.size, d.reduction) for d in sp.dims] == [("M", 8, False), ("N", 16, False), ("K", 32, True)]
    assert sp.hbm_bytes == 32 * 16 * 2


def test_geometry_by_hand(chain):
    sp = iteration_space(chain.op(2))
    geo = PlanGeometry(sp, (2, 4, 1))
    # A tile 4x32, B tile 32x4, out tile 4x4 double-buffered
    assert geo.exec_footprint == (4 * 32 + 32 * 4 + 2 * 4 * 4) * 2
    assert geo.flops_per_tile == 2 * 8 * 16 * 32 / 8
    # A is shared by the 4 tiles along N; each core pulls 3/4 of its tile from peers
    assert geo.gather_bytes == pytest.approx(4 * 32 * 2 * 3 / 4)
    assert geo.reduction_bytes == 0
    red = PlanGeometry(sp, (1, 1, 4))
    assert red.reduction_factor == 4
    assert red.reduction_bytes == pytest.approx(2 * 3 / 4 * 8 * 16 * 2)


def test_preload_chunks(chain):
    sp = iteration_space(chain.op(2))
    c = load_preset("a2a-64")
    plan = next(p for p in enumerate_partition_plans(sp, c) if p.slice_factors == (4, 2, 1))
    pre = enumerate_preload_plans(plan, sp)
    # B is replicated over the 4 tiles along M: chunk factors 1, 2, 4
    assert [p.chunk_factor for p in pre] == [1, 2, 4]
    b_tile = 32 * 8 * 2
    assert [p.preload_space_per_core for p in pre] == [b_tile, b_tile / 2, b_tile / 4]
    assert [p.dist_bytes_per_core for p in pre] == [0, b_tile / 2, b_tile * 3 / 4]
    assert all(p.hbm_bytes == sp.hbm_bytes for p in pre)


def test_plans_respect_limits(chain):
    c = load_preset("a2a-64")
    for op in chain.operators:
        for p in enumerate_partition_plans(op, c):
            assert p.num_tiles <= c.num_cores
            assert p.exec_space_per_core <= c.capacity
    ids = [p.plan_id for p in enumerate_partition_plans(chain.op(2), c)]
    assert ids == list(range(len(ids)))


def test_no_feasible_plan():
    g = zoo.matmul_chain([4096, 4096], batch=64)
    c = ChipConfig(2, 4096)
    with pytest.raises(NoFeasiblePlan):
        enumerate_partition_plans(g.op(2), c)


def test_mesh_plans_map_onto_grid(chain):
    c = load_preset("mesh-8x8")
    for p in enumerate_partition_plans(chain.op(2), c):
        cores = map_tiles_to_cores(p, c)
        assert len(set(cores)) == p.num_tiles
        assert sum(f > 1 for f in p.slice_factors) <= 2


def test_shard_across_chips(chain):
    sp = iteration_space(chain.op(2))
    half = shard_across_chips(sp, 2)
    assert half.dims[1].size == 8 and half.chip_share == 0.5
    assert half.flops == sp.flops / 2
    assert half.hbm_bytes == sp.hbm_bytes / 2


def test_softmax_keeps_rows_whole(tiny):
    op = next(o for o in tiny.operators if o.op_type is OpType.SOFTMAX)
    sp = iteration_space(op)
    assert not sp.dims[-1].partitionable


@given(st.integers(1, 64), st.integers(1, 64), st.integers(1, 64), st.integers(1, 8), st.integers(1, 8),
       st.integers(1, 8))
@settings(max_examples=150, deadline=None)
def test_tiles_cover_the_space(m, n, k, fm, fn, fk):
    g = zoo.matmul_chain([k, n], batch=m)
    sp = iteration_space(g.op(2))
    fs = (min(fm, m), min(fn, n), min(fk, k))
    geo = PlanGeometry(sp, fs)
    for d, f, t in zip(sp.dims, fs, geo.tile_dims):
        assert t == math.ceil(d.size / f) and f * t >= d.size
    # the ceiling tile is never smaller than the even share
    for tu in sp.tensors:
        assert geo.tile_bytes(tu) >= geo.tile_bytes(tu, ceil=False) - 1e-9
    assert geo.flops_per_tile * geo.num_tiles >= sp.flops * (1 - 1e-12)
    assert math.isclose(geo.gather_bytes, (m * k * 2 / fs[0] / fs[2]) * (1 - 1 / fs[1]))
