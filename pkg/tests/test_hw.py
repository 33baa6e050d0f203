import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icca.hw import (ChipConfig, ConfigError, HbmSpec, Link, Topology, TopologyKind, aggregate_intercore_bandwidth,
                     config_from_dict, config_to_dict, link_exists, load_preset, mesh_links, route,
                     with_num_cores)


def mesh(rows, cols, ctrl=4):
    from icca.hw import default_controller_placement
    return ChipConfig(rows * cols, 1 << 16, topology=Topology(TopologyKind.MESH2D, 1e9, 0.0, (rows, cols),
                                                              default_controller_placement(rows, cols, ctrl)),
                      hbm=HbmSpec(ctrl, 1e11))


@pytest.mark.parametrize("name", ["ipu-mk2-a2a", "mesh-1472", "a2a-64", "mesh-8x8"])
def test_presets_roundtrip(name):
    c = load_preset(name)
    assert config_from_dict(config_to_dict(c)) == c


def test_ipu_preset_values():
    c = load_preset("ipu-mk2-a2a")
    assert c.num_cores == 1472
    assert c.sram_per_core == 624 * 1024
    assert c.topology.kind is TopologyKind.ALL_TO_ALL


def test_mesh_route_example():
    c = mesh(3, 3)
    assert route(c, 0, 8) == [Link(0, 1), Link(1, 2), Link(2, 5), Link(5, 8)]


def test_a2a_route_is_one_link():
    c = load_preset("a2a-64")
    assert route(c, 3, 17) == [Link(3, 17)]


def test_route_rejects_bad_nodes():
    c = mesh(2, 2)
    with pytest.raises(ValueError):
        route(c, 0, 99)
    with pytest.raises(ValueError):
        route(c, 1, 1)


@pytest.mark.parametrize("change", [
    dict(num_cores=0),
    dict(sram_per_core=10, reserve_buffer=10),
    dict(hbm=HbmSpec(0, 1e9)),
    dict(topology=Topology(TopologyKind.MESH2D, 1e9, 0.0, (3, 3), ((0, 0),))),
])
def test_invalid_configs(change):
    with pytest.raises(ConfigError):
        load_preset("a2a-64").replace(**change)


def test_controller_must_be_on_boundary():
    with pytest.raises(ConfigError):
        ChipConfig(9, 1 << 16, topology=Topology(TopologyKind.MESH2D, 1e9, 0.0, (3, 3), ((1, 1),)))


def test_mesh_link_count_and_bandwidth():
    c = mesh(3, 4)
    assert len(mesh_links(c)) == 2 * (3 * 3 + 4 * 2)
    assert aggregate_intercore_bandwidth(c) == len(mesh_links(c)) * 1e9


def test_with_num_cores_reshapes_mesh():
    c = with_num_cores(load_preset("mesh-8x8"), 32)
    assert c.topology.mesh_dims == (4, 8)
    assert len(c.topology.hbm_controller_placement) == c.hbm.num_controllers


@given(st.integers(1, 6), st.integers(1, 6), st.data())
@settings(max_examples=80, deadline=None)
def test_mesh_routes_are_manhattan_and_x_first(rows, cols, data):
    c = mesh(rows, cols, ctrl=1)
    n = rows * cols
    if n < 2:
        return
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(0, n - 1).filter(lambda x: x != a))
    path = route(c, a, b)
    (r0, c0), (r1, c1) = c.coords(a), c.coords(b)
    assert len(path) == abs(r0 - r1) + abs(c0 - c1)
    assert path[0].src == a and path[-1].dst == b
    assert all(link_exists(c, l) for l in path)
    assert all(x.dst == y.src for x, y in zip(path, path[1:]))
    # once a hop changes the row, no later hop changes the column
    moved_y = False
    for l in path:
        dy = c.coords(l.src)[0] != c.coords(l.dst)[0]
        if moved_y:
            assert dy
        moved_y |= dy
