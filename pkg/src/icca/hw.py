"""Chip description: cores, SRAM, interconnect topology, HBM controllers.

Node numbering: cores are ``0 .. num_cores-1``; HBM controllers follow as
``num_cores .. num_cores+num_controllers-1``.  Mesh cores are laid out
row-major, ``core = row * cols + col``.  Dimension-order routing resolves the
column (X) coordinate first, then the row (Y).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import yaml


class ConfigError(ValueError):
    """Invalid hardware configuration; the message names the offending field."""


class TopologyKind(str, Enum):
    ALL_TO_ALL = "all-to-all"
    MESH2D = "mesh2d"


class Link(NamedTuple):
    src: int
    dst: int


@dataclass(frozen=True)
class Topology:
    kind: TopologyKind
    per_core_link_bandwidth: float
    link_latency: float = 0.0
    mesh_dims: tuple[int, int] | None = None
    # mesh only: (row, col) of the boundary router each controller attaches to
    hbm_controller_placement: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class HbmSpec:
    num_controllers: int
    total_bandwidth: float  # bytes/s per chip


@dataclass(frozen=True)
class ChipConfig:
    num_cores: int
    sram_per_core: int
    core_flops: dict = field(default_factory=lambda: {"matmul": 1e11, "other": 1e10})
    reserve_buffer: int = 0
    topology: Topology = Topology(TopologyKind.ALL_TO_ALL, 1e9)
    hbm: HbmSpec = HbmSpec(1, 1e11)
    num_chips: int = 1
    inter_chip_bandwidth: float = 1e11
    name: str = ""

    def __post_init__(self):
        validate_config(self)

    # convenience --------------------------------------------------------
    @property
    def capacity(self) -> int:
        """Per-core bytes usable for execution and preload spaces."""
        return self.sram_per_core - self.reserve_buffer

    @property
    def link_bandwidth(self) -> float:
        return self.topology.per_core_link_bandwidth

    @property
    def is_mesh(self) -> bool:
        return self.topology.kind is TopologyKind.MESH2D

    @property
    def num_nodes(self) -> int:
        return self.num_cores + self.hbm.num_controllers

    def flop_rate(self, is_matmul: bool) -> float:
        return self.core_flops["matmul" if is_matmul else "other"]

    def is_controller(self, node: int) -> bool:
        return self.num_cores <= node < self.num_nodes

    def coords(self, core: int) -> tuple[int, int]:
        _, cols = self.topology.mesh_dims
        return divmod(core, cols)

    def core_at(self, row: int, col: int) -> int:
        _, cols = self.topology.mesh_dims
        return row * cols + col

    def controller_attach(self, node: int) -> int:
        """Mesh core whose router the controller injects into."""
        r, c = self.topology.hbm_controller_placement[node - self.num_cores]
        return self.core_at(r, c)

    def replace(self, **changes) -> "ChipConfig":
        return dataclasses.replace(self, **changes)


def boundary_cells(rows: int, cols: int) -> list[tuple[int, int]]:
    """Boundary coordinates walked clockwise from (0, 0)."""
    if rows == 1:
        return [(0, c) for c in range(cols)]
    if cols == 1:
        return [(r, 0) for r in range(rows)]
    cells = [(0, c) for c in range(cols)]
    cells += [(r, cols - 1) for r in range(1, rows)]
    cells += [(rows - 1, c) for c in range(cols - 2, -1, -1)]
    cells += [(r, 0) for r in range(rows - 2, 0, -1)]
    return cells


def default_controller_placement(rows: int, cols: int, n: int) -> tuple[tuple[int, int], ...]:
    cells = boundary_cells(rows, cols)
    return tuple(cells[(k * len(cells)) // n] for k in range(n))


def validate_config(c: ChipConfig) -> None:
    def bad(name, msg):
        raise ConfigError(f"{name}: {msg}")

    if c.num_cores < 1:
        bad("num_cores", "must be positive")
    if c.reserve_buffer < 0:
        bad("reserve_buffer", "must be >= 0")
    if not c.sram_per_core > c.reserve_buffer:
        bad("sram_per_core", f"must exceed reserve_buffer ({c.sram_per_core} <= {c.reserve_buffer})")
    for key in ("matmul", "other"):
        if c.core_flops.get(key, 0) <= 0:
            bad(f"core_flops.{key}", "must be positive")
    if c.num_chips < 1:
        bad("num_chips", "must be positive")
    if c.inter_chip_bandwidth <= 0:
        bad("inter_chip_bandwidth", "must be positive")
    if c.hbm.num_controllers < 1:
        bad("hbm.num_controllers", "must be positive")
    if c.hbm.total_bandwidth <= 0:
        bad("hbm.total_bandwidth", "must be positive")
    t = c.topology
    if t.per_core_link_bandwidth <= 0:
        bad("topology.per_core_link_bandwidth", "must be positive")
    if t.link_latency < 0:
        bad("topology.link_latency", "must be >= 0")
    if t.kind is TopologyKind.MESH2D:
        if t.mesh_dims is None:
            bad("topology.mesh_dims", "required for mesh2d")
        rows, cols = t.mesh_dims
        if rows < 1 or cols < 1 or rows * cols != c.num_cores:
            bad("topology.mesh_dims", f"{rows}x{cols} = {rows * cols} != num_cores {c.num_cores}")
        if len(t.hbm_controller_placement) != c.hbm.num_controllers:
            bad("topology.hbm_controller_placement",
                f"{len(t.hbm_controller_placement)} entries for {c.hbm.num_controllers} controllers")
        edge = set(boundary_cells(rows, cols))
        for rc in t.hbm_controller_placement:
            if tuple(rc) not in edge:
                bad("topology.hbm_controller_placement", f"{tuple(rc)} is not on the mesh boundary")


# ---------------------------------------------------------------------------
# routing


def _check_node(c: ChipConfig, node: int) -> None:
    if not (isinstance(node, int) and 0 <= node < c.num_nodes):
        raise ValueError(f"invalid node id {node!r}")


def _mesh_path(c: ChipConfig, a: int, b: int) -> list[Link]:
    r0, c0 = c.coords(a)
    r1, c1 = c.coords(b)
    links = []
    cur = a
    step = 1 if c1 > c0 else -1
    for col in range(c0 + step, c1 + step, step) if c1 != c0 else ():
        nxt = c.core_at(r0, col)
        links.append(Link(cur, nxt))
        cur = nxt
    step = 1 if r1 > r0 else -1
    for row in range(r0 + step, r1 + step, step) if r1 != r0 else ():
        nxt = c.core_at(row, c1)
        links.append(Link(cur, nxt))
        cur = nxt
    return links


def route(c: ChipConfig, src: int, dst: int) -> list[Link]:
    """Ordered links from ``src`` to ``dst``.

    All-to-all: one direct link.  Mesh: X-then-Y dimension-order path between
    routers; a controller shares the router of its boundary attachment point,
    so the path length is the Manhattan distance between routers.
    """
    _check_node(c, src)
    _check_node(c, dst)
    if src == dst:
        raise ValueError("route requires src != dst")
    if c.topology.kind is TopologyKind.ALL_TO_ALL:
        return [Link(src, dst)]
    a = c.controller_attach(src) if c.is_controller(src) else src
    b = c.controller_attach(dst) if c.is_controller(dst) else dst
    return _mesh_path(c, a, b)


def mesh_links(c: ChipConfig) -> list[Link]:
    rows, cols = c.topology.mesh_dims
    out = []
    for r in range(rows):
        for col in range(cols):
            u = c.core_at(r, col)
            if col + 1 < cols:
                v = c.core_at(r, col + 1)
                out += [Link(u, v), Link(v, u)]
            if r + 1 < rows:
                v = c.core_at(r + 1, col)
                out += [Link(u, v), Link(v, u)]
    return out


def link_exists(c: ChipConfig, link: Link) -> bool:
    if c.topology.kind is TopologyKind.ALL_TO_ALL:
        return link.src != link.dst and 0 <= link.src < c.num_nodes and 0 <= link.dst < c.num_nodes
    if c.is_controller(link.src) or c.is_controller(link.dst):
        return False
    (r0, c0), (r1, c1) = c.coords(link.src), c.coords(link.dst)
    return abs(r0 - r1) + abs(c0 - c1) == 1


def num_directed_links(c: ChipConfig) -> int:
    if c.topology.kind is TopologyKind.ALL_TO_ALL:
        # one ingress port per core carries everything it receives
        return c.num_cores
    rows, cols = c.topology.mesh_dims
    return 2 * (rows * (cols - 1) + cols * (rows - 1))


def aggregate_intercore_bandwidth(c: ChipConfig) -> float:
    return num_directed_links(c) * c.link_bandwidth


# ---------------------------------------------------------------------------
# config files


def config_from_dict(doc: dict) -> ChipConfig:
    try:
        chip = doc["chip"]
        topo = doc["topology"]
        hbm_doc = doc["hbm"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"missing section {exc}") from None
    hbm = HbmSpec(int(hbm_doc["num_controllers"]), float(hbm_doc["total_bandwidth"]))
    try:
        kind = TopologyKind(topo["kind"])
    except (KeyError, ValueError):
        raise ConfigError(f"topology.kind: expected one of {[k.value for k in TopologyKind]}") from None
    mesh_dims = tuple(int(x) for x in topo["mesh_dims"]) if topo.get("mesh_dims") else None
    placement: tuple = ()
    if kind is TopologyKind.MESH2D and mesh_dims is not None:
        raw = topo.get("hbm_controller_placement")
        if raw:
            placement = tuple(tuple(int(x) for x in rc) for rc in raw)
        elif mesh_dims[0] >= 1 and mesh_dims[1] >= 1:
            placement = default_controller_placement(mesh_dims[0], mesh_dims[1], hbm.num_controllers)
    topology = Topology(kind, float(topo["per_core_link_bandwidth"]), float(topo.get("link_latency", 0.0)),
                        mesh_dims, placement)
    flops = chip.get("core_flops", {})
    if not isinstance(flops, dict):
        flops = {"matmul": float(flops), "other": float(flops)}
    return ChipConfig(
        num_cores=int(chip["num_cores"]),
        sram_per_core=int(chip["sram_per_core"]),
        core_flops={k: float(v) for k, v in flops.items()},
        reserve_buffer=int(chip.get("reserve_buffer", 0)),
        topology=topology,
        hbm=hbm,
        num_chips=int(chip.get("num_chips", 1)),
        inter_chip_bandwidth=float(chip.get("inter_chip_bandwidth", 1e11)),
        name=str(chip.get("name", "")),
    )


def config_to_dict(c: ChipConfig) -> dict:
    topo = {
        "kind": c.topology.kind.value,
        "per_core_link_bandwidth": c.topology.per_core_link_bandwidth,
        "link_latency": c.topology.link_latency,
    }
    if c.is_mesh:
        topo["mesh_dims"] = list(c.topology.mesh_dims)
        topo["hbm_controller_placement"] = [list(rc) for rc in c.topology.hbm_controller_placement]
    return {
        "chip": {
            "name": c.name,
            "num_cores": c.num_cores,
            "sram_per_core": c.sram_per_core,
            "reserve_buffer": c.reserve_buffer,
            "core_flops": dict(c.core_flops),
            "num_chips": c.num_chips,
            "inter_chip_bandwidth": c.inter_chip_bandwidth,
        },
        "topology": topo,
        "hbm": {"num_controllers": c.hbm.num_controllers, "total_bandwidth": c.hbm.total_bandwidth},
    }


PRESETS = ("ipu-mk2-a2a", "mesh-1472", "a2a-64", "mesh-8x8")


def load_preset(name: str) -> ChipConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("icca").joinpath("presets", f"{name}.yaml").read_text()
    return config_from_dict(yaml.safe_load(text))


def load_config(path: str | Path) -> ChipConfig:
    """Load a hardware config file, or a shipped preset by name."""
    p = Path(path)
    if not p.exists() and str(path) in PRESETS:
        return load_preset(str(path))
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(doc)


def with_hbm_bandwidth(c: ChipConfig, bw: float) -> ChipConfig:
    return c.replace(hbm=HbmSpec(c.hbm.num_controllers, bw))


def with_link_bandwidth(c: ChipConfig, bw: float) -> ChipConfig:
    return c.replace(topology=dataclasses.replace(c.topology, per_core_link_bandwidth=bw))


def with_num_cores(c: ChipConfig, n: int) -> ChipConfig:
    """Same chip with ``n`` cores; a mesh becomes the most nearly square grid."""
    if not c.is_mesh:
        return c.replace(num_cores=n)
    rows = max(d for d in range(1, math.isqrt(n) + 1) if n % d == 0)
    cols = n // rows
    topo = dataclasses.replace(c.topology, mesh_dims=(rows, cols),
                               hbm_controller_placement=default_controller_placement(rows, cols,
                                                                                     c.hbm.num_controllers))
    return c.replace(num_cores=n, topology=topo)
