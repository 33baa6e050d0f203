"""Model graph representation: tensors, operators, layers.

A model is a topologically ordered list of operators.  The list order is the
execution order.  Tensors are either HBM-resident parameters (weights, KV
cache) that must be preloaded from off-chip memory, or intermediates produced
on-chip by an earlier operator.

File format (YAML or JSON, both parsed by ``yaml.safe_load``)::

    format_version: 1
    model: {name: tiny-gpt}
    tensors:
      - {name: x, dims: [8, 256], element_size: 2, residence: hbm}
      - {name: w, dims: [256, 1024], element_size: 2, residence: hbm}
      - {name: y, dims: [8, 1024], element_size: 2, residence: intermediate}
    operators:
      - {op_type: MatMul, inputs: [x, w], output: y, layer: 0}

``flops`` and ``name`` are optional per operator; ``layer`` tags operators
that belong to a repeated layer and must form contiguous runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import yaml

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised for malformed or inconsistent model files."""


class Residence(str, Enum):
    HBM = "hbm"
    INTERMEDIATE = "intermediate"


class OpType(str, Enum):
    MATMUL = "MatMul"
    BATCH_MATMUL = "BatchMatMul"
    ELEMENTWISE = "Elementwise"
    SOFTMAX = "Softmax"
    LAYERNORM = "LayerNorm"
    REDUCE = "Reduce"
    OTHER = "Other"

    @property
    def is_matmul(self) -> bool:
        return self in (OpType.MATMUL, OpType.BATCH_MATMUL)


_RESIDENCE_ALIASES = {
    "hbm": Residence.HBM,
    "hbm-parameter": Residence.HBM,
    "parameter": Residence.HBM,
    "intermediate": Residence.INTERMEDIATE,
}


@dataclass(frozen=True)
class TensorSpec:
    name: str
    dims: tuple[int, ...]
    element_size: int
    residence: Residence = Residence.INTERMEDIATE

    def __post_init__(self):
        if not self.dims:
            raise ModelFormatError(f"tensor {self.name!r}: dims must be non-empty")
        if any(int(d) < 1 for d in self.dims):
            raise ModelFormatError(f"tensor {self.name!r}: non-positive dimension in {list(self.dims)}")
        if self.element_size < 1:
            raise ModelFormatError(f"tensor {self.name!r}: element_size must be >= 1")

    @property
    def numel(self) -> int:
        return math.prod(self.dims)

    @property
    def nbytes(self) -> int:
        return self.numel * self.element_size

    @property
    def is_hbm(self) -> bool:
        return self.residence is Residence.HBM


@dataclass(frozen=True)
class OperatorSpec:
    id: int
    op_type: OpType
    inputs: tuple[TensorSpec, ...]
    output: TensorSpec
    flops: float
    name: str = ""
    layer: int | None = None

    @property
    def hbm_load_bytes(self) -> int:
        return sum(t.nbytes for t in self.inputs if t.is_hbm)

    @property
    def hbm_inputs(self) -> tuple[TensorSpec, ...]:
        return tuple(t for t in self.inputs if t.is_hbm)

    def signature(self) -> tuple:
        """Structural identity used for layer matching (names ignored)."""
        return (
            self.op_type,
            tuple((t.dims, t.element_size) for t in self.inputs),
        )


@dataclass(frozen=True)
class ModelGraph:
    name: str
    operators: tuple[OperatorSpec, ...]
    layer_boundaries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        validate_graph(self)

    @property
    def num_operators(self) -> int:
        return len(self.operators)

    def op(self, op_id: int) -> OperatorSpec:
        return self.operators[op_id - 1]

    def parameter_bytes(self) -> int:
        """Bytes of distinct HBM-resident tensors (the model size)."""
        seen: dict[str, int] = {}
        for op in self.operators:
            for t in op.hbm_inputs:
                seen[t.name] = t.nbytes
        return sum(seen.values())

    def layer_ops(self, layer_index: int) -> list[OperatorSpec]:
        start, end = self.layer_boundaries[layer_index]
        return list(self.operators[start - 1:end])


@dataclass(frozen=True)
class HbmHeavySet:
    ids: frozenset[int]
    threshold_bytes: float


def default_flops(op_type: OpType, inputs: Sequence[TensorSpec], output: TensorSpec) -> float:
    if op_type.is_matmul:
        k = inputs[0].dims[-1]
        return 2.0 * output.numel * k
    per_elem = {
        OpType.ELEMENTWISE: 1.0,
        OpType.SOFTMAX: 5.0,
        OpType.LAYERNORM: 8.0,
        OpType.REDUCE: 1.0,
        OpType.OTHER: 1.0,
    }[op_type]
    if op_type is OpType.REDUCE:
        return per_elem * max(t.numel for t in inputs)
    return per_elem * output.numel


def validate_graph(g: ModelGraph) -> None:
    if not g.operators:
        raise ModelFormatError("empty model")
    produced: set[str] = set()
    for pos, op in enumerate(g.operators, start=1):
        if op.id != pos:
            raise ModelFormatError(f"operator ids must be 1..N in list order; got {op.id} at position {pos}")
        if op.flops < 0:
            raise ModelFormatError(f"operator {op.id}: negative flops")
        if not op.inputs:
            raise ModelFormatError(f"operator {op.id}: no inputs")
        for t in op.inputs:
            if not t.is_hbm and t.name not in produced:
                raise ModelFormatError(
                    f"operator {op.id}: intermediate input {t.name!r} is not produced by an earlier operator")
        if op.output.is_hbm:
            raise ModelFormatError(f"operator {op.id}: output {op.output.name!r} cannot be HBM-resident")
        produced.add(op.output.name)
    prev_end = 0
    for start, end in g.layer_boundaries:
        if not (prev_end < start <= end <= len(g.operators)):
            raise ModelFormatError(f"layer boundaries must be disjoint, ordered and in range: {g.layer_boundaries}")
        prev_end = end


def _layer_runs(layers: Sequence[int | None]) -> tuple[tuple[int, int], ...]:
    runs: list[tuple[int, int]] = []
    seen: set[int] = set()
    i = 0
    while i < len(layers):
        tag = layers[i]
        if tag is None:
            i += 1
            continue
        if tag in seen:
            raise ModelFormatError(f"layer {tag} is not a contiguous run of operators")
        seen.add(tag)
        j = i
        while j + 1 < len(layers) and layers[j + 1] == tag:
            j += 1
        runs.append((i + 1, j + 1))
        i = j + 1
    return tuple(runs)


def build_graph(name: str, tensors: Iterable[TensorSpec], op_records: Iterable[dict]) -> ModelGraph:
    """Assemble a graph from tensor specs and operator records.

    Each record holds ``op_type``, ``inputs`` (tensor names), ``output``, and
    optionally ``flops``, ``name`` and ``layer``.  Ids are assigned 1..N in
    record order.
    """
    table: dict[str, TensorSpec] = {}
    for t in tensors:
        if t.name in table:
            raise ModelFormatError(f"duplicate tensor {t.name!r}")
        table[t.name] = t
    ops: list[OperatorSpec] = []
    layers: list[int | None] = []
    for idx, rec in enumerate(op_records, start=1):
        try:
            op_type = OpType(rec["op_type"])
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(f"operator {idx}: bad op_type {rec.get('op_type')!r}") from exc
        try:
            inputs = tuple(table[n] for n in rec["inputs"])
            output = table[rec["output"]]
        except KeyError as exc:
            raise ModelFormatError(f"operator {idx}: dangling tensor reference {exc.args[0]!r}") from None
        flops = rec.get("flops")
        if flops is None:
            flops = default_flops(op_type, inputs, output)
        layer = rec.get("layer")
        ops.append(OperatorSpec(idx, op_type, inputs, output, float(flops), rec.get("name", ""),
                                None if layer is None else int(layer)))
        layers.append(None if layer is None else int(layer))
    if not ops:
        raise ModelFormatError("empty model")
    runs = _layer_runs(layers)
    if not runs:
        # untagged model: the whole operator list is one layer
        runs = ((1, len(ops)),)
    return ModelGraph(name, tuple(ops), runs)


def parse_model(doc: dict) -> ModelGraph:
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must be a mapping")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    name = (doc.get("model") or {}).get("name", "model")
    tensors = []
    for rec in doc.get("tensors") or []:
        try:
            residence = _RESIDENCE_ALIASES[str(rec.get("residence", "intermediate")).lower()]
        except KeyError:
            raise ModelFormatError(f"tensor {rec.get('name')!r}: unknown residence {rec.get('residence')!r}") from None
        dims = rec.get("dims")
        if not isinstance(dims, list) or not dims:
            raise ModelFormatError(f"tensor {rec.get('name')!r}: dims must be a non-empty list")
        tensors.append(TensorSpec(str(rec["name"]), tuple(int(d) for d in dims),
                                  int(rec.get("element_size", 2)), residence))
    ops = doc.get("operators") or []
    if not ops:
        raise ModelFormatError("empty model")
    return build_graph(name, tensors, ops)


def load_model(path: str | Path) -> ModelGraph:
    """Read and validate a model graph file; operator ids are renumbered 1..N."""
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ModelFormatError(f"cannot parse {path}: {exc}") from exc
    return parse_model(doc)


def model_to_dict(g: ModelGraph) -> dict:
    tensors: dict[str, TensorSpec] = {}
    for op in g.operators:
        for t in (*op.inputs, op.output):
            tensors.setdefault(t.name, t)
    return {
        "format_version": FORMAT_VERSION,
        "model": {"name": g.name},
        "tensors": [
            {"name": t.name, "dims": list(t.dims), "element_size": t.element_size,
             "residence": t.residence.value}
            for t in tensors.values()
        ],
        "operators": [
            {k: v for k, v in (
                ("name", op.name or None),
                ("op_type", op.op_type.value),
                ("inputs", [t.name for t in op.inputs]),
                ("output", op.output.name),
                ("flops", op.flops),
                ("layer", op.layer),
            ) if v is not None}
            for op in g.operators
        ],
    }


def save_model(g: ModelGraph, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(model_to_dict(g), sort_keys=False, default_flow_style=None))


def detect_identical_layers(g: ModelGraph) -> list[list[int]]:
    """Group layer indices whose operator sequences match position by position.

    Groups are listed by first occurrence; members are in ascending order.
    """
    groups: dict[tuple, list[int]] = {}
    for idx in range(len(g.layer_boundaries)):
        key = tuple(op.signature() for op in g.layer_ops(idx))
        groups.setdefault(key, []).append(idx)
    return list(groups.values())


def classify_hbm_heavy(g: ModelGraph) -> HbmHeavySet:
    """Operators whose HBM load is at least the per-operator average model size."""
    threshold = g.parameter_bytes() / g.num_operators
    if threshold == 0:
        ids = frozenset(op.id for op in g.operators if op.hbm_load_bytes > 0)
    else:
        ids = frozenset(op.id for op in g.operators if op.hbm_load_bytes >= threshold)
    return HbmHeavySet(ids, threshold)
