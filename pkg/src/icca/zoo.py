"""Synthetic model generators: transformer decode graphs and small fixtures.

Decode-step graphs are what the scheduler targets: every weight matrix and
KV-cache slab is HBM-resident and streams on-chip once per token.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model_ir import ModelGraph, Residence, TensorSpec, build_graph

HBM = Residence.HBM
MID = Residence.INTERMEDIATE


class _Builder:
    def __init__(self, element_size):
        self.es = element_size
        self.tensors: list[TensorSpec] = []
        self.ops: list[dict] = []
        self._n = 0

    def tensor(self, name, dims, residence=MID, element_size=None):
        t = TensorSpec(name, tuple(int(d) for d in dims), element_size or self.es, residence)
        self.tensors.append(t)
        return name

    def weight(self, name, dims):
        return self.tensor(name, dims, HBM)

    def op(self, op_type, inputs, out_name, out_dims, layer=None, name=""):
        self.tensor(out_name, out_dims)
        rec = {"op_type": op_type, "inputs": list(inputs), "output": out_name, "name": name or out_name}
        if layer is not None:
            rec["layer"] = layer
        self.ops.append(rec)
        return out_name

    def build(self, name):
        return build_graph(name, self.tensors, self.ops)


@dataclass(frozen=True)
class DecoderShape:
    """Shape of one decode step of a decoder-only transformer."""

    layers: int = 24
    hidden: int = 4096
    heads: int = 32
    kv_heads: int | None = None  # grouped-query attention when smaller than heads
    ffn: int | None = None  # defaults to 4 * hidden
    batch: int = 16
    context: int = 1024
    vocab: int = 0  # 0 disables the LM head
    gated_ffn: bool = False  # gate and up projections fused into one MatMul
    fused_qkv: bool = True
    ops_per_layer: int = 0  # pad each layer with light ops up to this count
    extra_ops: int = 0  # pad the tail with light ops up to this many non-layer ops
    element_size: int = 2


def transformer_decode(cfg: DecoderShape, name="decoder") -> ModelGraph:
    b = _Builder(cfg.element_size)
    h, bs = cfg.hidden, cfg.batch
    hd = h // cfg.heads
    kvh = cfg.kv_heads or cfg.heads
    kv = kvh * hd
    ffn = cfg.ffn or 4 * h

    x = b.op("Other", [b.weight("tokens", (bs, h))], "embed", (bs, h), name="embed")
    tail = 1
    for li in range(cfg.layers):
        p = f"l{li}."
        start = len(b.ops)
        ln1 = b.op("LayerNorm", [x, b.weight(p + "ln1_g", (h,))], p + "ln1", (bs, h), li)
        if cfg.fused_qkv:
            qkv = b.op("MatMul", [ln1, b.weight(p + "w_qkv", (h, h + 2 * kv))], p + "qkv",
                       (bs, h + 2 * kv), li)
            q = qkv
        else:
            q = b.op("MatMul", [ln1, b.weight(p + "w_q", (h, h))], p + "q", (bs, h), li)
            b.op("MatMul", [ln1, b.weight(p + "w_k", (h, kv))], p + "k", (bs, kv), li)
            b.op("MatMul", [ln1, b.weight(p + "w_v", (h, kv))], p + "v", (bs, kv), li)
        # attention against the cached keys and values
        kc = b.weight(p + "k_cache", (bs * cfg.heads, hd, cfg.context)) if kvh == cfg.heads else \
            b.weight(p + "k_cache", (bs * kvh, hd, cfg.context))
        vc = b.weight(p + "v_cache", (bs * kvh, cfg.context, hd))
        qh = b.op("Other", [q], p + "split_heads", (bs * kvh, cfg.heads // kvh, hd), li)
        s = b.op("BatchMatMul", [qh, kc], p + "scores", (bs * kvh, cfg.heads // kvh, cfg.context), li)
        pr = b.op("Softmax", [s], p + "probs", (bs * kvh, cfg.heads // kvh, cfg.context), li)
        ctx = b.op("BatchMatMul", [pr, vc], p + "ctx", (bs * kvh, cfg.heads // kvh, hd), li)
        ctx2 = b.op("Other", [ctx], p + "merge", (bs, h), li)
        o = b.op("MatMul", [ctx2, b.weight(p + "w_o", (h, h))], p + "attn_out", (bs, h), li)
        r1 = b.op("Elementwise", [x, o], p + "res1", (bs, h), li)
        ln2 = b.op("LayerNorm", [r1, b.weight(p + "ln2_g", (h,))], p + "ln2", (bs, h), li)
        if cfg.gated_ffn:
            gu = b.op("MatMul", [ln2, b.weight(p + "w_gate_up", (h, 2 * ffn))], p + "gate_up",
                      (bs, 2 * ffn), li)
            act = b.op("Elementwise", [gu], p + "act", (bs, ffn), li)
        else:
            f1 = b.op("MatMul", [ln2, b.weight(p + "w_fc1", (h, ffn))], p + "fc1", (bs, ffn), li)
            act = b.op("Elementwise", [f1], p + "act", (bs, ffn), li)
        f2 = b.op("MatMul", [act, b.weight(p + "w_fc2", (ffn, h))], p + "fc2", (bs, h), li)
        cur = f2
        k = 0
        while len(b.ops) - start < cfg.ops_per_layer - 1:
            cur = b.op("Other", [cur], p + f"pad{k}", (bs, h), li)
            k += 1
        x = b.op("Elementwise", [r1, cur], p + "res2", (bs, h), li)

    x = b.op("LayerNorm", [x, b.weight("lnf_g", (h,))], "lnf", (bs, h))
    tail += 1
    if cfg.vocab:
        b.op("MatMul", [x, b.weight("lm_head", (h, cfg.vocab))], "logits", (bs, cfg.vocab))
        tail += 1
    k = 0
    while tail < cfg.extra_ops:
        x = b.op("Other", [x], f"post{k}", (bs, h))
        k += 1
        tail += 1
    return b.build(name)


def gpt_like(layers=24, hidden=4096, heads=32, batch=16, context=1024) -> ModelGraph:
    """GPT-style decode step, 14 operators per layer."""
    return transformer_decode(DecoderShape(layers=layers, hidden=hidden, heads=heads, batch=batch,
                                           context=context), name=f"gpt-like-{layers}l-h{hidden}")


def opt30b_shaped() -> ModelGraph:
    """OPT-30B decode at batch 1: 48 layers x 47 ops + 13 tail ops = 2269 operators."""
    cfg = DecoderShape(layers=48, hidden=7168, heads=56, batch=1, context=64, vocab=50272,
                       fused_qkv=False, ops_per_layer=47, extra_ops=13)
    return transformer_decode(cfg, name="opt-30b-shaped")


def llama2_70b_shaped() -> ModelGraph:
    """Llama2-70B decode: 80 layers x 47 ops + 48 tail ops = 3808 operators."""
    cfg = DecoderShape(layers=80, hidden=8192, heads=64, kv_heads=8, ffn=28672, batch=32, context=1024,
                       vocab=32000, gated_ffn=True, fused_qkv=False, ops_per_layer=47, extra_ops=48)
    return transformer_decode(cfg, name="llama2-70b-shaped")


def tiny_block(layers=2, hidden=64, heads=4, batch=2, context=16) -> ModelGraph:
    return transformer_decode(DecoderShape(layers=layers, hidden=hidden, heads=heads, batch=batch,
                                           context=context), name=f"tiny-{layers}l")


def matmul_chain(sizes, batch=8, element_size=2, name="chain") -> ModelGraph:
    """A chain of MatMuls; ``sizes`` lists the feature widths [d0, d1, ..., dn]."""
    b = _Builder(element_size)
    x = b.op("Other", [b.weight("x0", (batch, sizes[0]))], "x", (batch, sizes[0]))
    for i, (k, n) in enumerate(zip(sizes[:-1], sizes[1:])):
        x = b.op("MatMul", [x, b.weight(f"w{i}", (k, n))], f"y{i}", (batch, n))
    return b.build(name)


def random_chain(rng: np.random.Generator, n_ops: int, max_width=256, batch=4) -> ModelGraph:
    """Random mix of MatMuls and elementwise ops with random widths."""
    b = _Builder(2)
    width = int(rng.integers(8, max_width + 1))
    x = b.op("Other", [b.weight("x0", (batch, width))], "x", (batch, width))
    for i in range(n_ops - 1):
        if rng.random() < 0.6:
            n = int(rng.integers(8, max_width + 1))
            x = b.op("MatMul", [x, b.weight(f"w{i}", (width, n))], f"y{i}", (batch, n))
            width = n
        else:
            x = b.op("Elementwise", [x], f"e{i}", (batch, width))
    return b.build("random-chain")


def elementwise_chain(rng: np.random.Generator, n_ops: int, max_width=4096, batch=4) -> ModelGraph:
    """Chain of elementwise ops, each adding an HBM tensor of its own shape.

    Every tensor of an op shares its single dimension, so no plan needs
    inter-core exchange while executing.
    """
    b = _Builder(2)
    width = int(rng.integers(64, max_width + 1))
    x = b.op("Other", [b.weight("x0", (batch, width))], "x", (batch, width))
    for i in range(n_ops - 1):
        x = b.op("Elementwise", [x, b.weight(f"w{i}", (batch, width))], f"e{i}", (batch, width))
    return b.build("elementwise-chain")
