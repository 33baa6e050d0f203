"""Preload-order enumeration and the outer search over orders.

Only HBM-heavy operators move, only within their layer, and the same
permutation is applied to every layer of an identical-layer group.  Light
operators keep their slots; heavy operators permute among the heavy slots.

Validity is judged with each operator's minimum footprints and the laziest
legal preload counts: while operator i executes, every later operator whose
preload precedes some operator <= i in the order is forced to be resident.
The order is built backward, last slot first, and a branch is cut as soon as a
forced co-residency exceeds capacity.  The constraint is local to a layer,
since positions never cross layer boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .model_ir import HbmHeavySet, ModelGraph, classify_hbm_heavy, detect_identical_layers
from .scheduler import EndToEndPlan, SchedulingInfeasible, _AllocCache, schedule_model


@dataclass(frozen=True)
class PreloadOrder:
    sequence: tuple[int, ...]  # op id at each preload position
    reordered_set: frozenset = frozenset()

    def __post_init__(self):
        if sorted(self.sequence) != list(range(1, len(self.sequence) + 1)):
            raise ValueError("preload order must be a permutation of 1..N")
        if not self.reordered_set:
            moved = frozenset(op for k, op in enumerate(self.sequence, start=1) if op != k)
            object.__setattr__(self, "reordered_set", moved)

    @property
    def permutation(self) -> dict:
        """op id -> preload position (0-based)."""
        return {op: k for k, op in enumerate(self.sequence)}


def in_order(n: int) -> PreloadOrder:
    return PreloadOrder(tuple(range(1, n + 1)))


@dataclass
class OrderSearchTree:
    """Backward suffix tree over one layer; ``leaves`` collects complete orders."""

    ops: tuple[int, ...]  # layer op ids in execution order
    heavy: frozenset
    exec_min: dict
    pre_min: dict
    capacity: float
    leaves: list = field(default_factory=list)
    nodes: int = 0

    def _ok(self, x, y0, unplaced) -> bool:
        # operators in [x, y0) now have their laziest count fixed: everything
        # still unplaced and later than i must sit beside i's execution
        tail = sum(self.pre_min[j] for j in unplaced if j >= y0)
        for i in range(y0 - 1, x - 1, -1):
            # i itself is resident in its preload layout until it swaps to execute
            if max(self.exec_min[i], self.pre_min[i]) + tail > self.capacity * (1 + 1e-12):
                return False
            if i in unplaced:
                tail += self.pre_min[i]
        return True

    def build(self, limit=None) -> list[tuple[int, ...]]:
        """Valid orders, sorted; with ``limit``, the first ``limit`` found by the search."""
        n = len(self.ops)
        slots = [op in self.heavy for op in self.ops]
        suffix = [0] * n
        self.leaves = []

        def grow(k, unplaced, y0, heavy_left):
            self.nodes += 1
            if limit is not None and len(self.leaves) >= limit:
                return
            if k < 0:
                self.leaves.append(tuple(suffix))
                return
            cands = sorted(heavy_left) if slots[k] else [self.ops[k]]
            for x in cands:
                rest = unplaced - {x}
                if x < y0 and not self._ok(x, y0, rest):
                    continue
                suffix[k] = x
                grow(k - 1, rest, min(x, y0), heavy_left - {x} if slots[k] else heavy_left)

        grow(n - 1, frozenset(self.ops), self.ops[-1] + 1, frozenset(op for op in self.ops if op in self.heavy))
        self.leaves.sort()
        return self.leaves


def enumerate_layer_orders(ops: Sequence[int], heavy, exec_min, pre_min, capacity, limit=None) -> list[tuple[int, ...]]:
    tree = OrderSearchTree(tuple(ops), frozenset(heavy), exec_min, pre_min, capacity)
    return tree.build(limit)


def _min_footprints(curves):
    exec_min = {oc.op_id: oc.min_exec_memory for oc in curves.ops}
    pre_min = {oc.op_id: oc.min_preload_memory for oc in curves.ops}
    return exec_min, pre_min


def group_candidates(g: ModelGraph, heavy: HbmHeavySet, layers, curves, limit=None) -> list[list[tuple[int, ...]]]:
    """Valid permutations of each group's representative layer, lexicographic.

    ``limit`` stops the tree search early for layers with many heavy operators.
    """
    exec_min, pre_min = _min_footprints(curves)
    out = []
    for group in layers:
        start, end = g.layer_boundaries[group[0]]
        ops = list(range(start, end + 1))
        out.append(enumerate_layer_orders(ops, heavy.ids, exec_min, pre_min, curves.capacity, limit))
    return out


def apply_layer_orders(g: ModelGraph, layers, choice) -> tuple[int, ...]:
    """Full preload sequence with ``choice[k]`` replicated over group k's layers."""
    seq = list(range(1, g.num_operators + 1))
    for group, perm in zip(layers, choice):
        base = g.layer_boundaries[group[0]][0]
        for li in group:
            start, _ = g.layer_boundaries[li]
            for off, op in enumerate(perm):
                seq[start - 1 + off] = start + (op - base)
    return tuple(seq)


def enumerate_valid_orders(g: ModelGraph, heavy: HbmHeavySet, layers, curves, max_orders=None) -> list[PreloadOrder]:
    """Candidate orders: the in-order sequence first, then single-group variations.

    Groups are varied one at a time with the others in order; the search
    driver explores combinations by coordinate descent.
    """
    cands = group_candidates(g, heavy, layers, curves, None if max_orders is None else max(1, max_orders))
    base = [tuple(range(g.layer_boundaries[grp[0]][0], g.layer_boundaries[grp[0]][1] + 1)) for grp in layers]
    seen = {apply_layer_orders(g, layers, base)}
    out = [PreloadOrder(next(iter(seen)))]
    for k, perms in enumerate(cands):
        for perm in perms:
            choice = list(base)
            choice[k] = perm
            seq = apply_layer_orders(g, layers, choice)
            if seq not in seen:
                seen.add(seq)
                out.append(PreloadOrder(seq))
    if max_orders is not None:
        out = out[:max(1, max_orders)]
    return out


def edit_distance(a: Sequence, b: Sequence) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]


def mean_layer_edit_distance(g: ModelGraph, sequence: Sequence[int]) -> float:
    if not g.layer_boundaries:
        return 0.0
    dists = []
    for start, end in g.layer_boundaries:
        dists.append(edit_distance(sequence[start - 1:end], list(range(start, end + 1))))
    return sum(dists) / len(dists)


def search_best_order(g: ModelGraph, curves, max_orders=None, reorder=True, scheduler="full") -> EndToEndPlan:
    """Schedule candidate orders and keep the fastest plan.

    One identical-layer group is varied at a time (coordinate descent), each
    starting from the best combination found so far.  Ties go to the
    lexicographically smallest sequence.  ``max_orders`` caps the number of
    orders scheduled per group.
    """
    heavy = classify_hbm_heavy(g)
    layers = detect_identical_layers(g) if g.layer_boundaries else []
    alloc = _AllocCache(curves)
    base = [tuple(range(g.layer_boundaries[grp[0]][0], g.layer_boundaries[grp[0]][1] + 1)) for grp in layers]
    choice = list(base)
    evaluated = {}
    per_order_invocations = []
    failures = 0

    def run(seq):
        nonlocal failures
        if seq in evaluated:
            return evaluated[seq]
        try:
            plan = schedule_model(seq, curves, scheduler, alloc)
        except SchedulingInfeasible:
            failures += 1
            plan = None
        evaluated[seq] = plan
        if plan is not None:
            per_order_invocations.append(plan.stats["alloc_invocations"])
        return plan

    best_seq = apply_layer_orders(g, layers, choice) if layers else tuple(range(1, g.num_operators + 1))
    best = run(best_seq)
    cand_counts = []
    if reorder and layers:
        cands = group_candidates(g, heavy, layers, curves, None if max_orders is None else max(1, max_orders))
        for k, perms in enumerate(cands):
            if max_orders is not None:
                perms = perms[:max(1, max_orders)]
            cand_counts.append(len(perms))
            for perm in perms:
                trial = list(choice)
                trial[k] = perm
                seq = apply_layer_orders(g, layers, trial)
                plan = run(seq)
                if plan is None:
                    continue
                if best is None or (plan.t_end, seq) < (best.t_end, best_seq):
                    best, best_seq = plan, seq
                    choice = trial
    if best is None:
        raise SchedulingInfeasible(0, "no candidate preload order admits a feasible schedule")
    heavy_per_layer = [sum(1 for op in range(g.layer_boundaries[grp[0]][0], g.layer_boundaries[grp[0]][1] + 1)
                           if op in heavy.ids) for grp in layers]
    stats = dict(best.stats)
    stats.update({
        "candidate_orders": len(evaluated),
        "candidates_per_group": cand_counts or [1],
        "heavy_per_group": heavy_per_layer,
        "infeasible_orders": failures,
        "alloc_invocations_max_per_order": max(per_order_invocations) if per_order_invocations else 0,
        "mean_edit_distance": mean_layer_edit_distance(g, best_seq),
    })
    return EndToEndPlan(best.preload_order, best.schedules, best.t_start, best.t_end, best.occupancy,
                        best.capacity, scheduler, stats)

