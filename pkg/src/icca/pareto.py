"""Memory-vs-time Pareto frontiers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable


@dataclass(frozen=True)
class ParetoPoint:
    memory: float
    time: float
    plan: Any = None
    plan_id: int = 0


@dataclass(frozen=True)
class ParetoCurve:
    """Non-dominated points, memory descending (so fastest first)."""

    points: tuple[ParetoPoint, ...]

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def __iter__(self):
        return iter(self.points)

    @property
    def fastest(self) -> ParetoPoint:
        return self.points[0]

    @property
    def smallest(self) -> ParetoPoint:
        return self.points[-1]


def pareto_frontier(points: Iterable[ParetoPoint]) -> ParetoCurve:
    """Keep points that are strictly faster than every point using no more memory.

    Exact duplicates on both axes collapse to the lowest ``plan_id``.
    """
    pts = list(points)
    if not pts:
        raise ValueError("pareto_frontier needs at least one point")
    pts.sort(key=lambda p: (p.memory, p.time, p.plan_id))
    kept = []
    best = float("inf")
    for p in pts:
        if p.time < best:
            kept.append(p)
            best = p.time
    kept.reverse()
    return ParetoCurve(tuple(kept))


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return a.memory <= b.memory and a.time <= b.time and (a.memory < b.memory or a.time < b.time)
