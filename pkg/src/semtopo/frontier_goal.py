"""Frontier scoring: a normalized metric cost minus a semantic gain."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .semantic_topo import FrontierGoal


@dataclass(frozen=True)
class GoalWeights:
    w_v: float = 4.0   # per radian of initial turn
    w_p: float = 0.2   # per meter from the frontier to its intersection
    w_I: float = 0.1   # per opening / frontier pathway at that intersection

    def __post_init__(self):
        if min(self.w_v, self.w_p, self.w_I) < 0:
            raise ValueError("goal weights must be non-negative")


@dataclass(frozen=True)
class CostBreakdown:
    d: float
    v: float
    c_metric: float
    g_semantic: float
    total: float


def metric_cost(d: float, v: float, weights: GoalWeights, l_path: float) -> float:
    if l_path <= 0:
        raise ValueError("L_path must be positive")
    return d / l_path + weights.w_v * v


def semantic_gain(goal: FrontierGoal, weights: GoalWeights) -> float:
    return weights.w_p * goal.p_l + weights.w_I * (goal.openings + goal.frontier_pathways)


def score(goal: FrontierGoal, path, weights: GoalWeights, l_path: float) -> CostBreakdown:
    """Cost of reaching ``goal`` along ``path`` (anything with ``length`` and ``initial_turn``)."""
    d = float(path.length)
    v = abs(float(path.initial_turn))
    c = metric_cost(d, v, weights, l_path)
    g = semantic_gain(goal, weights)
    return CostBreakdown(d, v, c, g, c - g)


def select_optimal(scored: Sequence[Tuple[FrontierGoal, CostBreakdown]]) -> FrontierGoal:
    """Goal with the lowest total; ties go to the shorter path, then the lower id.

    An empty list means nothing is left to explore.
    """
    if not scored:
        raise LookupError("no frontier goals: exploration complete")
    return min(scored, key=lambda gc: (gc[1].total, gc[1].d, gc[0].id))[0]


def rank(scored: Sequence[Tuple[FrontierGoal, CostBreakdown]]) -> List[Tuple[FrontierGoal, CostBreakdown]]:
    return sorted(scored, key=lambda gc: (gc[1].total, gc[1].d, gc[0].id))
