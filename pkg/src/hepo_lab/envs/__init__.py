from .chain import SparseChain
from .grid import GridGoal
from .heuristics import FAMILIES, HeuristicSpec
from .point_mass import PointMass
from .tabular import (
    TabularMdp,
    discounted_occupancy,
    exact_advantage,
    exact_q,
    policy_evaluation,
    policy_return,
    reward_table,
    to_tabular,
    value_iteration,
)

__all__ = [
    "SparseChain",
    "GridGoal",
    "PointMass",
    "HeuristicSpec",
    "FAMILIES",
    "TabularMdp",
    "to_tabular",
    "value_iteration",
    "policy_evaluation",
    "exact_advantage",
    "exact_q",
    "discounted_occupancy",
    "policy_return",
    "reward_table",
]
