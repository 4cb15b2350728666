from src.dynamics.abc import OpinionSystemBase, StateLayout, SystemBase
from src.dynamics.clusters import cluster_means, distance_to_cluster_manifold
from src.dynamics.equilibria import (
    BranchPoint,
    EquilibriumReport,
    find_equilibrium,
    reduced_jacobian,
    stability,
    sweep_bifurcation,
)
from src.dynamics.integrate import InputSchedule, ScheduleSegment, Trajectory, integrate, integrate_final
from src.dynamics.systems import OpinionSystem, TensorSystem, TwoOptionSystem, opinion_system

__all__ = [
    "BranchPoint",
    "EquilibriumReport",
    "InputSchedule",
    "OpinionSystem",
    "OpinionSystemBase",
    "ScheduleSegment",
    "StateLayout",
    "SystemBase",
    "TensorSystem",
    "Trajectory",
    "TwoOptionSystem",
    "cluster_means",
    "distance_to_cluster_manifold",
    "find_equilibrium",
    "integrate",
    "integrate_final",
    "opinion_system",
    "reduced_jacobian",
    "stability",
    "sweep_bifurcation",
]
