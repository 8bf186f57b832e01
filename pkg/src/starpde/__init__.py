"""Finite-difference solver for parabolic equations on star networks with
Kirchhoff junction conditions, including the local-time variant in which the
junction value evolves in an extra variable l."""

from .network import GridSpec, NetworkField, SolutionCube, StarNetwork, build_grid
from .problem import ClassicalProblemData, ProblemData, load_problem
from .localtime import run_backward
from .rothe import march_classical

__all__ = [
    "ClassicalProblemData",
    "GridSpec",
    "NetworkField",
    "ProblemData",
    "SolutionCube",
    "StarNetwork",
    "build_grid",
    "load_problem",
    "march_classical",
    "run_backward",
]
