"""Backbone methods for mixed-integer learning problems with indicator variables.

A backbone run screens the indicators, solves many small subproblems
heuristically, keeps the indicators they find relevant and solves the problem
restricted to that set exactly.
"""

from .bench import ExperimentReport, ExperimentSpec, run_benchmark
from .clustering import BackboneClustering, ClusterAssignment, KMeansClustering, fit_exact_clustering, silhouette_score
from .core import BackboneConfig, BackboneResult, BackboneSolver, IterationRecord, run_backbone
from .exceptions import (BackboneError, InfeasibleError, InvalidInputError, SolverError, SolverScaleError,
                         UndefinedMetricError)
from .mio import BinaryProgram, LinearProgram, MioSolution, ProgramBuilder, solve_bip, solve_lp
from .regression import BackboneSparseRegression, RegressionModel, SparseRegression, r_squared
from .trees import BackboneDecisionTree, DecisionTree, TreeModel, auc

__version__ = "0.1.0"

__all__ = [
    "BackboneClustering", "BackboneConfig", "BackboneDecisionTree", "BackboneError", "BackboneResult",
    "BackboneSolver", "BackboneSparseRegression", "BinaryProgram", "ClusterAssignment", "DecisionTree",
    "ExperimentReport", "ExperimentSpec", "InfeasibleError", "InvalidInputError", "IterationRecord",
    "KMeansClustering", "LinearProgram", "MioSolution", "ProgramBuilder", "RegressionModel", "SolverError",
    "SolverScaleError", "SparseRegression", "TreeModel", "UndefinedMetricError", "auc",
    "fit_exact_clustering", "r_squared", "run_backbone", "run_benchmark", "silhouette_score", "solve_bip",
    "solve_lp",
]
