# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

from .errors import (ConfigError, ConsistencyError, ConvergenceError, DomainError, FeasibilityError,
                     NumericalIntegrityError, RootBracketError, SingularityError, SolverError)
from .logger import Logger
from .market import (Feasibility, FeasibilityReport, FreeBoundaries, MarketParams, Position, Region, TargetInterval,
                     WealthBound)
from .stationary import StationaryBoundary, StationaryParams
from .obstacle_pde import GridConfig, ObstacleSolution, ObstacleSolver, PdeGrid, SolverConfig
from .value_function import ValueFunction
from .mv_solver import FrontierPoint, MeanVarianceSolver, MVSolution, TargetSpec
from .skorokhod import PathState, SimulationConfig, SimulationReport, SkorokhodSimulator, StepCounters
from .settings import RunSettings, SettingsManager
from .results_writer import ResultsWriter
