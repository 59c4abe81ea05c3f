# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

from os import path
from typing import Optional

import numpy as np

from .tools import (Feasibility, FeasibilityError, FeasibilityReport, FrontierPoint, Logger, MarketParams,
                    MeanVarianceSolver, MVSolution, NumericalIntegrityError, ResultsWriter, RunSettings,
                    SimulationReport, SkorokhodSimulator, TargetSpec, ValueFunction)


class MeanVarianceTransactionCosts:
    """
    Main class of the solver: runs the pipeline for one configuration and writes the artifacts
    """

    PLOT_FRONTIER_POINTS: int = 20

    def __init__(self, settings: RunSettings, output_dir: Optional[str] = None, dump_grid: bool = False) -> None:
        self.settings: RunSettings = settings
        self.output_dir: str = output_dir or settings.output_dir
        self.dump_grid: bool = dump_grid

        self.solver_json: dict = settings.solver_json

    def _feasibility(self, params: MarketParams) -> FeasibilityReport:
        report: FeasibilityReport = Feasibility.feasible_targets(self.settings.position(), params)
        ResultsWriter.write_feasibility(self.output_dir, report, self.solver_json)
        Logger.log("i", f"T*={report.t_star:.6f}, admissible targets {report.z_interval.describe()}")
        return report

    def _value_function(self, params: MarketParams) -> ValueFunction:
        Logger.log("i", f"Solving the obstacle problem on {self.settings.grid.n_z} x {self.settings.grid.n_t} nodes")
        vf: ValueFunction = MeanVarianceSolver.build_value_function(params, self.settings.grid, self.settings.penalty)
        ResultsWriter.write_boundaries(self.output_dir, vf.boundaries)
        if self.dump_grid:
            vf.solution.to_grid_csv(path.join(self.output_dir, "grid.csv"))
        return vf

    def _frontier_targets(self, report: FeasibilityReport, n_points: int) -> list[float]:
        """
        Evenly spaced targets above the all-bond value, up to z_max_dollars, the supremum or lower + 1
        """
        interval = report.z_interval
        if interval.empty or n_points <= 0:
            return []
        upper: float
        if self.settings.frontier_z_max is not None:
            upper = self.settings.frontier_z_max
        elif interval.upper is not None:
            upper = interval.upper
        else:
            upper = interval.lower + 1.0
        return [float(z) for z in np.linspace(interval.lower, upper, n_points + 1)[1:]]

    def _frontier(self, params: MarketParams, report: FeasibilityReport, vf: ValueFunction,
                  n_points: int) -> list[FrontierPoint]:
        targets: list[float] = self._frontier_targets(report, n_points)
        points: list[FrontierPoint] = MeanVarianceSolver.efficient_frontier(self.settings.position(), targets, params,
                                                                            vf=vf)
        ResultsWriter.write_frontier(self.output_dir, points)
        return points

    def run_solve(self) -> int:
        """
        Feasibility, boundaries, one solution per target, optional frontier and Monte Carlo check
        """
        params: MarketParams = self.settings.market_params()
        report: FeasibilityReport = self._feasibility(params)

        # Reject infeasible targets before the PDE solve
        for z in self.settings.targets:
            if not report.z_interval.contains(z):
                raise FeasibilityError(f"target z={z} outside the admissible interval {report.z_interval.describe()}",
                                       interval=report.z_interval)

        vf: ValueFunction = self._value_function(params)
        solutions: list[MVSolution] = []
        errors: list[tuple[float, str]] = []
        for z in self.settings.targets:
            target: TargetSpec = TargetSpec(initial=self.settings.position(), z=z)
            try:
                solutions.append(MeanVarianceSolver.solve(target, params, vf=vf))
            except NumericalIntegrityError as e:
                Logger.log("w", f"Target z={z} failed: {e}")
                errors.append((z, str(e)))
        ResultsWriter.write_solutions(self.output_dir, solutions, errors, self.solver_json)

        if self.settings.frontier_points > 0:
            self._frontier(params, report, vf, self.settings.frontier_points)

        if self.settings.mc is not None:
            reports: list[tuple[float, SimulationReport]] = []
            for solution in solutions:
                if solution.stay_put:
                    continue
                Logger.log("i", f"Simulating {self.settings.mc.n_paths} paths for z={solution.z}")
                simulation: SimulationReport = SkorokhodSimulator.simulate(
                    solution.post_trade, solution.ell_star, solution.z, vf.boundaries, params, self.settings.mc,
                    expected_variance=solution.variance)
                if not reports:
                    ResultsWriter.write_trace(self.output_dir, simulation.trace)
                reports.append((solution.z, simulation))
            ResultsWriter.write_mc_reports(self.output_dir, reports, self.solver_json)

        ResultsWriter.write_schema(self.output_dir, self.solver_json)
        Logger.log("i", f"Results written to {self.output_dir}")
        if errors:
            raise NumericalIntegrityError(f"{len(errors)} of {len(self.settings.targets)} targets failed, "
                                          "see solution.json")
        return 0

    def run_plotdata(self) -> int:
        """
        Boundaries and a frontier sweep for external plotting
        """
        params: MarketParams = self.settings.market_params()
        report: FeasibilityReport = self._feasibility(params)
        if report.z_interval.empty:
            raise FeasibilityError("no admissible targets: the frontier is empty", interval=report.z_interval)

        vf: ValueFunction = self._value_function(params)
        n_points: int = self.settings.frontier_points or self.PLOT_FRONTIER_POINTS
        self._frontier(params, report, vf, n_points)
        ResultsWriter.write_schema(self.output_dir, self.solver_json)
        Logger.log("i", f"Plot data written to {self.output_dir}")
        return 0
