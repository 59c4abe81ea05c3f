# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import json
import math
import os
from os import path
from typing import Any, Optional

import pandas as pd

from .market import FeasibilityReport, FreeBoundaries
from .mv_solver import FrontierPoint, MVSolution
from .skorokhod import SimulationReport


class ResultsWriter:
    """
    Writes the JSON and CSV artifacts of a run; infinities become null in JSON and -inf in CSV
    """

    FLOAT_FORMAT: str = "%.12g"
    SCHEMA: dict[str, Any] = {
        "feasibility.json": {
            "generated_by": "object {name, id, version} of the solver",
            "t_star_years": "critical horizon ln((1+lambda)/(1-mu))/(alpha-r)",
            "z_hat_dollars": "supremum expected terminal wealth, null when unbounded",
            "z_hat_infinite": "true when the supremum is +infinity",
            "z_interval": "admissible targets {empty, lower, lower_closed, upper (null = +inf), upper_closed}"
        },
        "boundaries.csv": {
            "t": "time in years, increasing",
            "x_s_star": "sell boundary (bond/stock ratio), nonincreasing in t",
            "x_b_star": "buy boundary (bond/stock ratio), -inf once buying stops"
        },
        "solution.json": {
            "generated_by": "object {name, id, version} of the solver",
            "solutions": "list, one entry per target: z_dollars, ell_star_dollars, adjusted_initial, "
                         "initial_trade_dollars (positive = buy), post_trade, variance_dollars2, stay_put, region, "
                         "boundary_checksum, multiplier_residual, bracket_width_dollars",
            "errors": "list of {z_dollars, error} for targets that could not be solved"
        },
        "frontier.csv": {
            "z": "target expected terminal wealth (dollars)",
            "variance": "minimal variance of terminal wealth (dollars^2), empty when unsolved",
            "ell_star": "Lagrange multiplier (dollars), empty when unsolved",
            "error": "failure message, empty on success"
        },
        "mc_report.json": {
            "generated_by": "object {name, id, version} of the solver",
            "reports": "list, one entry per target: z_dollars plus the Monte Carlo estimates with 95% half-widths "
                       "and event counters"
        },
        "trace.csv": {
            "path": "path index within the first batch",
            "t": "time in years",
            "X": "adjusted bond dollars",
            "Y": "stock dollars",
            "M": "cumulative purchases (dollars of stock)",
            "N": "cumulative sales (dollars of stock)"
        },
        "grid.csv": {
            "t": "time in years",
            "z": "log(-x)",
            "u": "obstacle solution v(t, -e^z)"
        }
    }

    @classmethod
    def _clean(cls, value: Any) -> Any:
        """
        Replace non-finite floats by None, recursively
        """
        if isinstance(value, float) and not math.isfinite(value):
            return None
        if isinstance(value, dict):
            return {key: cls._clean(item) for key, item in value.items()}
        if isinstance(value, (list, tuple)):
            return [cls._clean(item) for item in value]
        return value

    @classmethod
    def _stamp(cls, solver_json: dict[str, Any]) -> dict[str, Any]:
        return {key: solver_json.get(key) for key in ("name", "id", "version")}

    @classmethod
    def write_json(cls, output_dir: str, file_name: str, data: dict[str, Any]) -> str:
        os.makedirs(output_dir, exist_ok=True)
        file_path: str = path.join(output_dir, file_name)
        with open(file_path, "w") as file:
            json.dump(cls._clean(data), file, indent=2, sort_keys=True, allow_nan=False)
            file.write("\n")
        return file_path

    @classmethod
    def write_frame(cls, output_dir: str, file_name: str, frame: pd.DataFrame) -> str:
        os.makedirs(output_dir, exist_ok=True)
        file_path: str = path.join(output_dir, file_name)
        frame.to_csv(file_path, index=False, float_format=cls.FLOAT_FORMAT)
        return file_path

    @classmethod
    def write_feasibility(cls, output_dir: str, report: FeasibilityReport, solver_json: dict[str, Any]) -> str:
        data: dict[str, Any] = report.to_json()
        data["generated_by"] = cls._stamp(solver_json)
        return cls.write_json(output_dir, "feasibility.json", data)

    @classmethod
    def write_boundaries(cls, output_dir: str, bounds: FreeBoundaries) -> str:
        return cls.write_frame(output_dir, "boundaries.csv", bounds.to_frame())

    @classmethod
    def write_solutions(cls, output_dir: str, solutions: list[MVSolution], errors: list[tuple[float, str]],
                        solver_json: dict[str, Any]) -> str:
        return cls.write_json(output_dir, "solution.json", {
            "generated_by": cls._stamp(solver_json),
            "solutions": [solution.to_json() for solution in solutions],
            "errors": [{"z_dollars": z, "error": message} for z, message in errors]
        })

    @classmethod
    def write_frontier(cls, output_dir: str, points: list[FrontierPoint]) -> str:
        frame: pd.DataFrame = pd.DataFrame({
            "z": [p.z for p in points],
            "variance": [p.variance for p in points],
            "ell_star": [p.ell_star for p in points],
            "error": [p.error or "" for p in points]
        })
        return cls.write_frame(output_dir, "frontier.csv", frame)

    @classmethod
    def write_mc_reports(cls, output_dir: str, reports: list[tuple[float, SimulationReport]],
                         solver_json: dict[str, Any]) -> str:
        return cls.write_json(output_dir, "mc_report.json", {
            "generated_by": cls._stamp(solver_json),
            "reports": [dict(report.to_json(), z_dollars=z) for z, report in reports]
        })

    @classmethod
    def write_trace(cls, output_dir: str, trace: Optional[pd.DataFrame]) -> Optional[str]:
        if trace is None:
            return None
        return cls.write_frame(output_dir, "trace.csv", trace)

    @classmethod
    def write_schema(cls, output_dir: str, solver_json: dict[str, Any]) -> str:
        return cls.write_json(output_dir, "schema.json", {"generated_by": cls._stamp(solver_json), "files": cls.SCHEMA})
