# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import json
import math

from mv_transaction_costs.tools import Feasibility, FrontierPoint, Position, ResultsWriter


def test_non_finite_values_become_null(tmp_path):
    file_path: str = ResultsWriter.write_json(str(tmp_path), "values.json",
                                              {"a": math.inf, "b": [1.0, -math.inf, math.nan], "c": {"d": 2.0}})
    assert json.loads(open(file_path).read()) == {"a": None, "b": [1.0, None, None], "c": {"d": 2.0}}


def test_unbounded_feasibility(tmp_path, example_params):
    report = Feasibility.feasible_targets(Position(-1.0, 1.0), example_params)
    ResultsWriter.write_feasibility(str(tmp_path), report, {"name": "solver", "id": "x", "version": "1.0.0"})
    data: dict = json.loads((tmp_path / "feasibility.json").read_text())
    assert data["z_hat_dollars"] is None
    assert data["z_hat_infinite"] is True
    assert data["z_interval"]["upper"] is None
    assert data["generated_by"] == {"name": "solver", "id": "x", "version": "1.0.0"}


def test_frontier_rows_keep_failures(tmp_path):
    points: list[FrontierPoint] = [FrontierPoint(z=0.5, variance=0.1, ell_star=2.0),
                                   FrontierPoint(z=-5.0, variance=None, ell_star=None, error="outside")]
    ResultsWriter.write_frontier(str(tmp_path), points)
    lines: list[str] = (tmp_path / "frontier.csv").read_text().splitlines()
    assert lines[0] == "z,variance,ell_star,error"
    assert lines[1] == "0.5,0.1,2,"
    assert lines[2] == "-5,,,outside"
