# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import json
import os
from os import path
from typing import Any, Optional

from .errors import ConfigError, DomainError
from .market import MarketParams, Position
from .obstacle_pde import GridConfig, SolverConfig
from .skorokhod import SimulationConfig


class RunSettings:
    """
    Run configuration: market, position, targets and the grid, penalty, Monte Carlo and frontier blocks
    """

    MARKET_FIELDS: dict[str, str] = {
        "r": "r_per_year",
        "alpha": "alpha_per_year",
        "sigma": "sigma_per_sqrt_year",
        "lam": "buy_fee_fraction",
        "mu": "sell_fee_fraction",
        "T": "horizon_years"
    }
    DEFAULT_OUTPUT_DIR: str = "results"

    def __init__(self, solver_json: dict[str, Any]):
        # Read stuff from params
        self.solver_json: dict[str, Any] = solver_json

        # Define config
        self.market: dict[str, float] = {}
        self.bond_dollars: float = 0.0
        self.stock_dollars: float = 0.0
        self.targets: list[float] = []
        self.grid: GridConfig = GridConfig()
        self.penalty: SolverConfig = SolverConfig()
        self.mc: Optional[SimulationConfig] = None
        self.frontier_points: int = 0
        self.frontier_z_max: Optional[float] = None
        self.output_dir: str = os.environ.get(SettingsManager.OUTPUT_DIR_ENV, self.DEFAULT_OUTPUT_DIR)

    def market_params(self) -> MarketParams:
        """
        Validated market parameters
        """
        try:
            return MarketParams(**self.market)
        except (DomainError, TypeError) as e:
            raise ConfigError(f"invalid market block: {e}") from e

    def position(self) -> Position:
        return Position(x=self.bond_dollars, y=self.stock_dollars)

    @classmethod
    def _number(cls, block: dict[str, Any], key: str, where: str) -> float:
        if key not in block:
            raise ConfigError(f"missing {where}.{key}")
        value: Any = block[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}.{key} must be a number, got {value!r}")
        return float(value)

    @classmethod
    def _block(cls, data: dict[str, Any], key: str) -> dict[str, Any]:
        block: Any = data.get(key) or {}
        if not isinstance(block, dict):
            raise ConfigError(f"{key} must be an object")
        return block

    def load_json(self, data: dict[str, Any]) -> None:
        """
        Load from json
        """
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")

        market: dict[str, Any] = self._block(data, "market")
        self.market = {name: self._number(market, key, "market") for name, key in self.MARKET_FIELDS.items()}
        self.market_params()

        position: dict[str, Any] = self._block(data, "position")
        self.bond_dollars = self._number(position, "bond_dollars", "position")
        self.stock_dollars = self._number(position, "stock_dollars", "position")

        targets: Any = data.get("targets_dollars", [])
        if not isinstance(targets, list):
            raise ConfigError("targets_dollars must be a list")
        self.targets = [self._number({"z": z}, "z", "targets_dollars") for z in targets]

        try:
            grid: dict[str, Any] = self._block(data, "grid")
            self.grid = GridConfig(n_z=int(grid.get("n_z", 800)), n_t=int(grid.get("n_t", 2000)),
                                   z_max_factor=float(grid.get("z_max_factor", 50.0)))

            penalty: dict[str, Any] = self._block(data, "penalty")
            K: Any = penalty.get("K")
            self.penalty = SolverConfig(K=None if K is None else float(K),
                                        newton_tol=float(penalty.get("newton_tol", 1e-10)),
                                        newton_max=int(penalty.get("newton_max", 50)),
                                        max_domain_extensions=int(penalty.get("max_domain_extensions", 3)),
                                        damping_halvings=int(penalty.get("damping_halvings", 10)))

            mc: Any = data.get("mc")
            self.mc = None
            if mc is not None:
                mc = self._block(data, "mc")
                self.mc = SimulationConfig(n_paths=int(mc.get("n_paths", 100000)),
                                           n_steps=int(mc.get("n_steps", 2000)),
                                           seed=int(mc.get("seed", 20240101)),
                                           batch_size=int(mc.get("batch_size", 20000)),
                                           normal_method=str(mc.get("normal_method", "ziggurat")),
                                           trace_paths=int(mc.get("trace_paths", 0)))

            frontier: dict[str, Any] = self._block(data, "frontier")
            self.frontier_points = int(frontier.get("n_points", 0))
            z_max: Any = frontier.get("z_max_dollars")
            self.frontier_z_max = None if z_max is None else float(z_max)
        except (DomainError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid configuration: {e}") from e
        if self.frontier_points < 0:
            raise ConfigError("frontier.n_points must be non-negative")

        output_dir: Any = data.get("outputs")
        if output_dir is not None:
            self.output_dir = str(output_dir)

    def to_json(self) -> dict[str, Any]:
        """
        Parse to json
        """
        return {
            "market": {key: self.market.get(name) for name, key in self.MARKET_FIELDS.items()},
            "position": {"bond_dollars": self.bond_dollars, "stock_dollars": self.stock_dollars},
            "targets_dollars": list(self.targets),
            "grid": {"n_z": self.grid.n_z, "n_t": self.grid.n_t, "z_max_factor": self.grid.z_max_factor},
            "penalty": {
                "K": self.penalty.K,
                "newton_tol": self.penalty.newton_tol,
                "newton_max": self.penalty.newton_max,
                "max_domain_extensions": self.penalty.max_domain_extensions,
                "damping_halvings": self.penalty.damping_halvings
            },
            "mc": None if self.mc is None else {
                "n_paths": self.mc.n_paths,
                "n_steps": self.mc.n_steps,
                "seed": self.mc.seed,
                "batch_size": self.mc.batch_size,
                "normal_method": self.mc.normal_method,
                "trace_paths": self.mc.trace_paths
            },
            "frontier": {"n_points": self.frontier_points, "z_max_dollars": self.frontier_z_max},
            "outputs": self.output_dir
        }


class SettingsManager:
    """
    Run settings manager
    """

    OUTPUT_DIR_ENV: str = "MVTC_OUTPUT_DIR"
    SOLVER_JSON_PATH: str = path.abspath(path.join(path.dirname(path.realpath(__file__)), "..", "solver.json"))

    _settings: Optional[RunSettings] = None

    @classmethod
    def get_settings(cls) -> RunSettings:
        """
        Get the settings instance
        """
        if not cls._settings:
            raise ConfigError("no configuration loaded")
        return cls._settings

    @classmethod
    def load(cls, file_path: str) -> RunSettings:
        """
        Load settings from a JSON config file
        """
        try:
            with open(file_path, "r") as file:
                data: Any = json.load(file)
        except OSError as e:
            raise ConfigError(f"cannot read configuration {file_path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"configuration {file_path} is not valid JSON: {e}") from e

        settings: RunSettings = RunSettings(solver_json=cls.read_solver_json())
        settings.load_json(data=data)
        cls._settings = settings
        return settings

    @classmethod
    def save(cls, file_path: str) -> None:
        """
        Save settings
        """
        data: dict[str, Any] = cls.get_settings().to_json()
        with open(file_path, "w") as file:
            json.dump(data, file, indent=2, allow_nan=False)

    @classmethod
    def read_solver_json(cls) -> dict[str, Any]:
        """
        Read the solver json
        """
        with open(cls.SOLVER_JSON_PATH, "r") as file:
            return json.load(file)
