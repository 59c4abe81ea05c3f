# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import pytest

from mv_transaction_costs.tools import (GridConfig, MarketParams, MeanVarianceSolver, SolverConfig, StationaryBoundary,
                                        StationaryParams, ValueFunction)


@pytest.fixture(scope="session")
def example_params() -> MarketParams:
    """
    Worked-example market: alpha 0.15, r 0.05, sigma 0.2, fees 2% each way, two years
    """
    return MarketParams(r=0.05, alpha=0.15, sigma=0.2, lam=0.02, mu=0.02, T=2.0)


@pytest.fixture(scope="session")
def short_params() -> MarketParams:
    """
    Same market with T = 0.2, below the critical horizon
    """
    return MarketParams(r=0.05, alpha=0.15, sigma=0.2, lam=0.02, mu=0.02, T=0.2)


@pytest.fixture(scope="session")
def coarse_grid() -> GridConfig:
    return GridConfig(n_z=200, n_t=400, z_max_factor=50.0)


@pytest.fixture(scope="session")
def example_stationary(example_params: MarketParams) -> StationaryParams:
    return StationaryBoundary.solve_k_star(example_params)


@pytest.fixture(scope="session")
def coarse_vf(example_params: MarketParams, coarse_grid: GridConfig) -> ValueFunction:
    """
    One coarse solve of the worked example, shared by the whole session
    """
    return MeanVarianceSolver.build_value_function(example_params, coarse_grid, SolverConfig())


@pytest.fixture(scope="session")
def short_vf(short_params: MarketParams) -> ValueFunction:
    return MeanVarianceSolver.build_value_function(short_params, GridConfig(n_z=150, n_t=100), SolverConfig())


@pytest.fixture()
def short_config() -> dict:
    """
    Small run configuration on the short-horizon market
    """
    return {
        "market": {
            "r_per_year": 0.05,
            "alpha_per_year": 0.15,
            "sigma_per_sqrt_year": 0.2,
            "buy_fee_fraction": 0.02,
            "sell_fee_fraction": 0.02,
            "horizon_years": 0.2
        },
        "position": {"bond_dollars": 0.0, "stock_dollars": 1.0},
        "targets_dollars": [1.0],
        "grid": {"n_z": 150, "n_t": 100},
        "penalty": {"K": None},
        "mc": None,
        "frontier": {"n_points": 0}
    }
