# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import math

import numpy as np
import pandas as pd
import pytest

from mv_transaction_costs.tools import (ConvergenceError, DomainError, MarketParams, ObstacleSolution, ObstacleSolver,
                                        PdeGrid, SingularityError, SolverConfig, StationaryBoundary)


def exact_operator(u: np.ndarray, u_z: np.ndarray, u_zz: np.ndarray, z: np.ndarray, params: MarketParams) -> np.ndarray:
    s2: float = params.sigma ** 2
    ez: np.ndarray = np.exp(z)
    return (0.5 * s2 * u_zz - (params.excess_return + 0.5 * s2) * u_z + (params.excess_return + s2) * u
            - s2 * (u_z ** 2 / u + 2.0 * ez * u_z / u - 2.0 * ez))


def test_build_grid(example_params, example_stationary):
    grid: PdeGrid = ObstacleSolver.build_grid(example_params, example_stationary, n_z=101, n_t=50, z_max_factor=50.0)
    assert abs(grid.z_min - math.log(-example_stationary.x_s_inf)) < 1e-14
    assert grid.z_max == pytest.approx(math.log(50.0 * abs(example_stationary.x_b_inf)), rel=1e-14)
    assert len(grid.z_nodes) == 101
    assert len(grid.t_nodes) == 51
    assert grid.t_nodes[-1] == example_params.T


@pytest.mark.parametrize("z_nodes, t_nodes", [
    ([0.0, 1.0], [0.0, 0.5, 1.0]),
    ([0.0, 1.0, 1.0], [0.0, 0.5, 1.0]),
    ([0.0, 1.0, 3.0], [0.0, 0.5, 1.0]),
    ([0.0, 1.0, 2.0], [0.0, 0.0, 1.0])
])
def test_grid_validation(z_nodes, t_nodes):
    with pytest.raises(DomainError):
        PdeGrid(z_nodes=np.array(z_nodes), t_nodes=np.array(t_nodes))


def test_grid_extension_keeps_spacing(example_params, example_stationary):
    grid: PdeGrid = ObstacleSolver.build_grid(example_params, example_stationary, n_z=101, n_t=10)
    extended: PdeGrid = grid.extended(math.log(4.0))
    assert extended.dz == pytest.approx(grid.dz, rel=1e-12)
    assert extended.z_min == grid.z_min
    assert extended.z_max >= grid.z_max + math.log(4.0) - 1e-12


def test_solver_config_validation():
    assert SolverConfig().penalty(1e-3) == pytest.approx(1e9)
    assert SolverConfig(K=5.0).penalty(1e-3) == 5.0
    with pytest.raises(DomainError):
        SolverConfig(K=0.0)
    with pytest.raises(DomainError):
        SolverConfig(newton_max=0)


def test_operator_on_constant(example_params):
    z: np.ndarray = np.linspace(0.2, 1.0, 9)
    c: float = -0.7
    value: np.ndarray = ObstacleSolver.spatial_operator(np.full(9, c), z, example_params)
    s2: float = example_params.sigma ** 2
    expected: np.ndarray = (example_params.excess_return + s2) * c + 2.0 * s2 * np.exp(z[1:-1])
    np.testing.assert_allclose(value, expected, rtol=1e-12)


def test_operator_on_terminal_obstacle_changes_sign_at_frictionless_ratio(example_params):
    z: np.ndarray = np.linspace(0.1, 1.5, 2801)
    lower: np.ndarray = -np.exp(z) + 1.0 - example_params.mu
    value: np.ndarray = ObstacleSolver.spatial_operator(lower, z, example_params)
    interior: np.ndarray = z[1:-1]
    crossing: float = float(interior[np.nonzero(value > 0)[0][0]])
    z_M: float = math.log(-(1.0 - example_params.mu) * example_params.x_M)
    assert abs(crossing - z_M) <= 2.0 * (z[1] - z[0])
    assert np.all(value[interior < z_M - 0.01] < 0)
    assert np.all(value[interior > z_M + 0.01] > 0)


def test_operator_second_order(example_params):
    z0: float = 0.9
    errors: list[float] = []
    for h in (0.02, 0.01):
        z: np.ndarray = z0 + h * np.arange(-2, 3)
        u: np.ndarray = -np.exp(z) + 0.98 - 0.1 * np.sin(z)
        u_z: np.ndarray = -np.exp(z) - 0.1 * np.cos(z)
        u_zz: np.ndarray = -np.exp(z) + 0.1 * np.sin(z)
        value: np.ndarray = ObstacleSolver.spatial_operator(u, z, example_params)
        errors.append(abs(value[1] - exact_operator(u, u_z, u_zz, z, example_params)[2]))
    assert 3.5 < errors[0] / errors[1] < 4.5


def test_operator_singularity(example_params):
    z: np.ndarray = np.linspace(0.2, 1.0, 5)
    with pytest.raises(SingularityError):
        ObstacleSolver.spatial_operator(np.array([-1.0, -0.5, 0.0, -0.5, -1.0]), z, example_params)


def synthetic_solution(params: MarketParams, grid: PdeGrid, i_a: int, i_b: int) -> np.ndarray:
    """
    u on the lower obstacle up to node i_a, on the upper one from node i_b, linear in between; terminal slice lower
    """
    lower, _ = ObstacleSolver.obstacles(grid, params)
    z_a, z_b = grid.z_nodes[i_a], grid.z_nodes[i_b]
    profile: np.ndarray = (params.lam + params.mu) * np.clip((grid.z_nodes - z_a) / (z_b - z_a), 0, 1)
    u: np.ndarray = np.tile(lower + profile, (len(grid.t_nodes), 1))
    u[-1] = lower
    return u


def test_extract_boundaries_synthetic(example_params, example_stationary):
    grid: PdeGrid = ObstacleSolver.build_grid(example_params, example_stationary, n_z=101, n_t=10)
    u: np.ndarray = synthetic_solution(example_params, grid, 1, 60)
    z_a, z_b = grid.z_nodes[1], grid.z_nodes[60]
    assert -math.exp(z_a) > 0.98 * -1.4

    repairs: list[str] = []
    x_s, x_b, T0 = ObstacleSolver.extract_boundaries(u, grid, example_params, tol=1e-9, repairs=repairs)
    assert repairs == []
    np.testing.assert_allclose(x_s[:-1], -math.exp(z_a), rtol=1e-6)
    np.testing.assert_allclose(x_b[:-1], -math.exp(z_b), rtol=1e-6)
    assert x_s[-1] == pytest.approx(0.98 * -1.4)
    assert x_b[-1] == -math.inf
    assert T0 == example_params.T


def test_extract_boundaries_repairs_rising_sell_boundary(example_params, example_stationary):
    grid: PdeGrid = ObstacleSolver.build_grid(example_params, example_stationary, n_z=101, n_t=10)
    u: np.ndarray = synthetic_solution(example_params, grid, 20, 60)
    z_a: float = grid.z_nodes[20]
    # The slices sell further out than the terminal limit, so the sequence rises at T and gets pooled
    assert -math.exp(z_a) < 0.98 * -1.4

    repairs: list[str] = []
    x_s, _, _ = ObstacleSolver.extract_boundaries(u, grid, example_params, tol=1e-9, repairs=repairs)
    assert len(repairs) == 1
    assert "sell boundary" in repairs[0]
    pooled: float = (10.0 * -math.exp(z_a) + 0.98 * -1.4) / 11.0
    np.testing.assert_allclose(x_s, pooled, rtol=1e-6)
    assert np.all(np.diff(x_s) <= 0)


def test_extract_boundaries_masks_far_field_slices(example_params, example_stationary):
    grid: PdeGrid = ObstacleSolver.build_grid(example_params, example_stationary, n_z=101, n_t=10)
    u: np.ndarray = synthetic_solution(example_params, grid, 1, 60)
    edge_clamped: np.ndarray = grid.t_nodes < 0.5 * example_params.T

    _, x_b, T0 = ObstacleSolver.extract_boundaries(u, grid, example_params, tol=1e-9, edge_clamped=edge_clamped)
    assert np.all(np.isfinite(x_b[edge_clamped]))
    assert np.all(np.isneginf(x_b[~edge_clamped]))
    assert T0 == pytest.approx(grid.t_nodes[int(edge_clamped.sum())])


def test_newton_failure_reports_step(example_params, example_stationary):
    grid: PdeGrid = ObstacleSolver.build_grid(example_params, example_stationary, n_z=20, n_t=4)
    with pytest.raises(ConvergenceError) as info:
        ObstacleSolver.solve(example_params, grid, SolverConfig(newton_max=1, newton_tol=1e-300))
    assert info.value.step_index == len(grid.t_nodes) - 2
    assert info.value.residual > 0


def test_interior_nodes_satisfy_the_unpenalized_step(coarse_vf, example_params):
    solution: ObstacleSolution = coarse_vf.solution
    grid: PdeGrid = solution.grid
    margin: float = 1e-8
    for n in (0, 100, 250, 350, len(grid.t_nodes) - 2):
        dt: float = float(grid.t_nodes[n + 1] - grid.t_nodes[n])
        inner: np.ndarray = solution.u[n, 1:-1]
        free: np.ndarray = ((inner > solution.lower_obstacle[1:-1] + margin)
                            & (inner < solution.upper_obstacle[1:-1] - margin))
        assert free.any()
        step: np.ndarray = inner - solution.u[n + 1, 1:-1] - dt * ObstacleSolver.spatial_operator(
            solution.u[n], grid.z_nodes, example_params)
        assert np.max(np.abs(step[free])) <= 1e-9


@pytest.mark.slow
def test_default_configuration_converges(example_params, example_stationary):
    grid: PdeGrid = ObstacleSolver.build_grid(example_params, example_stationary)
    solution: ObstacleSolution = ObstacleSolver.solve(example_params, grid)
    dt: float = float(grid.t_nodes[1] - grid.t_nodes[0])
    assert solution.diagnostics()["newton_max"] <= 25
    assert solution.T0 == pytest.approx(example_params.T0, abs=dt)


def test_terminal_slice_and_sandwich(coarse_vf):
    solution: ObstacleSolution = coarse_vf.solution
    np.testing.assert_array_equal(solution.u[-1], solution.lower_obstacle)
    allowed: float = 10.0 / solution.K + 1e-10
    assert np.all(solution.u >= solution.lower_obstacle - allowed)
    assert np.all(solution.u <= solution.upper_obstacle + allowed)
    assert np.all(solution.u[:, 1:-1] < 0)


def test_sell_boundary_terminal_limit(coarse_vf, example_params):
    solution: ObstacleSolution = coarse_vf.solution
    limit: float = (1.0 - example_params.mu) * example_params.x_M
    assert limit == pytest.approx(-1.372)
    assert solution.x_s_star[-1] == pytest.approx(limit)
    cell: float = abs(limit) * math.expm1(solution.grid.dz)
    assert abs(solution.x_s_star[-2] - limit) <= 2.0 * cell


def test_buy_boundary_vanishes_at_T0(coarse_vf, example_params):
    solution: ObstacleSolution = coarse_vf.solution
    dt: float = float(solution.grid.t_nodes[1] - solution.grid.t_nodes[0])
    assert solution.T0 == pytest.approx(example_params.T0, abs=dt)
    assert example_params.T0 == pytest.approx(1.59995, abs=1e-4)
    after: np.ndarray = solution.grid.t_nodes >= solution.T0
    assert np.all(np.isneginf(solution.x_b_star[after]))
    assert np.all(np.isfinite(solution.x_b_star[~after]))
    # Buy boundary runs off to the left as t approaches T0
    last: float = float(solution.x_b_star[~after][-1])
    assert last <= solution.boundaries.x_b_at(0.0)


def test_boundaries_nonincreasing(coarse_vf):
    solution: ObstacleSolution = coarse_vf.solution
    dz: float = solution.grid.dz
    for values in (solution.x_s_star, solution.x_b_star[np.isfinite(solution.x_b_star)]):
        rise: np.ndarray = np.diff(values)
        assert np.all(rise <= np.abs(values[:-1]) * math.expm1(dz) + 1e-12)


def test_monotone_statistics(coarse_vf):
    diagnostics: dict = coarse_vf.solution.diagnostics()
    h2: float = coarse_vf.solution.grid.dz ** 2
    assert diagnostics["max_u_t"] <= 1e-6
    assert diagnostics["min_v_x"] >= -h2
    assert diagnostics["max_v_x"] <= 1.0 + h2
    assert diagnostics["newton_total"] > 0
    assert diagnostics["newton_max"] <= 25


def test_boundaries_between_terminal_and_stationary(coarse_vf, example_stationary):
    bounds = coarse_vf.boundaries
    assert bounds.x_s_at(0.0) <= example_stationary.x_s_inf + 1e-9
    assert bounds.x_s_at(0.0) > bounds.x_s_at(bounds.params.T)
    assert bounds.x_b_at(0.0) < example_stationary.x_s_inf


def test_grid_dump(coarse_vf, tmp_path):
    file_path = tmp_path / "grid.csv"
    coarse_vf.solution.to_grid_csv(str(file_path))
    frame: pd.DataFrame = pd.read_csv(file_path)
    assert list(frame.columns) == ["t", "z", "u"]
    assert len(frame) == coarse_vf.solution.u.size


@pytest.mark.slow
def test_grid_halving(example_params, example_stationary):
    coarse: ObstacleSolution = ObstacleSolver.solve(
        example_params, ObstacleSolver.build_grid(example_params, example_stationary, n_z=200, n_t=400))
    fine: ObstacleSolution = ObstacleSolver.solve(
        example_params, ObstacleSolver.build_grid(example_params, example_stationary, n_z=399, n_t=800))
    fine_cell: float = math.expm1(fine.grid.dz)
    for t in np.linspace(0.0, 1.5, 7):
        x_s: float = coarse.boundaries.x_s_at(float(t))
        assert abs(x_s - fine.boundaries.x_s_at(float(t))) < 4.0 * fine_cell * abs(x_s)
        x_b: float = coarse.boundaries.x_b_at(float(t))
        assert abs(x_b - fine.boundaries.x_b_at(float(t))) < 4.0 * fine_cell * abs(x_b)


@pytest.mark.slow
def test_long_horizon_approaches_stationary():
    params: MarketParams = MarketParams(r=0.05, alpha=0.15, sigma=0.2, lam=0.02, mu=0.02, T=20.0)
    stationary = StationaryBoundary.solve_k_star(params)
    solution: ObstacleSolution = ObstacleSolver.solve(
        params, ObstacleSolver.build_grid(params, stationary, n_z=800, n_t=4000))
    assert solution.boundaries.x_s_at(0.0) == pytest.approx(stationary.x_s_inf, rel=0.01)
    assert solution.boundaries.x_b_at(0.0) == pytest.approx(stationary.x_b_inf, rel=0.01)
