# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.linalg import solve_banded
from scipy.optimize import isotonic_regression

from .errors import ConsistencyError, ConvergenceError, DomainError, SingularityError
from .logger import Logger
from .market import FreeBoundaries, MarketParams
from .stationary import StationaryParams


@dataclass(frozen=True, eq=False)
class PdeGrid:
    """
    Uniform grid in z = log(-x) and t
    """

    z_nodes: np.ndarray
    t_nodes: np.ndarray

    def __post_init__(self) -> None:
        if len(self.z_nodes) < 3 or len(self.t_nodes) < 3:
            raise DomainError("grid needs at least 3 nodes per axis")
        if np.any(np.diff(self.z_nodes) <= 0) or np.any(np.diff(self.t_nodes) <= 0):
            raise DomainError("grid spacing must be strictly positive")
        steps: np.ndarray = np.diff(self.z_nodes)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise DomainError("z spacing must be uniform")

    @property
    def z_min(self) -> float:
        return float(self.z_nodes[0])

    @property
    def z_max(self) -> float:
        return float(self.z_nodes[-1])

    @property
    def dz(self) -> float:
        return float(self.z_nodes[1] - self.z_nodes[0])

    @property
    def x_nodes(self) -> np.ndarray:
        return -np.exp(self.z_nodes)

    def extended(self, extra: float) -> "PdeGrid":
        """
        Same spacing, right edge moved out by at least extra
        """
        n_extra: int = int(math.ceil(extra / self.dz))
        z_nodes: np.ndarray = self.z_min + self.dz * np.arange(len(self.z_nodes) + n_extra)
        return PdeGrid(z_nodes=z_nodes, t_nodes=self.t_nodes)


@dataclass(frozen=True)
class GridConfig:
    n_z: int = 800
    n_t: int = 2000
    z_max_factor: float = 50.0

    def __post_init__(self) -> None:
        if self.n_z < 3 or self.n_t < 2:
            raise DomainError(f"grid too small: n_z={self.n_z}, n_t={self.n_t}")
        if not self.z_max_factor > 1:
            raise DomainError(f"z_max_factor={self.z_max_factor} must exceed 1")


@dataclass(frozen=True)
class SolverConfig:
    """
    Penalty and Newton settings; K None means 1e6 / dt
    """

    K: Optional[float] = None
    newton_tol: float = 1e-10
    newton_max: int = 50
    max_domain_extensions: int = 3
    damping_halvings: int = 10

    def __post_init__(self) -> None:
        if self.K is not None and not self.K > 0:
            raise DomainError(f"penalty K={self.K} must be positive")
        if not self.newton_tol > 0 or self.newton_max < 1:
            raise DomainError("newton_tol must be positive and newton_max at least 1")
        if self.max_domain_extensions < 0 or self.damping_halvings < 0:
            raise DomainError("max_domain_extensions and damping_halvings must be non-negative")

    def penalty(self, dt: float) -> float:
        return self.K if self.K is not None else 1e6 / dt


@dataclass(frozen=True, eq=False)
class ObstacleSolution:
    """
    Solved grid u(t, z) with obstacles, free boundaries and Newton statistics
    """

    params: MarketParams
    grid: PdeGrid
    u: np.ndarray
    lower_obstacle: np.ndarray
    upper_obstacle: np.ndarray
    edge_clamped: np.ndarray
    boundaries: FreeBoundaries
    K: float
    tol: float
    newton_total: int = 0
    newton_max: int = 0
    domain_extensions: int = 0
    repairs: list[str] = field(default_factory=list)

    @property
    def x_s_star(self) -> np.ndarray:
        return self.boundaries.x_s_star

    @property
    def x_b_star(self) -> np.ndarray:
        return self.boundaries.x_b_star

    @property
    def T0(self) -> float:
        return self.boundaries.T0

    def diagnostics(self) -> dict:
        """
        Discrete monotonicity statistics: max u_t and the range of v_x as divided differences in x
        """
        dt: np.ndarray = np.diff(self.grid.t_nodes)[:, None]
        u_t: np.ndarray = (self.u[1:] - self.u[:-1]) / dt
        v_x: np.ndarray = np.diff(self.u, axis=1) / np.diff(self.grid.x_nodes)[None, :]
        return {
            "max_u_t": float(u_t.max()),
            "min_v_x": float(v_x.min()),
            "max_v_x": float(v_x.max()),
            "newton_total": self.newton_total,
            "newton_max": self.newton_max,
            "domain_extensions": self.domain_extensions,
            "z_max": self.grid.z_max
        }

    def to_grid_frame(self) -> pd.DataFrame:
        t_mesh, z_mesh = np.meshgrid(self.grid.t_nodes, self.grid.z_nodes, indexing="ij")
        return pd.DataFrame({"t": t_mesh.ravel(), "z": z_mesh.ravel(), "u": self.u.ravel()})

    def to_grid_csv(self, file_path: str) -> None:
        """
        Debug dump with columns t,z,u
        """
        self.to_grid_frame().to_csv(file_path, index=False, float_format="%.12g")


class ObstacleSolver:
    """
    Penalized backward Euler solver of the double-obstacle problem in (t, z)
    """

    SINGULARITY_LEVEL: float = -1e-12
    EXTRACTION_CUSHION: float = 1e-10
    EXTENSION_FACTOR: float = 4.0

    @classmethod
    def build_grid(cls, params: MarketParams, stationary: StationaryParams, n_z: int = 800, n_t: int = 2000,
                   z_max_factor: float = 50.0) -> PdeGrid:
        """
        z from log(-x_s_inf) to log(z_max_factor |x_b_inf|), n_t uniform time steps
        """
        if n_z < 3 or n_t < 2:
            raise DomainError(f"grid too small: n_z={n_z}, n_t={n_t}")
        if not z_max_factor > 1:
            raise DomainError(f"z_max_factor={z_max_factor} must exceed 1")
        z_min: float = math.log(-stationary.x_s_inf)
        z_max: float = math.log(z_max_factor * abs(stationary.x_b_inf))
        if not z_max > z_min:
            raise DomainError(f"empty z domain [{z_min}, {z_max}]")
        z_nodes: np.ndarray = np.linspace(z_min, z_max, n_z)
        t_nodes: np.ndarray = np.linspace(0.0, params.T, n_t + 1)
        Logger.log("d", f"PDE grid: z in [{z_min:.6f}, {z_max:.6f}] ({n_z} nodes), {n_t} time steps")
        return PdeGrid(z_nodes=z_nodes, t_nodes=t_nodes)

    @classmethod
    def obstacles(cls, grid: PdeGrid, params: MarketParams) -> tuple[np.ndarray, np.ndarray]:
        """
        Lower -e^z + 1 - mu and upper -e^z + 1 + lambda
        """
        ez: np.ndarray = np.exp(grid.z_nodes)
        return -ez + 1.0 - params.mu, -ez + 1.0 + params.lam

    @classmethod
    def _interior_terms(cls, u_row: np.ndarray, z_nodes: np.ndarray,
                        params: MarketParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        inner: np.ndarray = u_row[1:-1]
        if np.any(inner >= cls.SINGULARITY_LEVEL):
            j: int = int(np.argmax(inner >= cls.SINGULARITY_LEVEL)) + 1
            raise SingularityError(f"u={u_row[j]:.3e} at z={z_nodes[j]:.6f} is not strictly negative")

        h: float = float(z_nodes[1] - z_nodes[0])
        s2: float = params.sigma ** 2
        drift: float = params.excess_return + 0.5 * s2
        growth: float = params.excess_return + s2
        ez: np.ndarray = np.exp(z_nodes[1:-1])

        u_z: np.ndarray = (u_row[2:] - u_row[:-2]) / (2.0 * h)
        u_zz: np.ndarray = (u_row[2:] - 2.0 * inner + u_row[:-2]) / h ** 2
        g: np.ndarray = u_z ** 2 + 2.0 * ez * u_z
        value: np.ndarray = 0.5 * s2 * u_zz - drift * u_z + growth * inner - s2 * (g / inner - 2.0 * ez)

        # Derivatives of the operator with respect to u_{j-1}, u_j, u_{j+1}
        q: np.ndarray = -s2 * (2.0 * u_z + 2.0 * ez) / inner
        sub: np.ndarray = s2 / (2.0 * h ** 2) + drift / (2.0 * h) - q / (2.0 * h)
        sup: np.ndarray = s2 / (2.0 * h ** 2) - drift / (2.0 * h) + q / (2.0 * h)
        diag: np.ndarray = -s2 / h ** 2 + growth + s2 * g / inner ** 2
        return value, sub, diag, sup

    @classmethod
    def spatial_operator(cls, u_row: np.ndarray, z_nodes: np.ndarray, params: MarketParams) -> np.ndarray:
        """
        L1 u on the interior nodes (central differences, uniform spacing)
        """
        u_row = np.asarray(u_row, dtype=np.float64)
        z_nodes = np.asarray(z_nodes, dtype=np.float64)
        if len(u_row) != len(z_nodes) or len(z_nodes) < 3:
            raise DomainError("u_row and z_nodes must have the same length (at least 3)")
        return cls._interior_terms(u_row, z_nodes, params)[0]

    @classmethod
    def _residual(cls, u: np.ndarray, u_old: np.ndarray, grid: PdeGrid, params: MarketParams,
                  lower: np.ndarray, upper: np.ndarray, dt: float, K: float,
                  clamp_edge: bool) -> tuple[np.ndarray, np.ndarray]:
        """
        dt-scaled residual and its banded Jacobian (solve_banded layout, one sub and one super diagonal)
        """
        n: int = len(u)
        value, sub, diag, sup = cls._interior_terms(u, grid.z_nodes, params)
        inner: np.ndarray = u[1:-1]
        below: np.ndarray = np.maximum(lower[1:-1] - inner, 0.0)
        above: np.ndarray = np.maximum(inner - upper[1:-1], 0.0)
        penalty: float = dt * K

        residual: np.ndarray = np.empty(n)
        residual[1:-1] = inner - u_old[1:-1] - dt * value - penalty * below + penalty * above
        residual[0] = u[0] - lower[0]

        ab: np.ndarray = np.zeros((3, n))
        ab[1, 0] = 1.0
        ab[1, 1:-1] = 1.0 - dt * diag + penalty * ((below > 0) | (above > 0))
        ab[2, :-2] = -dt * sub
        ab[0, 2:] = -dt * sup

        ab[1, -1] = 1.0
        if clamp_edge:
            residual[-1] = u[-1] - upper[-1]
        else:
            # v_x = 1 at the edge: v = x + const
            ez_edge: np.ndarray = np.exp(grid.z_nodes[-2:])
            residual[-1] = u[-1] - u[-2] + (ez_edge[1] - ez_edge[0])
            ab[2, -2] = -1.0
        return residual, ab

    @classmethod
    def _scaled_norm(cls, residual: np.ndarray, ab: np.ndarray) -> float:
        """
        Max-norm of the residual in units of u (each row divided by its Jacobian diagonal)
        """
        return float(np.max(np.abs(residual) / np.maximum(np.abs(ab[1]), 1.0)))

    @classmethod
    def _contact_set(cls, u: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """
        -1 where u is below the lower obstacle, +1 above the upper one, 0 in between
        """
        inner: np.ndarray = u[1:-1]
        return (inner > upper[1:-1]).astype(np.int8) - (inner < lower[1:-1]).astype(np.int8)

    @classmethod
    def _step(cls, u_old: np.ndarray, grid: PdeGrid, params: MarketParams, lower: np.ndarray,
              upper: np.ndarray, dt: float, K: float, clamp_edge: bool, cfg: SolverConfig,
              step_index: int) -> tuple[np.ndarray, int]:
        """
        Semismooth Newton on one backward Euler step: full steps while the penalty contact set moves,
        backtracking on the smooth part once it is fixed
        """
        u: np.ndarray = u_old.copy()
        u[0] = lower[0]
        if clamp_edge:
            u[-1] = upper[-1]
        residual, ab = cls._residual(u, u_old, grid, params, lower, upper, dt, K, clamp_edge)
        norm: float = cls._scaled_norm(residual, ab)
        contact: np.ndarray = cls._contact_set(u, lower, upper)
        if norm <= cfg.newton_tol:
            return u, 0
        visited: set[bytes] = {contact.tobytes()}

        for iteration in range(1, cfg.newton_max + 1):
            delta: np.ndarray = solve_banded((1, 1), ab, -residual)
            step: float = 1.0
            accepted: bool = False
            negative: bool = False
            for _ in range(cfg.damping_halvings + 1):
                trial: np.ndarray = u + step * delta
                if np.all(trial[1:-1] < cls.SINGULARITY_LEVEL):
                    negative = True
                    trial_residual, trial_ab = cls._residual(trial, u_old, grid, params, lower, upper, dt, K,
                                                             clamp_edge)
                    trial_norm: float = cls._scaled_norm(trial_residual, trial_ab)
                    trial_contact: np.ndarray = cls._contact_set(trial, lower, upper)
                    # A contact set seen before gets no free pass
                    moved: bool = step == 1.0 and trial_contact.tobytes() not in visited
                    if moved or trial_norm < norm:
                        accepted = True
                        break
                step *= 0.5
            if not accepted:
                if not negative:
                    raise SingularityError(f"Newton iterate left the region u < 0 on step {step_index}")
                raise ConvergenceError(f"line search could not reduce the residual {norm:.3e} on time step "
                                       f"{step_index}", step_index=step_index, residual=norm)

            u, residual, ab, norm = trial, trial_residual, trial_ab, trial_norm
            visited.add(trial_contact.tobytes())
            if norm <= cfg.newton_tol:
                return u, iteration

        raise ConvergenceError(f"Newton did not converge on time step {step_index} (residual {norm:.3e})",
                               step_index=step_index, residual=norm)

    @classmethod
    def _contact_edge(cls, gap: np.ndarray, grid: PdeGrid, j: int, k: int, tol: float) -> float:
        """
        z where the gap closes between the free node j and the contact node k = j +- 1

        The fit is C^1, so the gap grows quadratically off the contact set and its square root is
        extrapolated linearly from j and the next free node; linear in the gap when that node is missing.
        """
        far: int = 2 * j - k
        root_j: float = math.sqrt(max(gap[j] - tol, 0.0))
        if 0 <= far < len(gap) and gap[far] > gap[j]:
            root_far: float = math.sqrt(gap[far] - tol)
            shift: float = root_j / (root_far - root_j)
        else:
            shift = (gap[j] - tol) / max(gap[j] - gap[k], np.finfo(float).tiny)
        return float(grid.z_nodes[j] + (k - j) * min(shift, 1.0) * grid.dz)

    @classmethod
    def _sell_boundary(cls, gap: np.ndarray, grid: PdeGrid, tol: float) -> float:
        """
        First crossing of (u - lower) above tol, scanning from z_min
        """
        outside: np.ndarray = np.nonzero(gap > tol)[0]
        if len(outside) == 0:
            return float(-math.exp(grid.z_max))
        j: int = int(outside[0])
        if j == 0:
            return float(-math.exp(grid.z_min))
        return float(-math.exp(cls._contact_edge(gap, grid, j, j - 1, tol)))

    @classmethod
    def _buy_boundary(cls, gap: np.ndarray, grid: PdeGrid, tol: float) -> float:
        """
        Left end of the contact run with the upper obstacle that reaches the right edge; -inf if none
        """
        if gap[-1] > tol:
            return -math.inf
        outside: np.ndarray = np.nonzero(gap > tol)[0]
        if len(outside) == 0:
            return float(-math.exp(grid.z_min))
        j: int = int(outside[-1])
        return float(-math.exp(cls._contact_edge(gap, grid, j, j + 1, tol)))

    @classmethod
    def _repair_monotone(cls, values: np.ndarray, grid: PdeGrid, label: str, repairs: list[str]) -> np.ndarray:
        """
        Nonincreasing in t up to one cell, otherwise isotonic regression
        """
        if len(values) < 2:
            return values
        cell: np.ndarray = np.abs(values[:-1]) * math.expm1(grid.dz)
        rise: np.ndarray = np.diff(values) - cell
        if np.all(rise <= 0):
            return values
        worst: float = float(rise.max())
        message: str = f"{label} not monotone in t (excess rise {worst:.3e}), repaired by isotonic regression"
        Logger.log("w", message)
        repairs.append(message)
        return np.asarray(isotonic_regression(values, increasing=False).x, dtype=np.float64)

    @classmethod
    def extract_boundaries(cls, u: np.ndarray, grid: PdeGrid, params: MarketParams, tol: float,
                           repairs: Optional[list[str]] = None,
                           edge_clamped: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray, float]:
        """
        Sell and buy boundaries per time slice and the time T0 after which no slice touches the buy obstacle

        With edge_clamped given, only slices solved with the edge on the buy obstacle can carry a buy boundary.
        """
        repairs = repairs if repairs is not None else []
        lower, upper = cls.obstacles(grid, params)
        n_t: int = len(grid.t_nodes)
        x_s_star: np.ndarray = np.empty(n_t)
        x_b_star: np.ndarray = np.full(n_t, -math.inf)

        for n in range(n_t - 1):
            x_s_star[n] = cls._sell_boundary(u[n] - lower, grid, tol)
            x_b_star[n] = cls._buy_boundary(upper - u[n], grid, tol)

        if edge_clamped is not None:
            dropped: np.ndarray = np.isfinite(x_b_star) & ~edge_clamped
            if dropped.any():
                Logger.log("d", f"Ignoring buy contact on {int(dropped.sum())} slices with the far-field edge")
            x_b_star[~edge_clamped] = -math.inf

        # Terminal slice: limits of the boundaries as t approaches T
        x_s_star[-1] = (1.0 - params.mu) * params.x_M
        x_b_star[-1] = -math.inf

        finite: np.ndarray = np.isfinite(x_b_star)
        last_contact: int = int(np.nonzero(finite)[0][-1]) if finite.any() else -1
        T0: float = float(grid.t_nodes[last_contact + 1])

        x_s_star = cls._repair_monotone(x_s_star, grid, "sell boundary", repairs)
        if last_contact >= 0:
            # Slices inside [0, T0) with no contact keep the -inf tag
            segment: np.ndarray = x_b_star[:last_contact + 1]
            mask: np.ndarray = np.isfinite(segment)
            segment[mask] = cls._repair_monotone(segment[mask], grid, "buy boundary", repairs)
            x_b_star[:last_contact + 1] = segment
        return x_s_star, x_b_star, T0

    @classmethod
    def _solve_on(cls, params: MarketParams, grid: PdeGrid, cfg: SolverConfig) -> ObstacleSolution:
        t_nodes: np.ndarray = grid.t_nodes
        n_t: int = len(t_nodes)
        dt_min: float = float(np.min(np.diff(t_nodes)))
        K: float = cfg.penalty(dt_min)
        lower, upper = cls.obstacles(grid, params)
        T0_estimate: float = params.T0

        u: np.ndarray = np.empty((n_t, len(grid.z_nodes)))
        u[-1] = lower
        edge_clamped: np.ndarray = np.zeros(n_t, dtype=bool)
        edge_clamped[:-1] = t_nodes[:-1] < T0_estimate

        newton_total: int = 0
        newton_max: int = 0
        for n in range(n_t - 2, -1, -1):
            dt: float = float(t_nodes[n + 1] - t_nodes[n])
            u[n], iterations = cls._step(u[n + 1], grid, params, lower, upper, dt, K, bool(edge_clamped[n]), cfg,
                                         step_index=n)
            newton_total += iterations
            newton_max = max(newton_max, iterations)

        # Obstacle sandwich within the penalty error
        violation: float = float(max(np.max(lower - u), np.max(u - upper)))
        allowed: float = 10.0 / K + cls.EXTRACTION_CUSHION
        if violation > allowed:
            raise ConsistencyError(f"obstacle violated by {violation:.3e} (allowed {allowed:.3e})")

        tol: float = 10.0 / K + cls.EXTRACTION_CUSHION
        repairs: list[str] = []
        x_s_star, x_b_star, T0 = cls.extract_boundaries(u, grid, params, tol, repairs, edge_clamped)
        boundaries: FreeBoundaries = FreeBoundaries(params=params, t_nodes=t_nodes.copy(), x_s_star=x_s_star,
                                                    x_b_star=x_b_star, T0=T0)
        return ObstacleSolution(params=params, grid=grid, u=u, lower_obstacle=lower, upper_obstacle=upper,
                                edge_clamped=edge_clamped, boundaries=boundaries, K=K, tol=tol,
                                newton_total=newton_total, newton_max=newton_max, repairs=repairs)

    @classmethod
    def _contact_at_edge_only(cls, solution: ObstacleSolution) -> bool:
        """
        Check if the buy contact at t = 0 is no wider than the last cell
        """
        if not solution.edge_clamped[0]:
            return False
        x_b: float = float(solution.x_b_star[0])
        return math.isfinite(x_b) and math.log(-x_b) >= solution.grid.z_nodes[-2]

    @classmethod
    def solve(cls, params: MarketParams, grid: PdeGrid, cfg: Optional[SolverConfig] = None) -> ObstacleSolution:
        """
        Solve backward from T, extending the right edge while the buy contact sits on it
        """
        # Init config if None
        if cfg is None:
            cfg = SolverConfig()

        extensions: int = 0
        while True:
            solution: ObstacleSolution = cls._solve_on(params, grid, cfg)
            if not cls._contact_at_edge_only(solution):
                break
            if extensions >= cfg.max_domain_extensions:
                Logger.log("w", f"Buy boundary still on the right edge z_max={grid.z_max:.4f} "
                                f"after {extensions} extensions")
                break
            extensions += 1
            grid = grid.extended(math.log(cls.EXTENSION_FACTOR))
            Logger.log("i", f"Buy contact at the domain edge, extending z_max to {grid.z_max:.4f}")

        Logger.log("d", f"Obstacle solve: {solution.newton_total} Newton iterations "
                        f"(max {solution.newton_max} per step), T0={solution.T0:.6f}")
        return ObstacleSolution(params=solution.params, grid=solution.grid, u=solution.u,
                                lower_obstacle=solution.lower_obstacle, upper_obstacle=solution.upper_obstacle,
                                edge_clamped=solution.edge_clamped, boundaries=solution.boundaries, K=solution.K,
                                tol=solution.tol, newton_total=solution.newton_total,
                                newton_max=solution.newton_max, domain_extensions=extensions,
                                repairs=solution.repairs)
