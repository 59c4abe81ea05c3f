# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from .errors import ConsistencyError, DomainError, FeasibilityError, NumericalIntegrityError, SolverError
from .logger import Logger
from .market import Feasibility, FeasibilityReport, FreeBoundaries, MarketParams, Position, Region
from .obstacle_pde import GridConfig, ObstacleSolution, ObstacleSolver, SolverConfig
from .stationary import StationaryBoundary, StationaryParams
from .value_function import ValueFunction


@dataclass(frozen=True)
class TargetSpec:
    initial: Position
    z: float


@dataclass(frozen=True)
class MVSolution:
    """
    Optimal multiplier, initial trade and minimal variance for one target
    """

    z: float
    ell_star: Optional[float]
    adjusted_initial: Position
    post_trade: Position
    initial_trade: float
    variance: Optional[float]
    stay_put: bool
    region: Optional[Region] = None
    boundary_checksum: Optional[str] = None
    residual: Optional[float] = None
    bracket_width: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "z_dollars": self.z,
            "ell_star_dollars": self.ell_star,
            "adjusted_initial": {"bond_dollars": self.adjusted_initial.x, "stock_dollars": self.adjusted_initial.y},
            "initial_trade_dollars": self.initial_trade,
            "post_trade": {"bond_dollars": self.post_trade.x, "stock_dollars": self.post_trade.y},
            "variance_dollars2": self.variance,
            "stay_put": self.stay_put,
            "region": None if self.region is None else self.region.value,
            "boundary_checksum": self.boundary_checksum,
            "multiplier_residual": self.residual,
            "bracket_width_dollars": self.bracket_width
        }


@dataclass(frozen=True)
class FrontierPoint:
    z: float
    variance: Optional[float]
    ell_star: Optional[float]
    error: Optional[str] = None
    boundary_checksum: Optional[str] = None


class MeanVarianceSolver:
    """
    Multiplier root, initial trade and frontier sweeps over one value function
    """

    TOL_Z: float = 1e-8
    SAMPLES: int = 100
    MAX_EXPANSIONS: int = 200

    @classmethod
    def build_value_function(cls, params: MarketParams, grid_cfg: Optional[GridConfig] = None,
                             solver_cfg: Optional[SolverConfig] = None) -> ValueFunction:
        """
        Stationary boundaries, obstacle solve and value function reconstruction
        """
        # Init configs if None
        if grid_cfg is None:
            grid_cfg = GridConfig()
        if solver_cfg is None:
            solver_cfg = SolverConfig()

        stationary: StationaryParams = StationaryBoundary.solve_k_star(params)
        grid = ObstacleSolver.build_grid(params, stationary, grid_cfg.n_z, grid_cfg.n_t, grid_cfg.z_max_factor)
        solution: ObstacleSolution = ObstacleSolver.solve(params, grid, solver_cfg)
        return ValueFunction.build(solution)

    @classmethod
    def f_multiplier(cls, ell: float, target: TargetSpec, vf: ValueFunction) -> float:
        """
        f(l) = e^{-rT} V_x(0, x - l e^{-rT}, y) + 2 l
        """
        discount: float = math.exp(-vf.params.r * vf.params.T)
        adjusted: Position = Position(x=target.initial.x - ell * discount, y=target.initial.y)
        return discount * vf.eval_Vx(0.0, adjusted) + 2.0 * ell

    @classmethod
    def _upper_bound(cls, target: TargetSpec, vf: ValueFunction) -> Optional[float]:
        """
        Multiplier beyond which f is linear (adjusted position in the buy region) and exceeds 2z
        """
        params: MarketParams = vf.params
        discount: float = math.exp(-params.r * params.T)
        x, y = target.initial.x, target.initial.y
        x_b: float = vf.boundaries.x_b_at(0.0)
        if y > 0 and not math.isfinite(x_b):
            return None
        entry: float = (x - x_b * y) / discount if y > 0 else x / discount
        growth: float = math.exp(2.0 * vf.B(0.0)) * discount ** 2
        if growth >= 1.0:
            return None
        # f(l) = 2 (1 - growth) l + 2 e^{2B} e^{-rT} (x + (1 + lambda) y) past the entry point
        intercept: float = math.exp(2.0 * vf.B(0.0)) * discount * (x + (1.0 + params.lam) * y)
        asymptote: float = (target.z - intercept) / (1.0 - growth)
        return max(entry, asymptote, target.z)

    @classmethod
    def solve_multiplier(cls, target: TargetSpec, vf: ValueFunction,
                         tol_z: float = TOL_Z) -> tuple[float, float, float]:
        """
        Root of f(l) = 2z by bracketing from l = z and bisection; returns (ell_star, residual, plateau width)
        """
        params: MarketParams = vf.params
        report: FeasibilityReport = Feasibility.feasible_targets(target.initial, params)
        if not report.z_interval.interior_contains(target.z):
            raise FeasibilityError(f"target z={target.z} outside the interior of {report.z_interval.describe()}",
                                   interval=report.z_interval)

        def excess(ell: float) -> float:
            return cls.f_multiplier(ell, target, vf) - 2.0 * target.z

        lo: float = target.z
        if excess(lo) > 0:
            raise NumericalIntegrityError(f"f(z) > 2z at z={target.z}; V_x is positive somewhere")

        # Bracket
        bound: Optional[float] = cls._upper_bound(target, vf)
        step: float = max(1.0, abs(target.z))
        hi: float = lo + step
        for _ in range(cls.MAX_EXPANSIONS):
            if excess(hi) >= 0:
                break
            if bound is not None and hi > 2.0 * bound + 1.0:
                raise NumericalIntegrityError(f"no multiplier bracket below the asymptotic bound {bound:.6g}")
            step *= 2.0
            hi = lo + step
        else:
            raise NumericalIntegrityError(f"no multiplier bracket after {cls.MAX_EXPANSIONS} expansions")
        Logger.log("d", f"Multiplier bracket for z={target.z}: [{lo:.10g}, {hi:.10g}]")

        # Monotonicity and a single crossing on the bracket, up to the grid error of V_x
        ells: np.ndarray = np.linspace(lo, hi, cls.SAMPLES)
        values: np.ndarray = np.array([excess(float(ell)) for ell in ells])
        slack: float = max(1e-6, vf.grid_tolerance) * (1.0 + abs(target.z))
        worst: float = float(-np.diff(values).min())
        if worst > slack:
            raise NumericalIntegrityError(f"f decreases by {worst:.3e} on the multiplier bracket "
                                          f"(grid tolerance {slack:.3e})")
        signs: np.ndarray = np.sign(values[np.abs(values) > slack])
        if np.count_nonzero(np.diff(signs)) > 1:
            raise NumericalIntegrityError("f - 2z changes sign more than once on the multiplier bracket")

        ell_star: float = bisect(excess, lo, hi, xtol=1e-10 * max(1.0, abs(target.z)), rtol=4 * np.finfo(float).eps,
                                 maxiter=500)

        # Flat stretch of f at grid resolution, or several crossings inside the noise band: report the midpoint
        crossings: np.ndarray = np.nonzero(np.diff(np.sign(values)) != 0)[0]
        flat: np.ndarray = ells[np.abs(values) <= 2.0 * tol_z]
        if len(crossings) > 1:
            flat = np.concatenate((flat, ells[crossings], ells[crossings + 1]))
        width: float = 0.0
        if len(flat) > 1:
            width = float(flat.max() - flat.min())
            ell_star = float(0.5 * (flat.min() + flat.max()))
            Logger.log("w", f"f is flat near the root over a width of {width:.3e}, using the midpoint")

        residual: float = abs(excess(ell_star))
        if residual >= 2.0 * tol_z:
            Logger.log("w", f"Multiplier residual {residual:.3e} above {2.0 * tol_z:.1e} (grid-level jump in V_x)")
        return ell_star, residual, width

    @classmethod
    def initial_trade(cls, t0: float, adjusted: Position, bounds: FreeBoundaries) -> tuple[Position, float]:
        """
        Project onto closure(NT): sell along (1 - mu, -1), buy along (-(1 + lambda), 1)
        """
        params: MarketParams = bounds.params
        region: Region = Feasibility.classify_region(t0, adjusted, bounds)
        if region == Region.SOLVENT:
            raise DomainError(f"position ({adjusted.x}, {adjusted.y}) has nonnegative net wealth")
        if region == Region.NOTRADE:
            return adjusted, 0.0

        if region == Region.SELL:
            x_s: float = bounds.x_s_at(t0)
            sold: float = (x_s * adjusted.y - adjusted.x) / (x_s + 1.0 - params.mu)
            post: Position = Position(x=adjusted.x + (1.0 - params.mu) * sold, y=adjusted.y - sold)
            return post, -sold

        x_b: float = bounds.x_b_at(t0)
        if not math.isfinite(x_b):
            raise ConsistencyError(f"position ({adjusted.x}, {adjusted.y}) is in the buy region at t={t0} "
                                   f"but the buy boundary is gone (T0={bounds.T0})")
        bought: float = (adjusted.x - x_b * adjusted.y) / (x_b + 1.0 + params.lam)
        post = Position(x=adjusted.x - (1.0 + params.lam) * bought, y=adjusted.y + bought)
        return post, bought

    @classmethod
    def _stay_put(cls, target: TargetSpec) -> MVSolution:
        return MVSolution(z=target.z, ell_star=None, adjusted_initial=target.initial, post_trade=target.initial,
                          initial_trade=0.0, variance=None, stay_put=True)

    @classmethod
    def solve(cls, target: TargetSpec, params: MarketParams, grid_cfg: Optional[GridConfig] = None,
              solver_cfg: Optional[SolverConfig] = None, vf: Optional[ValueFunction] = None,
              tol_z: float = TOL_Z) -> MVSolution:
        """
        Feasibility gate, then multiplier, initial trade and variance
        """
        report: FeasibilityReport = Feasibility.feasible_targets(target.initial, params)
        interval = report.z_interval
        if not interval.contains(target.z):
            raise FeasibilityError(f"target z={target.z} outside the admissible interval {interval.describe()}",
                                   interval=interval)
        if interval.is_upper_boundary(target.z):
            Logger.log("i", f"Target z={target.z} is the supremum, holding the initial position")
            return cls._stay_put(target)

        if vf is None:
            vf = cls.build_value_function(params, grid_cfg, solver_cfg)

        ell_star, residual, width = cls.solve_multiplier(target, vf, tol_z)
        discount: float = math.exp(-params.r * params.T)
        adjusted: Position = Position(x=target.initial.x - ell_star * discount, y=target.initial.y)
        region: Region = Feasibility.classify_region(0.0, adjusted, vf.boundaries)
        post_trade, trade = cls.initial_trade(0.0, adjusted, vf.boundaries)

        variance: float = vf.eval_V(0.0, adjusted) - (ell_star - target.z) ** 2
        if variance < 0:
            if variance < -1e-9 * (1.0 + ell_star ** 2):
                raise NumericalIntegrityError(f"negative variance {variance:.3e} for z={target.z}")
            variance = 0.0

        Logger.log("i", f"z={target.z}: ell*={ell_star:.6f}, trade={trade:.6f}, variance={variance:.6g}")
        return MVSolution(z=target.z, ell_star=ell_star, adjusted_initial=adjusted, post_trade=post_trade,
                          initial_trade=trade, variance=variance, stay_put=False, region=region,
                          boundary_checksum=vf.boundaries.checksum(), residual=residual, bracket_width=width)

    @classmethod
    def efficient_frontier(cls, initial: Position, z_values: list[float], params: MarketParams,
                           grid_cfg: Optional[GridConfig] = None, solver_cfg: Optional[SolverConfig] = None,
                           vf: Optional[ValueFunction] = None, workers: int = 1) -> list[FrontierPoint]:
        """
        (z, variance) pairs in input order over one shared value function; failures are recorded per point
        """
        report: FeasibilityReport = Feasibility.feasible_targets(initial, params)
        if vf is None and any(report.z_interval.interior_contains(z) for z in z_values):
            vf = cls.build_value_function(params, grid_cfg, solver_cfg)

        def point(z: float) -> FrontierPoint:
            try:
                solution: MVSolution = cls.solve(TargetSpec(initial=initial, z=z), params, vf=vf)
            except (FeasibilityError, NumericalIntegrityError) as e:
                Logger.log("w", f"Frontier point z={z} failed: {e}")
                return FrontierPoint(z=z, variance=None, ell_star=None, error=str(e))
            return FrontierPoint(z=z, variance=solution.variance, ell_star=solution.ell_star,
                                 boundary_checksum=solution.boundary_checksum)

        points: list[FrontierPoint]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                points = list(executor.map(point, z_values))
        else:
            points = [point(z) for z in z_values]

        checksums: set[str] = {p.boundary_checksum for p in points if p.boundary_checksum is not None}
        if len(checksums) > 1:
            raise SolverError("frontier points were solved against different boundaries")
        return points
