# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError, NumericalIntegrityError
from .market import Feasibility, FreeBoundaries, MarketParams, Position
from .obstacle_pde import ObstacleSolution


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """
    V(t, x, y) rebuilt from the obstacle solution: A(t), B(t) and w(t, x) tables on the solver grid
    """

    solution: ObstacleSolution
    A_of_t: np.ndarray
    B_of_t: np.ndarray
    w_grid: np.ndarray

    @property
    def params(self) -> MarketParams:
        return self.solution.params

    @property
    def boundaries(self) -> FreeBoundaries:
        return self.solution.boundaries

    @property
    def t_nodes(self) -> np.ndarray:
        return self.solution.grid.t_nodes

    @property
    def grid_tolerance(self) -> float:
        """
        Size of the first-order interpolation error in V_x, one z step
        """
        return self.solution.grid.dz

    @classmethod
    def _integrate_to_T(cls, integrand: np.ndarray, t_nodes: np.ndarray) -> np.ndarray:
        """
        Table of the integral from t to T, zero at T
        """
        running: np.ndarray = cumulative_trapezoid(integrand, t_nodes, initial=0.0)
        return running[-1] - running

    @classmethod
    def _boundary_integrand(cls, x: np.ndarray, fee: float, params: MarketParams) -> np.ndarray:
        """
        [r x^2 + (alpha + r) c x + (alpha + sigma^2 / 2) c^2] / (x + c)^2 with c = 1 - mu or 1 + lambda
        """
        denominator: np.ndarray = x + fee
        if np.any(np.abs(denominator) < 1e-12):
            raise NumericalIntegrityError(f"boundary reached -{fee:.6g}, integrand denominator vanishes")
        numerator: np.ndarray = (params.r * x ** 2 + (params.alpha + params.r) * fee * x
                                 + (params.alpha + 0.5 * params.sigma ** 2) * fee ** 2)
        return numerator / denominator ** 2

    @classmethod
    def build_A(cls, bounds: FreeBoundaries, params: MarketParams) -> np.ndarray:
        integrand: np.ndarray = cls._boundary_integrand(bounds.x_s_star, 1.0 - params.mu, params)
        return cls._integrate_to_T(integrand, bounds.t_nodes)

    @classmethod
    def build_B(cls, bounds: FreeBoundaries, params: MarketParams) -> np.ndarray:
        """
        Same integral along the buy boundary; where x_b* is -inf the integrand is its limit r
        """
        integrand: np.ndarray = np.full(len(bounds.t_nodes), params.r)
        finite: np.ndarray = np.isfinite(bounds.x_b_star)
        if finite.any():
            integrand[finite] = cls._boundary_integrand(bounds.x_b_star[finite], 1.0 + params.lam, params)
        return cls._integrate_to_T(integrand, bounds.t_nodes)

    @classmethod
    def build_w(cls, solution: ObstacleSolution, A_of_t: np.ndarray, B_of_t: np.ndarray) -> np.ndarray:
        """
        w on the (t, z) grid: log form in the sell region, trapezoid of 1/v beyond x_s*(t)

        w - log(-v) is pinned to B(t) at the buy boundary (at the right edge once buying stops); the
        trapezoid mismatch is removed linearly in z across the no-trade region.
        """
        params: MarketParams = solution.params
        grid = solution.grid
        fee: float = 1.0 - params.mu
        ez: np.ndarray = np.exp(grid.z_nodes)
        w_grid: np.ndarray = np.empty_like(solution.u)

        for n in range(len(grid.t_nodes)):
            x_s: float = float(solution.x_s_star[n])
            z_s: float = math.log(-x_s)
            anchor: float = float(A_of_t[n]) + math.log(-x_s - fee)
            w_grid[n] = float(A_of_t[n]) + np.log(ez - fee)

            # dy / v with y = -e^z becomes -e^z / u dz
            k: int = int(np.searchsorted(grid.z_nodes, z_s, side="right"))
            if k >= len(grid.z_nodes):
                continue
            z_path: np.ndarray = np.concatenate(([z_s], grid.z_nodes[k:]))
            integrand: np.ndarray = np.concatenate(([-math.exp(z_s) / (x_s + fee)], -ez[k:] / solution.u[n, k:]))
            w_path: np.ndarray = anchor + cumulative_trapezoid(integrand, z_path, initial=0.0)

            x_b: float = float(solution.x_b_star[n])
            z_r: float = min(math.log(-x_b), grid.z_max) if math.isfinite(x_b) else grid.z_max
            v_r: float = x_b + 1.0 + params.lam if math.isfinite(x_b) else float(solution.u[n, -1])
            mismatch: float = float(np.interp(z_r, z_path, w_path)) - math.log(-v_r) - float(B_of_t[n])
            ramp: np.ndarray = np.clip((z_path - z_s) / max(z_r - z_s, grid.dz), 0.0, 1.0)
            w_grid[n, k:] = (w_path - mismatch * ramp)[1:]
        return w_grid

    @classmethod
    def build(cls, solution: ObstacleSolution) -> "ValueFunction":
        A_of_t: np.ndarray = cls.build_A(solution.boundaries, solution.params)
        B_of_t: np.ndarray = cls.build_B(solution.boundaries, solution.params)
        return ValueFunction(solution=solution, A_of_t=A_of_t, B_of_t=B_of_t,
                             w_grid=cls.build_w(solution, A_of_t, B_of_t))

    def A(self, t: float) -> float:
        return float(np.interp(t, self.t_nodes, self.A_of_t))

    def B(self, t: float) -> float:
        return float(np.interp(t, self.t_nodes, self.B_of_t))

    def _check_time(self, t: float) -> None:
        if not 0.0 <= t <= self.params.T:
            raise DomainError(f"t={t} outside [0, {self.params.T}]")

    def _time_weights(self, t: float) -> tuple[int, float]:
        i: int = int(np.searchsorted(self.t_nodes, t, side="right")) - 1
        i = min(max(i, 0), len(self.t_nodes) - 2)
        return i, (t - self.t_nodes[i]) / (self.t_nodes[i + 1] - self.t_nodes[i])

    def _check_ratio(self, ratio: float) -> None:
        if not ratio < -(1.0 - self.params.mu):
            raise DomainError(f"ratio x={ratio} outside (-inf, {-(1.0 - self.params.mu)})")

    def _no_trade_nodes(self, n: int) -> tuple[float, float, np.ndarray]:
        """
        z_s, the right end of the no-trade stretch (z_b or z_max) and the grid nodes strictly inside it
        """
        z_nodes: np.ndarray = self.solution.grid.z_nodes
        z_s: float = math.log(-float(self.solution.x_s_star[n]))
        x_b: float = float(self.solution.x_b_star[n])
        z_right: float = math.log(-x_b) if math.isfinite(x_b) else self.solution.grid.z_max
        return z_s, z_right, np.nonzero((z_nodes > z_s) & (z_nodes < z_right))[0]

    def _v_slice(self, n: int, z: float) -> float:
        """
        v on time slice n: exact on the sell and buy sides, interpolated in between from the exact boundary values
        """
        params: MarketParams = self.params
        grid = self.solution.grid
        u_n: np.ndarray = self.solution.u[n]
        x_b: float = float(self.solution.x_b_star[n])
        z_s, z_right, inside = self._no_trade_nodes(n)
        if z <= z_s:
            return -math.exp(z) + 1.0 - params.mu
        if math.isfinite(x_b) and z >= z_right:
            return -math.exp(z) + 1.0 + params.lam
        if z > grid.z_max:
            # v = x + c_edge past the grid
            return -math.exp(z) + float(u_n[-1]) + math.exp(grid.z_max)
        right: float = x_b + 1.0 + params.lam if math.isfinite(x_b) else float(u_n[-1])
        return float(np.interp(z, np.concatenate(([z_s], grid.z_nodes[inside], [z_right])),
                               np.concatenate(([-math.exp(z_s) + 1.0 - params.mu], u_n[inside], [right]))))

    def _w_slice(self, n: int, z: float) -> float:
        """
        w on time slice n, same layout as v: log forms on both trading sides
        """
        params: MarketParams = self.params
        grid = self.solution.grid
        w_n: np.ndarray = self.w_grid[n]
        x_b: float = float(self.solution.x_b_star[n])
        z_s, z_right, inside = self._no_trade_nodes(n)
        if z <= z_s:
            return float(self.A_of_t[n]) + math.log(math.exp(z) - 1.0 + params.mu)
        if math.isfinite(x_b) and z >= z_right:
            return float(self.B_of_t[n]) + math.log(math.exp(z) - 1.0 - params.lam)
        if z > grid.z_max:
            # Past the grid v = x + c_edge, so the integral of 1/v is a log ratio
            offset: float = float(self.solution.u[n, -1]) + math.exp(grid.z_max)
            return float(w_n[-1]) + math.log((math.exp(z) - offset) / (math.exp(grid.z_max) - offset))
        left: float = float(self.A_of_t[n]) + math.log(math.exp(z_s) - 1.0 + params.mu)
        right: float = float(self.B_of_t[n]) + math.log(-x_b - 1.0 - params.lam) if math.isfinite(x_b) \
            else float(w_n[-1])
        return float(np.interp(z, np.concatenate(([z_s], grid.z_nodes[inside], [z_right])),
                               np.concatenate(([left], w_n[inside], [right]))))

    def eval_v(self, t: float, ratio: float) -> float:
        """
        Interpolated obstacle solution v(t, x)
        """
        self._check_time(t)
        self._check_ratio(ratio)
        if ratio >= self.boundaries.x_s_at(t):
            return ratio + 1.0 - self.params.mu
        z: float = math.log(-ratio)
        i, theta = self._time_weights(t)
        return (1.0 - theta) * self._v_slice(i, z) + theta * self._v_slice(i + 1, z)

    def eval_w(self, t: float, ratio: float) -> float:
        self._check_time(t)
        self._check_ratio(ratio)
        if ratio >= self.boundaries.x_s_at(t):
            return self.A(t) + math.log(-ratio - 1.0 + self.params.mu)
        z: float = math.log(-ratio)
        i, theta = self._time_weights(t)
        return (1.0 - theta) * self._w_slice(i, z) + theta * self._w_slice(i + 1, z)

    def eval_V(self, t: float, p: Position) -> float:
        """
        phi(t, x, y); zero when net wealth is nonnegative
        """
        self._check_time(t)
        params: MarketParams = self.params
        if Feasibility.net_wealth(p, params) >= 0:
            return 0.0
        if p.y > 0:
            return p.y ** 2 * math.exp(2.0 * self.eval_w(t, p.x / p.y))
        return math.exp(2.0 * self.B(t)) * (p.x + (1.0 + params.lam) * p.y) ** 2

    def eval_Vx(self, t: float, p: Position) -> float:
        self._check_time(t)
        params: MarketParams = self.params
        if Feasibility.net_wealth(p, params) >= 0:
            return 0.0
        if p.y <= 0:
            return 2.0 * math.exp(2.0 * self.B(t)) * (p.x + (1.0 + params.lam) * p.y)
        ratio: float = p.x / p.y
        if ratio >= self.boundaries.x_s_at(t):
            return 2.0 * math.exp(2.0 * self.A(t)) * (p.x + (1.0 - params.mu) * p.y)
        return 2.0 * p.y * math.exp(2.0 * self.eval_w(t, ratio)) / self.eval_v(t, ratio)
