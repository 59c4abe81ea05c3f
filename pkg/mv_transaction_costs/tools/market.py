# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import pandas as pd

from .errors import DomainError


@dataclass(frozen=True)
class MarketParams:
    """
    Market, fee and horizon constants (rates per year, volatility per sqrt year)
    """

    r: float
    alpha: float
    sigma: float
    lam: float
    mu: float
    T: float

    def __post_init__(self) -> None:
        # Standing assumptions of the model
        if not all(math.isfinite(v) for v in (self.r, self.alpha, self.sigma, self.lam, self.mu, self.T)):
            raise DomainError("market parameters must be finite")
        if self.r <= 0:
            raise DomainError(f"r={self.r} must be positive")
        if self.alpha <= self.r:
            raise DomainError(f"alpha={self.alpha} must exceed r={self.r}")
        if self.sigma <= 0:
            raise DomainError(f"sigma={self.sigma} must be positive")
        if self.lam < 0 or not 0 <= self.mu < 1:
            raise DomainError(f"fees out of range: lambda={self.lam}, mu={self.mu}")
        if self.lam + self.mu <= 0:
            raise DomainError("lambda + mu must be positive")
        if self.T <= 0:
            raise DomainError(f"T={self.T} must be positive")

    @property
    def excess_return(self) -> float:
        return self.alpha - self.r

    @property
    def fee_ratio(self) -> float:
        """
        (1 + lambda) / (1 - mu)
        """
        return (1.0 + self.lam) / (1.0 - self.mu)

    @property
    def x_M(self) -> float:
        """
        Frictionless bond/stock ratio -(alpha - r + sigma^2) / (alpha - r)
        """
        return -(self.excess_return + self.sigma ** 2) / self.excess_return

    @property
    def t_star(self) -> float:
        return Feasibility.critical_horizon(self)

    @property
    def T0(self) -> float:
        """
        Time after which buying stops: max(T - T*, 0)
        """
        return max(self.T - self.t_star, 0.0)


@dataclass(frozen=True)
class Position:
    """
    Bond and stock holdings in dollars
    """

    x: float
    y: float

    def net_wealth(self, params: MarketParams) -> float:
        return Feasibility.net_wealth(self, params)


@dataclass(frozen=True)
class WealthBound:
    """
    Expected terminal wealth bound, value None meaning +infinity
    """

    value: Optional[float]

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def to_json(self) -> Optional[float]:
        return self.value


@dataclass(frozen=True)
class TargetInterval:
    """
    Admissible targets (lower, upper): lower exclusive, upper None for +infinity
    """

    lower: float
    upper: Optional[float]
    upper_closed: bool = False
    empty: bool = False

    def contains(self, z: float) -> bool:
        """
        Membership in the solvability set
        """
        if self.empty or not z > self.lower:
            return False
        if self.upper is None:
            return True
        return z < self.upper or (self.upper_closed and self.is_upper_boundary(z))

    def interior_contains(self, z: float) -> bool:
        """
        Membership in the open interior (where the multiplier equation is solvable)
        """
        if self.empty or not z > self.lower:
            return False
        return self.upper is None or (z < self.upper and not self.is_upper_boundary(z))

    def is_upper_boundary(self, z: float) -> bool:
        """
        Check if z sits on the closed upper end (stay-put case)
        """
        return (not self.empty and self.upper_closed and self.upper is not None
                and math.isclose(z, self.upper, rel_tol=1e-12, abs_tol=1e-12))

    def describe(self) -> str:
        if self.empty:
            return "empty"
        upper: str = "+inf)" if self.upper is None else f"{self.upper:.10g}{']' if self.upper_closed else ')'}"
        return f"({self.lower:.10g}, {upper}"

    def to_json(self) -> dict:
        return {
            "empty": self.empty,
            "lower": None if self.empty else self.lower,
            "lower_closed": False,
            "upper": None if self.empty else self.upper,
            "upper_closed": self.upper_closed
        }


@dataclass(frozen=True)
class FeasibilityReport:
    """
    Critical horizon, supremum target and admissible target interval
    """

    t_star: float
    z_hat: WealthBound
    z_interval: TargetInterval

    def to_json(self) -> dict:
        return {
            "t_star_years": self.t_star,
            "z_hat_dollars": self.z_hat.to_json(),
            "z_hat_infinite": not self.z_hat.is_finite,
            "z_interval": self.z_interval.to_json()
        }


class Region(str, Enum):
    """
    Trading region of a (t, x, y) point
    """

    SELL = "SELL"
    BUY = "BUY"
    NOTRADE = "NOTRADE"
    SOLVENT = "SOLVENT"


@dataclass(frozen=True, eq=False)
class FreeBoundaries:
    """
    Sell and buy boundaries sampled on the time nodes; x_b_star holds -inf once buying stops
    """

    params: MarketParams
    t_nodes: np.ndarray
    x_s_star: np.ndarray
    x_b_star: np.ndarray
    T0: float
    _checksum: list = field(default_factory=list, init=False, repr=False, compare=False)

    def x_s_at(self, t: float) -> float:
        """
        Sell boundary, linear in t, clamped to the terminal limit
        """
        return float(np.interp(t, self.t_nodes, self.x_s_star))

    def x_b_at(self, t: float) -> float:
        """
        Buy boundary, linear in t between finite samples, -inf from T0 on
        """
        if t >= self.T0:
            return -math.inf
        i: int = int(np.searchsorted(self.t_nodes, t, side="right")) - 1
        i = min(max(i, 0), len(self.t_nodes) - 1)
        left: float = float(self.x_b_star[i])
        if i + 1 >= len(self.t_nodes) or not math.isfinite(float(self.x_b_star[i + 1])):
            return left
        right: float = float(self.x_b_star[i + 1])
        weight: float = (t - self.t_nodes[i]) / (self.t_nodes[i + 1] - self.t_nodes[i])
        return left + weight * (right - left)

    def checksum(self) -> str:
        """
        SHA-256 over the sampled boundaries
        """
        if not self._checksum:
            digest = hashlib.sha256()
            for array in (self.t_nodes, self.x_s_star, self.x_b_star):
                digest.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
            digest.update(np.float64(self.T0).tobytes())
            self._checksum.append(digest.hexdigest())
        return self._checksum[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t_nodes, "x_s_star": self.x_s_star, "x_b_star": self.x_b_star})

    def to_csv(self, file_path: str) -> None:
        """
        Export as t,x_s_star,x_b_star (the buy tag prints as -inf)
        """
        self.to_frame().to_csv(file_path, index=False, float_format="%.12g")


class Feasibility:
    """
    Wealth accounting, feasibility of targets and region classification
    """

    @classmethod
    def net_wealth(cls, p: Position, params: MarketParams) -> float:
        """
        x + (1 - mu) y^+ - (1 + lambda) y^-
        """
        return p.x + (1.0 - params.mu) * max(p.y, 0.0) - (1.0 + params.lam) * max(-p.y, 0.0)

    @classmethod
    def critical_horizon(cls, params: MarketParams) -> float:
        """
        T* = ln((1 + lambda) / (1 - mu)) / (alpha - r)
        """
        return math.log((1.0 + params.lam) / (1.0 - params.mu)) / (params.alpha - params.r)

    @classmethod
    def all_bond_value(cls, p: Position, params: MarketParams) -> float:
        """
        Terminal wealth of liquidating at once and holding bonds only
        """
        return math.exp(params.r * params.T) * cls.net_wealth(p, params)

    @classmethod
    def z_hat(cls, p: Position, params: MarketParams) -> WealthBound:
        """
        Supremum of the attainable expected terminal wealth
        """
        if params.T > cls.critical_horizon(params):
            return WealthBound(value=None)
        growth_bond: float = math.exp(params.r * params.T)
        if p.y > 0:
            return WealthBound(value=growth_bond * p.x + (1.0 - params.mu) * math.exp(params.alpha * params.T) * p.y)
        return WealthBound(value=growth_bond * p.x + (1.0 + params.lam) * growth_bond * p.y)

    @classmethod
    def feasible_targets(cls, p: Position, params: MarketParams) -> FeasibilityReport:
        """
        Targets for which the mean-variance problem has an optimal solution
        """
        t_star: float = cls.critical_horizon(params)
        z_hat: WealthBound = cls.z_hat(p, params)
        lower: float = cls.all_bond_value(p, params)

        interval: TargetInterval
        if params.T > t_star:
            interval = TargetInterval(lower=lower, upper=None)
        elif p.y > 0:
            interval = TargetInterval(lower=lower, upper=z_hat.value, upper_closed=True)
        else:
            interval = TargetInterval(lower=lower, upper=lower, empty=True)
        return FeasibilityReport(t_star=t_star, z_hat=z_hat, z_interval=interval)

    @classmethod
    def classify_region(cls, t: float, p: Position, bounds: FreeBoundaries) -> Region:
        """
        SELL / BUY / NOTRADE inside the insolvency region, SOLVENT outside it
        """
        params: MarketParams = bounds.params
        if not 0.0 <= t < params.T:
            raise DomainError(f"t={t} outside [0, {params.T})")
        if cls.net_wealth(p, params) >= 0:
            return Region.SOLVENT
        if p.y <= 0:
            return Region.BUY
        if p.x >= bounds.x_s_at(t) * p.y:
            return Region.SELL
        x_b: float = bounds.x_b_at(t)
        if math.isfinite(x_b) and p.x <= x_b * p.y:
            return Region.BUY
        return Region.NOTRADE
