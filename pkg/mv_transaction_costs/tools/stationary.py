# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalIntegrityError, RootBracketError
from .logger import Logger
from .market import MarketParams


@dataclass(frozen=True)
class StationaryParams:
    """
    Infinite-horizon free boundaries (dimensionless bond/stock ratios)
    """

    a: float
    k_star: float
    x_s_inf: float
    x_b_inf: float
    x_M: float
    fee_ratio: float
    residual: float


class StationaryBoundary:
    """
    Closed-form stationary boundaries from the root of F(k) = (1 + lambda) / (1 - mu)
    """

    BRANCH_TOLERANCE: float = 1e-12
    ROOT_TOLERANCE: float = 1e-10
    EDGE: float = 1e-9
    SCAN_POINTS: int = 400

    @classmethod
    def a_ratio(cls, params: MarketParams) -> float:
        """
        a = -2 (alpha - r + sigma^2) / sigma^2, always below -2
        """
        return -2.0 * (params.excess_return + params.sigma ** 2) / params.sigma ** 2

    @classmethod
    def delta(cls, k: float, a: float) -> float:
        return (k - 1.0) / k ** 2 * a ** 2 - (a - 1.0) ** 2 / 8.0

    @classmethod
    def eval_F(cls, k: float, a: float, branch_tolerance: float = BRANCH_TOLERANCE) -> float:
        """
        Evaluate F(k); NaN where the closed form has no real value
        """
        if not 1.0 < k < 2.0:
            raise DomainError(f"k={k} outside (1, 2)")
        if a >= -2.0:
            raise DomainError(f"a={a} must be below -2")

        prefactor: float = (a + k / (k - 1.0)) / (a + k)
        delta: float = cls.delta(k, a)

        # Degenerate discriminant, the common limit of the two other branches
        if abs(delta) < branch_tolerance * (a - 1.0) ** 2:
            exponent: float = 0.5 * (1.0 / (a / k + (1.0 - a) / 4.0) - 1.0 / ((k - 1.0) / k * a + (1.0 - a) / 4.0))
        elif delta < 0:
            # c1 < c2 roots of 2c^2 + (a - 1)c + (k - 1)a^2 / k^2 = 0
            root: float = math.sqrt(-8.0 * delta)
            c1: float = (-(a - 1.0) - root) / 4.0
            c2: float = (-(a - 1.0) + root) / 4.0
            ratio: float = (((c1 + (k - 1.0) / k * a) * (c2 + a / k))
                            / ((c2 + (k - 1.0) / k * a) * (c1 + a / k)))
            if ratio <= 0:
                return math.nan
            exponent = math.log(ratio) / (2.0 * (c2 - c1))
        else:
            scale: float = math.sqrt(2.0 * delta)
            angle: float = (math.atan((k * (a - 1.0) - 4.0 * a) / (2.0 * k * scale))
                            - math.atan((4.0 * a - k * (3.0 * a + 1.0)) / (2.0 * k * scale)))
            exponent = angle / scale
        if exponent > 700.0:
            return math.copysign(math.inf, prefactor)
        return prefactor * math.exp(exponent)

    @classmethod
    def boundaries_for(cls, k: float, a: float, params: MarketParams) -> tuple[float, float]:
        """
        (x_s_inf, x_b_inf) implied by a given k
        """
        x_s_inf: float = -a * (1.0 - params.mu) / (a + k)
        x_b_inf: float = -a * (1.0 + params.lam) / (a + k / (k - 1.0))
        return x_s_inf, x_b_inf

    @classmethod
    def solve_k_star(cls, params: MarketParams) -> StationaryParams:
        """
        Bracket every sign change of F - fee ratio on (1, 2), refine, keep true roots
        """
        a: float = cls.a_ratio(params)
        target: float = params.fee_ratio

        # Scan
        ks: np.ndarray = np.linspace(1.0 + cls.EDGE, 2.0 - cls.EDGE, cls.SCAN_POINTS)
        values: list[float] = [cls.eval_F(float(k), a) - target for k in ks]
        scanned: list[tuple[float, float]] = list(zip(ks.tolist(), values))
        brackets: list[tuple[float, float]] = []
        for (k_lo, f_lo), (k_hi, f_hi) in zip(scanned[:-1], scanned[1:]):
            if math.isfinite(f_lo) and math.isfinite(f_hi) and f_lo * f_hi <= 0:
                brackets.append((k_lo, k_hi))

        def excess(k: float) -> float:
            value: float = cls.eval_F(k, a) - target
            return math.copysign(1e300, value) if math.isinf(value) else value

        # Refine, dropping poles (sign change without a small residual)
        roots: list[float] = []
        for k_lo, k_hi in brackets:
            k_root: float = brentq(excess, k_lo, k_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                   maxiter=500)
            residual: float = abs(cls.eval_F(k_root, a) - target)
            if residual < cls.ROOT_TOLERANCE:
                if not roots or abs(k_root - roots[-1]) > 1e-12:
                    roots.append(k_root)
            else:
                Logger.log("d", f"Discarding stationary bracket ({k_lo:.6f}, {k_hi:.6f}): residual {residual:.3e}")

        if not roots:
            raise RootBracketError(f"F(k) - {target:.12g} has no root on (1, 2) for a={a:.6g}",
                                   scanned=scanned, brackets=brackets)
        if len(roots) > 1:
            raise RootBracketError(f"F(k) - {target:.12g} has {len(roots)} roots on (1, 2): {roots}",
                                   scanned=scanned, brackets=brackets)

        k_star: float = roots[0]
        x_s_inf, x_b_inf = cls.boundaries_for(k_star, a, params)
        residual = abs(cls.eval_F(k_star, a) - target)
        if not x_b_inf < params.x_M < x_s_inf < -(1.0 - params.mu):
            raise NumericalIntegrityError(f"stationary boundaries out of order: x_b_inf={x_b_inf}, x_M={params.x_M}, "
                                          f"x_s_inf={x_s_inf}")
        Logger.log("d", f"Stationary boundaries: k*={k_star:.12f}, x_s_inf={x_s_inf:.8f}, x_b_inf={x_b_inf:.8f}")
        return StationaryParams(a=a, k_star=k_star, x_s_inf=x_s_inf, x_b_inf=x_b_inf, x_M=params.x_M,
                                fee_ratio=target, residual=residual)
