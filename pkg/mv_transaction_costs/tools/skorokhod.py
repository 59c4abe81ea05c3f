# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd
from scipy.stats import norm

from .errors import DomainError, NumericalIntegrityError
from .logger import Logger
from .market import Feasibility, FreeBoundaries, MarketParams, Position, Region


@dataclass(frozen=True)
class SimulationConfig:
    """
    Monte Carlo settings; normal_method is "ziggurat" or "inverse_cdf"
    """

    n_paths: int = 100000
    n_steps: int = 2000
    seed: int = 20240101
    batch_size: int = 20000
    normal_method: str = "ziggurat"
    trace_paths: int = 0

    def __post_init__(self) -> None:
        if self.n_paths < 2 or self.n_steps < 1 or self.batch_size < 1:
            raise DomainError("n_paths must be at least 2, n_steps and batch_size at least 1")
        if self.normal_method not in ("ziggurat", "inverse_cdf"):
            raise DomainError(f"unknown normal_method {self.normal_method!r}")
        if self.trace_paths < 0:
            raise DomainError("trace_paths must be non-negative")


@dataclass(frozen=True)
class PathState:
    """
    Vectorised state of a batch of paths: adjusted bond X, stock Y, cumulative purchases M and sales N
    """

    t: float
    X: np.ndarray
    Y: np.ndarray
    M: np.ndarray
    N: np.ndarray

    @classmethod
    def start(cls, post_trade: Position, n_paths: int) -> "PathState":
        return PathState(t=0.0, X=np.full(n_paths, post_trade.x), Y=np.full(n_paths, post_trade.y),
                         M=np.zeros(n_paths), N=np.zeros(n_paths))


@dataclass
class StepCounters:
    """
    Event counts gathered while stepping
    """

    sell_contacts: int = 0
    buy_contacts: int = 0
    corners: int = 0
    short_covers: int = 0
    buy_after_T0: int = 0
    conservation_violations: int = 0
    path_steps: int = 0


@dataclass(frozen=True)
class SimulationReport:
    n_paths: int
    n_discarded: int
    mean_W: float
    mean_W_ci: float
    var_W: float
    var_W_ci: float
    mean_M: float
    mean_N: float
    fraction_time_on_sell: float
    fraction_time_on_buy: float
    corners: int = 0
    short_covers: int = 0
    buy_after_T0: int = 0
    conservation_violations: int = 0
    expected_mean: Optional[float] = None
    expected_variance: Optional[float] = None
    trace: Optional[pd.DataFrame] = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "n_discarded": self.n_discarded,
            "mean_W_dollars": self.mean_W,
            "mean_W_ci95_dollars": self.mean_W_ci,
            "var_W_dollars2": self.var_W,
            "var_W_ci95_dollars2": self.var_W_ci,
            "mean_M_dollars": self.mean_M,
            "mean_N_dollars": self.mean_N,
            "fraction_time_on_sell": self.fraction_time_on_sell,
            "fraction_time_on_buy": self.fraction_time_on_buy,
            "corner_events": self.corners,
            "short_covers": self.short_covers,
            "buy_contacts_after_T0": self.buy_after_T0,
            "conservation_violations": self.conservation_violations,
            "expected_mean_dollars": self.expected_mean,
            "expected_variance_dollars2": self.expected_variance
        }


class SkorokhodSimulator:
    """
    Euler steps of the bond/stock diffusion with oblique projection onto closure(NT)
    """

    CONSERVATION_TOLERANCE: float = 1e-12
    MAX_DISCARD_FRACTION: float = 1e-3
    CONFIDENCE: float = 0.95

    @classmethod
    def _check_conserved(cls, before: np.ndarray, after: np.ndarray, counters: StepCounters) -> None:
        scale: np.ndarray = np.maximum(1.0, np.abs(before))
        violated: np.ndarray = np.abs(after - before) > cls.CONSERVATION_TOLERANCE * scale
        counters.conservation_violations += int(np.count_nonzero(violated))

    @classmethod
    def step(cls, state: PathState, dt: float, dB: np.ndarray, bounds: FreeBoundaries, params: MarketParams,
             counters: Optional[StepCounters] = None) -> PathState:
        """
        Free Euler step to t + dt, then sell projection, then buy projection (or short cover after T0)
        """
        if not dt > 0:
            raise DomainError(f"dt={dt} must be positive")
        if counters is None:
            counters = StepCounters()
        t: float = state.t + dt
        X: np.ndarray = state.X * (1.0 + params.r * dt)
        Y: np.ndarray = state.Y * (1.0 + params.alpha * dt + params.sigma * dB)
        M: np.ndarray = state.M.copy()
        N: np.ndarray = state.N.copy()
        sell_fee: float = 1.0 - params.mu
        buy_fee: float = 1.0 + params.lam
        x_s: float = bounds.x_s_at(min(t, params.T))
        x_b: float = bounds.x_b_at(t) if t < params.T else -math.inf
        counters.path_steps += len(X)

        # Both violations are read off the pre-projection state
        sell: np.ndarray = (Y > 0) & (X > x_s * Y)
        if math.isfinite(x_b):
            counters.corners += int(np.count_nonzero(sell & (X < x_b * Y)))

        # Sell back to x = x_s y along (1 - mu, -1)
        if sell.any():
            before: np.ndarray = X[sell] + sell_fee * Y[sell]
            amount: np.ndarray = (x_s * Y[sell] - X[sell]) / (x_s + sell_fee)
            X[sell] += sell_fee * amount
            Y[sell] -= amount
            N[sell] += amount
            cls._check_conserved(before, X[sell] + sell_fee * Y[sell], counters)
            counters.sell_contacts += int(sell.sum())

        # Buy up to x = x_b y along (-(1 + lambda), 1)
        if math.isfinite(x_b):
            buy: np.ndarray = (Y <= 0) | (X < x_b * Y)
            if buy.any():
                before = X[buy] + buy_fee * Y[buy]
                amount = (X[buy] - x_b * Y[buy]) / (x_b + buy_fee)
                X[buy] -= buy_fee * amount
                Y[buy] += amount
                M[buy] += amount
                cls._check_conserved(before, X[buy] + buy_fee * Y[buy], counters)
                counters.buy_contacts += int(buy.sum())
        else:
            short: np.ndarray = Y <= 0
            if short.any():
                amount = -Y[short]
                X[short] -= buy_fee * amount
                Y[short] = 0.0
                M[short] += amount
                counters.short_covers += int(short.sum())
        return PathState(t=t, X=X, Y=Y, M=M, N=N)

    @classmethod
    def _normals(cls, rng: np.random.Generator, size: int, method: str) -> np.ndarray:
        if method == "inverse_cdf":
            return norm.ppf(rng.random(size))
        return rng.standard_normal(size)

    @classmethod
    def _run_batch(cls, post_trade: Position, n_paths: int, bounds: FreeBoundaries, params: MarketParams,
                   cfg: SimulationConfig, rng: np.random.Generator, counters: StepCounters,
                   trace_paths: int) -> tuple[PathState, int, int, Optional[pd.DataFrame]]:
        dt: float = params.T / cfg.n_steps
        state: PathState = PathState.start(post_trade, n_paths)
        sell_steps: int = 0
        buy_steps: int = 0
        rows: list[pd.DataFrame] = []

        def record(s: PathState) -> None:
            if trace_paths:
                rows.append(pd.DataFrame({"path": np.arange(trace_paths), "t": s.t, "X": s.X[:trace_paths],
                                          "Y": s.Y[:trace_paths], "M": s.M[:trace_paths], "N": s.N[:trace_paths]}))

        record(state)
        for n in range(cfg.n_steps):
            dB: np.ndarray = math.sqrt(dt) * cls._normals(rng, n_paths, cfg.normal_method)
            sells_before, buys_before = counters.sell_contacts, counters.buy_contacts
            after_T0: bool = (n + 1) * dt >= bounds.T0
            state = cls.step(replace(state, t=n * dt), dt, dB, bounds, params, counters)
            sell_steps += counters.sell_contacts - sells_before
            buy_steps += counters.buy_contacts - buys_before
            if after_T0:
                counters.buy_after_T0 += counters.buy_contacts - buys_before
            record(state)

        trace: Optional[pd.DataFrame] = pd.concat(rows, ignore_index=True) if rows else None
        return state, sell_steps, buy_steps, trace

    @classmethod
    def simulate(cls, post_trade: Position, ell_star: float, z: float, bounds: FreeBoundaries,
                 params: MarketParams, cfg: Optional[SimulationConfig] = None,
                 expected_variance: Optional[float] = None) -> SimulationReport:
        """
        Terminal wealth W = net wealth of the adjusted process + ell_star, with 95% confidence intervals
        """
        # Init config if None
        if cfg is None:
            cfg = SimulationConfig()
        if Feasibility.classify_region(0.0, post_trade, bounds) == Region.SOLVENT:
            raise DomainError("post-trade position must have negative net wealth")

        counters: StepCounters = StepCounters()
        children: list[np.random.SeedSequence] = np.random.SeedSequence(cfg.seed).spawn(
            int(math.ceil(cfg.n_paths / cfg.batch_size)))
        wealth: list[np.ndarray] = []
        purchases: list[np.ndarray] = []
        sales: list[np.ndarray] = []
        sell_steps: int = 0
        buy_steps: int = 0
        trace: Optional[pd.DataFrame] = None

        remaining: int = cfg.n_paths
        for b, child in enumerate(children):
            size: int = min(cfg.batch_size, remaining)
            remaining -= size
            rng: np.random.Generator = np.random.default_rng(child)
            trace_count: int = min(cfg.trace_paths, size) if b == 0 else 0
            state, sells, buys, batch_trace = cls._run_batch(post_trade, size, bounds, params, cfg, rng, counters,
                                                             trace_count)
            sell_steps += sells
            buy_steps += buys
            trace = batch_trace if batch_trace is not None else trace
            net: np.ndarray = (state.X + (1.0 - params.mu) * np.maximum(state.Y, 0.0)
                               - (1.0 + params.lam) * np.maximum(-state.Y, 0.0))
            wealth.append(net + ell_star)
            purchases.append(state.M)
            sales.append(state.N)

        W: np.ndarray = np.concatenate(wealth)
        M: np.ndarray = np.concatenate(purchases)
        N: np.ndarray = np.concatenate(sales)

        # Discard non-finite paths
        finite: np.ndarray = np.isfinite(W) & np.isfinite(M) & np.isfinite(N)
        discarded: int = int(np.count_nonzero(~finite))
        if discarded > cls.MAX_DISCARD_FRACTION * cfg.n_paths:
            raise NumericalIntegrityError(f"{discarded} of {cfg.n_paths} paths were non-finite")
        if discarded:
            Logger.log("w", f"Discarded {discarded} non-finite paths")
        W, M, N = W[finite], M[finite], N[finite]

        n: int = len(W)
        quantile: float = float(norm.ppf(0.5 + cls.CONFIDENCE / 2.0))
        mean_W: float = float(W.mean())
        var_W: float = float(W.var(ddof=1))
        fourth: float = float(np.mean((W - mean_W) ** 4))
        var_se: float = math.sqrt(max(fourth - var_W ** 2, 0.0) / n)

        if counters.corners:
            Logger.log("d", f"{counters.corners} corner events resolved sell-then-buy")
        if counters.buy_after_T0:
            Logger.log("w", f"{counters.buy_after_T0} buy-boundary contacts after T0")
        if counters.conservation_violations:
            Logger.log("w", f"{counters.conservation_violations} projections broke wealth conservation")
        Logger.log("i", f"Monte Carlo: E[W]={mean_W:.6f} +/- {quantile * math.sqrt(var_W / n):.2e}, "
                        f"Var[W]={var_W:.6f} +/- {quantile * var_se:.2e}")

        total_steps: int = max(counters.path_steps, 1)
        return SimulationReport(n_paths=n, n_discarded=discarded, mean_W=mean_W,
                                mean_W_ci=quantile * math.sqrt(var_W / n), var_W=var_W, var_W_ci=quantile * var_se,
                                mean_M=float(M.mean()), mean_N=float(N.mean()),
                                fraction_time_on_sell=sell_steps / total_steps,
                                fraction_time_on_buy=buy_steps / total_steps, corners=counters.corners,
                                short_covers=counters.short_covers, buy_after_T0=counters.buy_after_T0,
                                conservation_violations=counters.conservation_violations, expected_mean=z,
                                expected_variance=expected_variance, trace=trace)
