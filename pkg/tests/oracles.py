# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import math

import numpy as np
from scipy.integrate import solve_ivp


def shooting_oracle(k: float, a: float, sigma: float = 0.2) -> float:
    """
    Fee ratio implied by k, from integrating L v = 0 leftward from the sell boundary (units with 1 - mu = 1)

    Starts at x_s = -a / (a + k) on v = x + 1 with v' = 1 and stops where v' returns to 1.
    """
    excess: float = -a * sigma ** 2 / 2.0 - sigma ** 2
    s2: float = sigma ** 2

    def rhs(x: float, state: np.ndarray) -> list[float]:
        v, p = state
        reaction: float = s2 * ((2.0 * x ** 2 * p - x ** 2 * p ** 2) / v - 2.0 * x)
        return [p, (excess * x * p - (excess + s2) * v - reaction) / (0.5 * s2 * x ** 2)]

    def slope_back_to_one(x: float, state: np.ndarray) -> float:
        return state[1] - 1.0

    slope_back_to_one.terminal = True
    slope_back_to_one.direction = 1

    x_s: float = -a / (a + k)
    result = solve_ivp(rhs, (x_s, 200.0 * x_s), [x_s + 1.0, 1.0], method="DOP853", rtol=1e-13, atol=1e-14,
                       events=slope_back_to_one)
    if not result.t_events[0].size:
        return math.nan
    x_b: float = float(result.t_events[0][0])
    v_b: float = float(result.y_events[0][0][0])
    return v_b - x_b
