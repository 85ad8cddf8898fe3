"""Shared generators and oracles for the test suite.

Everything here is deliberately independent of the package's closed-form
paths: equilibria come from damped best-response iteration, derivatives
from central finite differences, and regression baselines from explicit
dummy matrices, so the library code is checked against a second route.
"""

from __future__ import annotations

import numpy as np

from olmsim.market import (
    MarketPotentialSpec,
    MarketSpec,
    PotentialFamily,
    eval_potential,
    potential_slope,
)


def random_quadratic_market(rng: np.random.Generator) -> MarketSpec:
    """Random valid quadratic market with an interior equilibrium everywhere.

    S0 > c keeps S(a) above the marginal cost on the whole interval, so
    the comparative-statics grid has no corner rows.
    """
    c = rng.uniform(0.5, 3.0)
    kappa = 0.5 * c * rng.uniform(1.4, 3.0)
    S0 = max(kappa, c) + rng.uniform(0.3, 2.5)
    n = int(rng.integers(1, 9))
    b = rng.uniform(0.2, 2.0)
    pot = MarketPotentialSpec(PotentialFamily.QUADRATIC, S0=S0, kappa=kappa)
    return MarketSpec(n=n, c=c, b=b, potential=pot)


def random_logistic_market(rng: np.random.Generator) -> MarketSpec:
    """Random valid logistic-adoption market with interior equilibria."""
    for _ in range(200):
        mu = rng.uniform(1.05, 1.5)
        s = rng.uniform(0.15, 0.45)
        S0 = rng.uniform(2.0, 8.0)
        pot = MarketPotentialSpec(PotentialFamily.LOGISTIC_ADOPTION, S0=S0, mu=mu, s=s)
        d0 = abs(potential_slope(pot, 0.0))
        d1 = abs(potential_slope(pot, 1.0))
        c = d0 + rng.uniform(0.35, 0.65) * (d1 - d0)
        if c <= 0:
            continue
        # interior everywhere: S(a) - (1-a)c is smallest at one of the ends
        if eval_potential(pot, 0.0) - c <= 0.05:
            continue
        n = int(rng.integers(1, 9))
        b = rng.uniform(0.2, 2.0)
        return MarketSpec(n=n, c=c, b=b, potential=pot)
    raise AssertionError("could not draw a valid logistic market")


def random_market(rng: np.random.Generator) -> MarketSpec:
    if rng.uniform() < 0.5:
        return random_quadratic_market(rng)
    return random_logistic_market(rng)


def best_response_equilibrium(
    potential_value: float,
    marginal_cost: float,
    b: float,
    n: int,
    rng: np.random.Generator | None = None,
    iters: int = 400,
) -> np.ndarray:
    """Damped simultaneous best-response iteration from a random start.

    The undamped map is unstable for n >= 3; damping with weight
    2 / (n + 1) contracts it for any n.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    q = rng.uniform(0.01, 1.0, size=n) * max(potential_value, 1.0)
    omega = 2.0 / (n + 1)
    for _ in range(iters):
        total = q.sum()
        br = np.maximum(0.0, (potential_value - marginal_cost - b * (total - q)) / (2.0 * b))
        q = (1.0 - omega) * q + omega * br
    return q


def one_step_best_response(q: np.ndarray, potential_value: float, marginal_cost: float, b: float) -> np.ndarray:
    total = q.sum()
    return np.maximum(0.0, (potential_value - marginal_cost - b * (total - q)) / (2.0 * b))
