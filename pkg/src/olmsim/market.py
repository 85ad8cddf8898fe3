"""Cournot market model with AI-dependent demand and costs.

A market has ``n`` identical workers selling one service. The AI level
``a`` in [0, 1] is the fraction of tasks automation completes: it lowers
each worker's marginal cost to ``(1 - a) * c`` while eroding the demand
intercept ``S(a)``. Inverse demand is ``p = S(a) - b * total_quantity``.

Because S is decreasing and concave while the cost relief is linear, the
net effect of better AI on workers flips sign exactly once, at the AI
level where ``S'(a) + c = 0``. Below that inflection point workers gain
from AI improvements (honeymoon phase); above it they lose (substitution
phase).

All functions here are pure; there is no shared mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.optimize import brentq

from .errors import BoundaryConditionError, ValidationError

#: absolute tolerance on S'(a*) + c accepted from the root finder
INFLECTION_TOL = 1e-10

#: |a - a*| window treated as "exactly at the inflection point"
BOUNDARY_ATOL = 1e-12


class PotentialFamily(str, Enum):
    """Functional family of the market-potential curve S(a)."""

    QUADRATIC = "quadratic"
    LOGISTIC_ADOPTION = "logistic_adoption"


class Phase(str, Enum):
    HONEYMOON = "honeymoon"
    SUBSTITUTION = "substitution"


def _logistic_cdf(z: float) -> float:
    # stable for large |z|
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _logistic_pdf(z: float) -> float:
    l = _logistic_cdf(z)
    return l * (1.0 - l)


@dataclass(frozen=True)
class MarketPotentialSpec:
    """Market potential S(a), decreasing and concave on (0, 1].

    Two families are supported behind the same interface:

    * ``QUADRATIC``: ``S(a) = S0 - kappa * a**2``.
    * ``LOGISTIC_ADOPTION``: ``S(a) = S0 * (1 - L((a - mu) / s))`` with L
      the standard logistic CDF, modelling employer-side AI adoption that
      accelerates as the technology matures. ``mu >= 1`` keeps S concave
      on the whole unit interval.
    """

    family: PotentialFamily
    S0: float
    kappa: float | None = None
    mu: float | None = None
    s: float | None = None

    def __post_init__(self):
        if self.S0 <= 0:
            raise ValidationError(f"S0 must be positive, got {self.S0}")
        if self.family == PotentialFamily.QUADRATIC:
            if self.kappa is None or self.kappa <= 0:
                raise ValidationError(f"quadratic family needs kappa > 0, got {self.kappa}")
            if self.S0 <= self.kappa:
                raise ValidationError(
                    f"quadratic family needs S0 > kappa so S(1) > 0, got S0={self.S0}, kappa={self.kappa}"
                )
        elif self.family == PotentialFamily.LOGISTIC_ADOPTION:
            if self.s is None or self.s <= 0:
                raise ValidationError(f"logistic family needs scale s > 0, got {self.s}")
            if self.mu is None or self.mu < 1.0:
                raise ValidationError(
                    f"logistic family needs adoption midpoint mu >= 1 for concavity on [0, 1], got {self.mu}"
                )
        else:  # pragma: no cover - enum is exhaustive
            raise ValidationError(f"unknown potential family {self.family!r}")


def _check_ai_level(a: float) -> float:
    if not (0.0 <= a <= 1.0):
        raise ValidationError(f"AI level must lie in [0, 1], got {a}")
    return float(a)


def eval_potential(spec: MarketPotentialSpec, a: float) -> float:
    """Evaluate S(a). Strictly decreasing in ``a`` on (0, 1]."""
    a = _check_ai_level(a)
    if spec.family == PotentialFamily.QUADRATIC:
        return spec.S0 - spec.kappa * a * a
    return spec.S0 * (1.0 - _logistic_cdf((a - spec.mu) / spec.s))


def potential_slope(spec: MarketPotentialSpec, a: float) -> float:
    """Analytic derivative S'(a) of the market potential."""
    a = _check_ai_level(a)
    if spec.family == PotentialFamily.QUADRATIC:
        return -2.0 * spec.kappa * a
    return -(spec.S0 / spec.s) * _logistic_pdf((a - spec.mu) / spec.s)


@dataclass(frozen=True)
class MarketSpec:
    """One occupation-level market: worker count, cost, demand slope, potential.

    Construction enforces the boundary conditions ``|S'(0)| < c`` and
    ``|S'(1)| > c``; together with concavity of S they guarantee a unique
    interior inflection point.
    """

    n: int
    c: float
    b: float
    potential: MarketPotentialSpec

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValidationError(f"worker count n must be a positive integer, got {self.n}")
        if self.c <= 0:
            raise ValidationError(f"baseline marginal cost c must be positive, got {self.c}")
        if self.b <= 0:
            raise ValidationError(f"demand slope b must be positive, got {self.b}")
        s0 = abs(potential_slope(self.potential, 0.0))
        s1 = abs(potential_slope(self.potential, 1.0))
        if s0 >= self.c or s1 <= self.c:
            raise BoundaryConditionError(
                f"boundary conditions violated: need |S'(0)| < c < |S'(1)|, "
                f"got |S'(0)|={s0:.6g}, c={self.c:.6g}, |S'(1)|={s1:.6g}"
            )

    def marginal_cost(self, a: float) -> float:
        return (1.0 - a) * self.c


@dataclass(frozen=True)
class Equilibrium:
    """Symmetric per-worker Cournot outcome at one AI level."""

    q: float
    p: float
    profit: float
    revenue: float
    corner: bool = False


@dataclass(frozen=True)
class PhaseResult:
    phase: Phase
    at_boundary: bool = False


def equilibrium_from_primitives(potential_value: float, marginal_cost: float, b: float, n: int) -> Equilibrium:
    """Closed-form symmetric Cournot equilibrium for given primitives.

    Each worker's best response to the others' total quantity Q is
    ``q = (S - mc - b*Q) / (2b)``; imposing symmetry yields
    ``q = (S - mc) / (b * (n + 1))``. When demand cannot cover the
    marginal cost the equilibrium is the corner ``q = 0``.
    """
    if potential_value <= marginal_cost:
        return Equilibrium(q=0.0, p=potential_value, profit=0.0, revenue=0.0, corner=True)
    q = (potential_value - marginal_cost) / (b * (n + 1))
    p = (potential_value + n * marginal_cost) / (n + 1)
    profit = b * q * q
    return Equilibrium(q=q, p=p, profit=profit, revenue=p * q, corner=False)


def cournot_equilibrium(market: MarketSpec, a: float) -> Equilibrium:
    """Symmetric equilibrium of ``market`` at AI level ``a``."""
    a = _check_ai_level(a)
    return equilibrium_from_primitives(
        eval_potential(market.potential, a), market.marginal_cost(a), market.b, market.n
    )


def inflection_point(market: MarketSpec) -> float:
    """The unique root a* of S'(a) + c = 0 in (0, 1).

    S' is strictly decreasing (concavity), so the boundary conditions
    checked at construction bracket the root; Brent iteration refines it
    until ``|S'(a*) + c| < 1e-10``.
    """
    spec = market.potential

    def gap(a: float) -> float:
        return potential_slope(spec, a) + market.c

    root = brentq(gap, 0.0, 1.0, xtol=1e-14, rtol=8.9e-16, maxiter=200)
    residual = gap(root)
    if abs(residual) >= INFLECTION_TOL:  # pragma: no cover - brentq is far tighter
        raise BoundaryConditionError(
            f"inflection solve left residual {residual:.3e} >= {INFLECTION_TOL}"
        )
    return float(root)


def classify_phase(market: MarketSpec, a: float) -> PhaseResult:
    """Honeymoon below the inflection point, substitution at or above it.

    The tie ``a == a*`` (within 1e-12) is reported as substitution with
    ``at_boundary`` set.
    """
    a = _check_ai_level(a)
    a_star = inflection_point(market)
    if abs(a - a_star) <= BOUNDARY_ATOL:
        return PhaseResult(Phase.SUBSTITUTION, at_boundary=True)
    if a < a_star:
        return PhaseResult(Phase.HONEYMOON)
    return PhaseResult(Phase.SUBSTITUTION)


@dataclass(frozen=True)
class StaticsRow:
    a: float
    q: float
    p: float
    profit: float
    revenue: float
    phase: Phase


def sweep_comparative_statics(market: MarketSpec, grid_size: int) -> list[StaticsRow]:
    """Equilibrium outcomes on a uniform AI-level grid over [0, 1].

    Per-worker quantity and profit rise with ``a`` on grid points below
    the inflection point and fall above it; revenue falls above it.
    """
    if grid_size < 3:
        raise ValidationError(f"grid_size must be at least 3, got {grid_size}")
    a_star = inflection_point(market)
    rows = []
    for k in range(grid_size):
        a = k / (grid_size - 1)
        eq = cournot_equilibrium(market, a)
        phase = Phase.HONEYMOON if a < a_star - BOUNDARY_ATOL else Phase.SUBSTITUTION
        rows.append(StaticsRow(a=a, q=eq.q, p=eq.p, profit=eq.profit, revenue=eq.revenue, phase=phase))
    return rows
