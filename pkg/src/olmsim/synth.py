"""Synthetic worker-month panels and market-week demand series.

The generating process realizes the Cournot model: each market follows an
AI-level path across two successive shocks, the equilibrium quantity sets
the Poisson rate of a worker's monthly job count, and the equilibrium
price maps counts into earnings. Worker and month effects enter the rate
multiplicatively, so two-way fixed-effects estimators are the natural
match for the resulting data.

Counts are drawn by inverse CDF from pre-drawn uniforms. That makes the
whole simulation a deterministic function of ``(config, seed)`` and lets
``ground_truth_att`` rerun the same draws under a counterfactual AI path
(common random numbers), which removes Monte Carlo bias from the oracle.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, ValidationError
from .market import MarketPotentialSpec, MarketSpec, PotentialFamily, cournot_equilibrium
from .panel import DemandArrays, DemandRow, PanelArrays, PanelRow

#: months covered by the default panel window: six pre-shock months, a
#: two-month gap around the first release, ten post-shock months
DEFAULT_MONTHS = (
    "2022-05", "2022-06", "2022-07", "2022-08", "2022-09", "2022-10",
    "2023-01", "2023-02", "2023-03", "2023-04", "2023-05", "2023-06",
    "2023-07", "2023-08", "2023-09", "2023-10",
)
DEFAULT_SHOCK1_INDEX = 6   # first post-release month
DEFAULT_SHOCK2_INDEX = 8   # second release lands in 2023-03

_MODERATOR_COLUMNS = ("us", "experienced")


#: rates above this go through scipy's ppf instead of the term-by-term search
_ICDF_RATE_CUTOFF = 60.0


def poisson_icdf(u: np.ndarray, lam: np.ndarray, max_count: int = 2000) -> np.ndarray:
    """Vectorized Poisson inverse CDF: smallest k with CDF(k) >= u.

    Drawing counts through a uniform keeps them a pure function of ``u``,
    which is what the common-random-number counterfactuals rely on. Small
    rates use a cumulative term search (an order of magnitude faster than
    the generic ppf at panel scale); large rates defer to scipy.
    """
    u = np.asarray(u, dtype=np.float64)
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), u.shape).copy()
    if np.any(lam < 0):
        raise ValidationError("poisson rate must be nonnegative")
    k = np.zeros(u.shape, dtype=np.int64)
    big = lam > _ICDF_RATE_CUTOFF
    if big.any():
        from scipy import stats

        k[big] = stats.poisson.ppf(u[big], lam[big]).astype(np.int64)
        lam = np.where(big, 0.0, lam)
        u = np.where(big, 0.0, u)
    p = np.exp(-lam)
    cum = p.copy()
    active = cum < u
    i = 0
    while active.any():
        i += 1
        if i > max_count:
            raise ConvergenceError(f"poisson inverse CDF exceeded {max_count} terms", iterations=i)
        p = p * (lam / i)
        cum = cum + p
        k[active] = i
        active = cum < u
    return k


@dataclass(frozen=True)
class AiPath:
    """AI levels before the first shock and after each of the two shocks."""

    a_pre: float
    a_post35: float
    a_post40: float

    def __post_init__(self):
        for name in ("a_pre", "a_post35", "a_post40"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"a_path {name} must lie in [0, 1], got {v}")
        if not self.a_pre <= self.a_post35 <= self.a_post40:
            raise ValidationError(
                f"a_path must be nondecreasing, got ({self.a_pre}, {self.a_post35}, {self.a_post40})"
            )

    @property
    def constant(self) -> bool:
        return self.a_pre == self.a_post35 == self.a_post40

    def frozen_at_pre(self) -> "AiPath":
        return AiPath(self.a_pre, self.a_pre, self.a_pre)

    def level_at(self, month: int, shock1: int, shock2: int) -> float:
        if month < shock1:
            return self.a_pre
        if month < shock2:
            return self.a_post35
        return self.a_post40


@dataclass(frozen=True)
class MarketScenario:
    """One market in a scenario: its structure, AI path, and worker-level mean."""

    market_id: str
    market: MarketSpec
    a_path: AiPath
    worker_fe_mean: float = 0.0


@dataclass(frozen=True)
class ModeratorBoost:
    """Subgroup whose effective AI-shock exposure is scaled by ``multiplier``."""

    column: str
    multiplier: float

    def __post_init__(self):
        if self.column not in _MODERATOR_COLUMNS:
            raise ValidationError(f"moderator column must be one of {_MODERATOR_COLUMNS}, got {self.column!r}")
        if self.multiplier < 0:
            raise ValidationError(f"moderator multiplier must be nonnegative, got {self.multiplier}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of a multi-market data-generating process."""

    markets: tuple[MarketScenario, ...]
    control_market_id: str
    workers_per_market: int = 500
    months: tuple[str, ...] = DEFAULT_MONTHS
    shock1_index: int = DEFAULT_SHOCK1_INDEX
    shock2_index: int = DEFAULT_SHOCK2_INDEX
    worker_fe_sigma: float = 0.4
    month_fe_sigma: float = 0.05
    noise_sigma: float = 0.3
    seed: int = 0
    jobs_scale: float = 4.0
    background_rate: float = 2.0
    weekly_scale: float = 5.0
    us_share: float = 0.3
    experienced_share: float = 0.5
    moderator_boost: ModeratorBoost | None = None

    def __post_init__(self):
        if not self.markets:
            raise ValidationError("scenario needs at least one market")
        ids = [m.market_id for m in self.markets]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"market ids must be unique, got {ids}")
        if self.control_market_id not in ids:
            raise ValidationError(f"control market {self.control_market_id!r} not among {ids}")
        control = self.market(self.control_market_id)
        if not control.a_path.constant:
            raise ValidationError("control market must have a constant a_path")
        if self.workers_per_market < 1:
            raise ValidationError("workers_per_market must be positive")
        n_months = len(self.months)
        if n_months < 2:
            raise ValidationError("need at least 2 months")
        if not (1 <= self.shock1_index <= self.shock2_index < n_months):
            raise ValidationError(
                f"need 1 <= shock1_index <= shock2_index < {n_months}, "
                f"got {self.shock1_index}, {self.shock2_index}"
            )
        for name in ("worker_fe_sigma", "month_fe_sigma", "noise_sigma", "background_rate"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        for name in ("jobs_scale", "weekly_scale"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("us_share", "experienced_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")
        if self.moderator_boost is not None:
            for m in self.markets:
                boosted = _boost_level(m.a_path.a_post40, m.a_path.a_pre, self.moderator_boost.multiplier)
                if boosted > 1.0:
                    raise ValidationError(
                        f"moderator boost pushes market {m.market_id!r} past a=1 ({boosted:.3f})"
                    )

    def market(self, market_id: str) -> MarketScenario:
        for m in self.markets:
            if m.market_id == market_id:
                return m
        raise ValidationError(f"unknown market {market_id!r}")

    @property
    def n_months(self) -> int:
        return len(self.months)

    def treated_ids(self) -> list[str]:
        return [m.market_id for m in self.markets if m.market_id != self.control_market_id]

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


def _boost_level(a: float, a_pre: float, multiplier: float) -> float:
    return a_pre + multiplier * (a - a_pre)


def _month_day_offsets(months: Sequence[str]) -> np.ndarray:
    """Days elapsed at each month label relative to the first label.

    Falls back to an average month length when a label is not YYYY-MM.
    Registration dates in days plus these offsets give a months-since-
    registration tenure that is not an exact unit-plus-time function, so
    tenure survives two-way absorption as a control.
    """
    try:
        dates = [datetime.date(int(m[:4]), int(m[5:7]), 1) for m in months]
        return np.array([(d - dates[0]).days for d in dates], dtype=np.float64)
    except (ValueError, IndexError):
        return np.arange(len(months), dtype=np.float64) * 30.4375


#: share of the earnings-noise variance that is a persistent worker trait,
#: giving the cross-worker price dispersion real panels show
EARN_NOISE_WORKER_SHARE = 0.5


@dataclass
class _MarketDraws:
    worker_fe: np.ndarray
    reg_day: np.ndarray
    us: np.ndarray
    experienced: np.ndarray
    earn_trait: np.ndarray
    u_jobs: np.ndarray
    eps: np.ndarray
    u_bg: np.ndarray


@dataclass
class _Draws:
    month_fe: np.ndarray
    per_market: list[_MarketDraws]


def _draw(config: ScenarioConfig, seed: int) -> _Draws:
    """All randomness for one panel replication, in a fixed order."""
    rng = np.random.default_rng([seed, 1])
    w, t = config.workers_per_market, config.n_months
    month_fe = rng.standard_normal(t) * config.month_fe_sigma
    per_market = []
    for scenario in config.markets:
        per_market.append(
            _MarketDraws(
                worker_fe=scenario.worker_fe_mean + rng.standard_normal(w) * config.worker_fe_sigma,
                reg_day=rng.integers(0, 3650, size=w),
                us=(rng.uniform(size=w) < config.us_share).astype(np.int64),
                experienced=(rng.uniform(size=w) < config.experienced_share).astype(np.int64),
                earn_trait=rng.standard_normal(w),
                u_jobs=rng.uniform(size=(w, t)),
                eps=rng.standard_normal((w, t)),
                u_bg=rng.uniform(size=(w, t)),
            )
        )
    return _Draws(month_fe=month_fe, per_market=per_market)


def _equilibrium_levels(scenario: MarketScenario, config: ScenarioConfig, path: AiPath, boost: float | None):
    """Per-month (q, p) for the base path and, if boosted, the scaled path."""
    t = config.n_months
    q = np.empty((2, t))
    p = np.empty((2, t))
    for month in range(t):
        a = path.level_at(month, config.shock1_index, config.shock2_index)
        for row, mult in enumerate((None, boost)):
            a_eff = a if mult is None else min(1.0, _boost_level(a, path.a_pre, mult))
            eq = cournot_equilibrium(scenario.market, a_eff)
            q[row, month] = eq.q
            p[row, month] = eq.p
    return q, p


def _assemble(config: ScenarioConfig, draws: _Draws, counterfactual: bool) -> PanelArrays:
    w, t = config.workers_per_market, config.n_months
    day_offsets = _month_day_offsets(config.months)
    months = np.arange(t)
    post35 = (months >= config.shock1_index).astype(np.int64)
    post40 = (months >= config.shock2_index).astype(np.int64)
    boost = config.moderator_boost
    pieces = []
    for idx, scenario in enumerate(config.markets):
        d = draws.per_market[idx]
        path = scenario.a_path.frozen_at_pre() if counterfactual else scenario.a_path
        q, p = _equilibrium_levels(scenario, config, path, boost.multiplier if boost else None)
        if boost is not None:
            boosted = d.us if boost.column == "us" else d.experienced
        else:
            boosted = np.zeros(w, dtype=np.int64)
        q_cell = q[boosted]  # (w, t): row 0 base path, row 1 boosted path
        p_cell = p[boosted]
        lam = q_cell * config.jobs_scale * np.exp(d.worker_fe[:, None] + draws.month_fe[None, :])
        jobs = poisson_icdf(d.u_jobs, lam)
        # earnings noise splits into a persistent worker trait and a cell
        # shock; marginally it stays Normal(0, noise_sigma)
        share = EARN_NOISE_WORKER_SHARE
        earn_noise = np.sqrt(share) * d.earn_trait[:, None] + np.sqrt(1.0 - share) * d.eps
        earn = jobs * p_cell * np.exp(config.noise_sigma * earn_noise)
        background = poisson_icdf(d.u_bg, np.full((w, t), config.background_rate))
        total = jobs + background
        ratio = np.divide(jobs, total, out=np.zeros((w, t)), where=total > 0)
        tenure = ((d.reg_day[:, None] + day_offsets[None, :]) // 30).astype(np.int64)
        treated = int(scenario.market_id != config.control_market_id)
        worker_ids = idx * w + np.arange(w)
        pieces.append(
            PanelArrays(
                worker_id=np.repeat(worker_ids, t),
                market_id=np.full(w * t, scenario.market_id, dtype=object),
                month_index=np.tile(months, w),
                treat=np.full(w * t, treated, dtype=np.int64),
                post35=np.tile(post35, w),
                post40=np.tile(post40, w),
                fjobnum=jobs.reshape(-1),
                fjobearn=earn.reshape(-1),
                fjobratio=ratio.reshape(-1),
                tenure=tenure.reshape(-1),
                us=np.repeat(d.us, t),
                experienced=np.repeat(d.experienced, t),
            )
        )
    return PanelArrays(
        **{
            name: np.concatenate([getattr(p, name) for p in pieces])
            for name in (
                "worker_id", "market_id", "month_index", "treat", "post35", "post40",
                "fjobnum", "fjobearn", "fjobratio", "tenure", "us", "experienced",
            )
        }
    )


def generate_panel_arrays(config: ScenarioConfig) -> PanelArrays:
    """Columnar panel for one scenario; deterministic given the config seed."""
    return _assemble(config, _draw(config, config.seed), counterfactual=False)


def generate_panel(config: ScenarioConfig) -> list[PanelRow]:
    """Worker-month rows for one scenario (row form of the same panel)."""
    return generate_panel_arrays(config).to_rows()


_TRANSFORMS = {
    "fjobnum": np.log1p,
    "fjobearn": np.log1p,
    "fjobratio": lambda x: x,
}


@dataclass(frozen=True)
class GroundTruth:
    """Monte Carlo estimate of the treated-post average treatment effect."""

    att: float
    mc_se: float
    reps: int
    outcome: str


def ground_truth_att(config: ScenarioConfig, outcome: str = "fjobnum", reps: int = 200) -> GroundTruth:
    """ATT oracle: factual minus frozen-at-pre outcome under shared draws.

    Replication ``r`` reruns the full generating process from seed
    ``seed ^ r`` twice, once with the configured AI paths and once with
    every path frozen at its pre level, and averages the difference of
    the transformed outcome over treated post-shock cells.
    """
    if reps < 1:
        raise ValidationError("reps must be positive")
    if outcome not in _TRANSFORMS:
        raise ValidationError(f"outcome must be one of {sorted(_TRANSFORMS)}, got {outcome!r}")
    transform = _TRANSFORMS[outcome]
    diffs = np.empty(reps)
    for r in range(reps):
        draws = _draw(config, config.seed ^ r)
        factual = _assemble(config, draws, counterfactual=False)
        frozen = _assemble(config, draws, counterfactual=True)
        cells = (factual.treat == 1) & (factual.post35 == 1)
        y1 = transform(factual.column(outcome).astype(np.float64))
        y0 = transform(frozen.column(outcome).astype(np.float64))
        diffs[r] = float(np.mean(y1[cells] - y0[cells]))
    se = float(diffs.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
    return GroundTruth(att=float(diffs.mean()), mc_se=se, reps=reps, outcome=outcome)


def generate_demand_arrays(
    config: ScenarioConfig,
    weeks: int = 95,
    shock1_week: int | None = None,
    shock2_week: int | None = None,
) -> DemandArrays:
    """Market-week fulfilled-posting counts; deterministic given the seed.

    The weekly rate is the market-level transaction volume ``n * q`` at
    the week's AI level, scaled and shifted by a common week effect. The
    default shock placement mirrors the panel window proportions.
    """
    if weeks < 8:
        raise ValidationError(f"demand series needs at least 8 weeks, got {weeks}")
    s1 = weeks // 2 if shock1_week is None else shock1_week
    s2 = (s1 + max(1, weeks // 6)) if shock2_week is None else shock2_week
    if not (1 <= s1 <= s2 < weeks):
        raise ValidationError(f"need 1 <= shock1_week <= shock2_week < {weeks}, got {s1}, {s2}")
    rng = np.random.default_rng([config.seed, 2])
    week_fe = rng.standard_normal(weeks) * config.month_fe_sigma
    week_index = np.arange(weeks)
    post = (week_index >= s1).astype(np.int64)
    pieces = []
    for scenario in config.markets:
        rate = np.empty(weeks)
        for wk in range(weeks):
            a = scenario.a_path.level_at(wk, s1, s2)
            eq = cournot_equilibrium(scenario.market, a)
            rate[wk] = scenario.market.n * eq.q * config.weekly_scale
        lam = rate * np.exp(week_fe)
        postnum = poisson_icdf(rng.uniform(size=weeks), lam)
        treated = int(scenario.market_id != config.control_market_id)
        pieces.append(
            DemandArrays(
                market_id=np.full(weeks, scenario.market_id, dtype=object),
                week_index=week_index.copy(),
                postnum=postnum,
                treat=np.full(weeks, treated, dtype=np.int64),
                post=post.copy(),
            )
        )
    return DemandArrays(
        **{
            name: np.concatenate([getattr(p, name) for p in pieces])
            for name in ("market_id", "week_index", "postnum", "treat", "post")
        }
    )


def generate_demand_series(
    config: ScenarioConfig,
    weeks: int = 95,
    shock1_week: int | None = None,
    shock2_week: int | None = None,
) -> list[DemandRow]:
    return generate_demand_arrays(config, weeks, shock1_week, shock2_week).to_rows()


# ---------------------------------------------------------------------------
# serialization


def _potential_to_dict(spec: MarketPotentialSpec) -> dict:
    out = {"family": spec.family.value, "S0": spec.S0}
    for name in ("kappa", "mu", "s"):
        value = getattr(spec, name)
        if value is not None:
            out[name] = value
    return out


def _potential_from_dict(data: dict) -> MarketPotentialSpec:
    try:
        family = PotentialFamily(data["family"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"potential.family must be one of "
                              f"{[f.value for f in PotentialFamily]}: {exc}") from exc
    return MarketPotentialSpec(
        family=family,
        S0=float(data["S0"]),
        kappa=float(data["kappa"]) if "kappa" in data else None,
        mu=float(data["mu"]) if "mu" in data else None,
        s=float(data["s"]) if "s" in data else None,
    )


def config_to_dict(config: ScenarioConfig) -> dict:
    return {
        "markets": [
            {
                "market_id": m.market_id,
                "market": {
                    "n": m.market.n,
                    "c": m.market.c,
                    "b": m.market.b,
                    "potential": _potential_to_dict(m.market.potential),
                },
                "a_path": {
                    "a_pre": m.a_path.a_pre,
                    "a_post35": m.a_path.a_post35,
                    "a_post40": m.a_path.a_post40,
                },
                "worker_fe_mean": m.worker_fe_mean,
            }
            for m in config.markets
        ],
        "control_market_id": config.control_market_id,
        "workers_per_market": config.workers_per_market,
        "months": list(config.months),
        "shock1_index": config.shock1_index,
        "shock2_index": config.shock2_index,
        "worker_fe_sigma": config.worker_fe_sigma,
        "month_fe_sigma": config.month_fe_sigma,
        "noise_sigma": config.noise_sigma,
        "seed": config.seed,
        "jobs_scale": config.jobs_scale,
        "background_rate": config.background_rate,
        "weekly_scale": config.weekly_scale,
        "us_share": config.us_share,
        "experienced_share": config.experienced_share,
        "moderator_boost": (
            {"column": config.moderator_boost.column, "multiplier": config.moderator_boost.multiplier}
            if config.moderator_boost
            else None
        ),
    }


def _require(data: dict, key: str, context: str):
    if key not in data:
        raise ValidationError(f"{context} is missing required field {key!r}")
    return data[key]


def config_from_dict(data: dict) -> ScenarioConfig:
    markets = []
    for i, entry in enumerate(_require(data, "markets", "scenario")):
        context = f"markets[{i}]"
        spec = _require(entry, "market", context)
        path = _require(entry, "a_path", context)
        markets.append(
            MarketScenario(
                market_id=str(_require(entry, "market_id", context)),
                market=MarketSpec(
                    n=int(_require(spec, "n", f"{context}.market")),
                    c=float(_require(spec, "c", f"{context}.market")),
                    b=float(_require(spec, "b", f"{context}.market")),
                    potential=_potential_from_dict(_require(spec, "potential", f"{context}.market")),
                ),
                a_path=AiPath(
                    a_pre=float(_require(path, "a_pre", f"{context}.a_path")),
                    a_post35=float(_require(path, "a_post35", f"{context}.a_path")),
                    a_post40=float(_require(path, "a_post40", f"{context}.a_path")),
                ),
                worker_fe_mean=float(entry.get("worker_fe_mean", 0.0)),
            )
        )
    boost = data.get("moderator_boost")
    kwargs = {}
    for name in (
        "workers_per_market", "shock1_index", "shock2_index", "seed",
    ):
        if name in data:
            kwargs[name] = int(data[name])
    for name in (
        "worker_fe_sigma", "month_fe_sigma", "noise_sigma", "jobs_scale",
        "background_rate", "weekly_scale", "us_share", "experienced_share",
    ):
        if name in data:
            kwargs[name] = float(data[name])
    if "months" in data:
        kwargs["months"] = tuple(str(m) for m in data["months"])
    return ScenarioConfig(
        markets=tuple(markets),
        control_market_id=str(_require(data, "control_market_id", "scenario")),
        moderator_boost=(
            ModeratorBoost(column=str(boost["column"]), multiplier=float(boost["multiplier"]))
            if boost
            else None
        ),
        **kwargs,
    )
