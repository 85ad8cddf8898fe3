"""Panel regression engine: two-way fixed effects, cluster-robust inference,
event studies, dual-shock designs, demand regressions, moderation, and
pre-trend equivalence testing.

The estimation path is the same everywhere: transform the outcome, build
the interest and control columns, absorb the fixed effects by alternating
demeaning, solve the least-squares problem on the absorbed matrix, and
compute a clustered sandwich covariance. Every fit is a pure function of
its inputs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import (
    ConvergenceError,
    RankDeficiencyError,
    SingleClusterError,
    ValidationError,
)
from .panel import DemandArrays, PanelArrays, as_demand_arrays, as_panel_arrays

ABSORB_TOL = 1e-10
ABSORB_MAX_ITER = 10_000

#: default equivalence bound for pre-trend TOST, as a multiple of the
#: outcome standard deviation
TOST_SD_MULTIPLE = 0.36

TRANSFORMS = ("log1p", "identity", "log")

_REL_TERM = re.compile(r"^treat_rel\[(-?\d+)\]$")


# ---------------------------------------------------------------------------
# kernel operations


@dataclass
class AbsorbResult:
    values: np.ndarray
    iterations: int


def absorb_two_way(
    matrix: np.ndarray,
    unit_codes: np.ndarray | None = None,
    time_codes: np.ndarray | None = None,
    tol: float = ABSORB_TOL,
    max_iter: int = ABSORB_MAX_ITER,
) -> AbsorbResult:
    """Residualize the columns of ``matrix`` on unit and/or time effects.

    Alternates group demeaning over the two dimensions until the largest
    cell change falls below ``tol``. Balanced panels converge after one
    pass of each dimension.
    """
    m = np.array(matrix, dtype=np.float64, copy=True)
    if m.ndim == 1:
        m = m[:, None]
    dims = []
    for codes in (unit_codes, time_codes):
        if codes is not None:
            codes = np.asarray(codes)
            if codes.shape != (m.shape[0],):
                raise ValidationError(f"fixed-effect codes have shape {codes.shape}, expected ({m.shape[0]},)")
            compact = np.unique(codes, return_inverse=True)[1]
            dims.append((compact, np.bincount(compact).astype(np.float64)))
    if not dims:
        return AbsorbResult(m, 0)

    def demean_pass(arr: np.ndarray) -> None:
        for codes, counts in dims:
            for k in range(arr.shape[1]):
                means = np.bincount(codes, weights=arr[:, k]) / counts
                arr[:, k] -= means[codes]

    if len(dims) == 1:
        demean_pass(m)
        return AbsorbResult(m, 1)

    for it in range(1, max_iter + 1):
        prev = m.copy()
        demean_pass(m)
        if np.max(np.abs(m - prev)) < tol:
            return AbsorbResult(m, it)
    raise ConvergenceError(
        f"two-way absorption did not converge within {max_iter} iterations", iterations=max_iter
    )


@dataclass
class OlsResult:
    coefficients: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray


def ols_fit(X: np.ndarray, y: np.ndarray, names: list[str] | None = None) -> OlsResult:
    """Least squares via pivoted QR, with rank-deficiency detection.

    Raises :class:`RankDeficiencyError` naming the first column that the
    pivoting identifies as linearly dependent on the preceding ones.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if names is not None and len(names) != k:
        raise ValidationError(f"got {len(names)} names for {k} columns")
    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    scale = diag.max() if diag.size else 0.0
    rank_tol = max(n, k) * np.finfo(np.float64).eps * scale
    rank = int(np.sum(diag > rank_tol))
    if rank < k:
        col = int(piv[rank])
        label = names[col] if names is not None else f"column {col}"
        raise RankDeficiencyError(
            f"design matrix is rank deficient: {label} is collinear after absorption", column=label
        )
    beta_piv = scipy.linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_piv
    fitted = X @ beta
    return OlsResult(coefficients=beta, residuals=y - fitted, fitted=fitted)


def cluster_vcov(X: np.ndarray, residuals: np.ndarray, cluster_ids: np.ndarray) -> np.ndarray:
    """Cluster-robust sandwich covariance with the CR1 small-sample factor
    ``G/(G-1) * (N-1)/(N-K)``.

    ``K`` counts only the columns of ``X``; absorbed fixed effects are not
    charged against the degrees of freedom.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    e = np.asarray(residuals, dtype=np.float64)
    n, k = X.shape
    codes = np.unique(np.asarray(cluster_ids), return_inverse=True)[1]
    g = int(codes.max()) + 1
    if g < 2:
        raise SingleClusterError("cluster-robust covariance needs at least 2 clusters")
    bread = np.linalg.inv(X.T @ X)
    xe = X * e[:, None]
    scores = np.empty((g, k))
    for j in range(k):
        scores[:, j] = np.bincount(codes, weights=xe[:, j], minlength=g)
    meat = scores.T @ scores
    factor = (g / (g - 1.0)) * ((n - 1.0) / (n - k))
    v = factor * bread @ meat @ bread
    return 0.5 * (v + v.T)


def coef_to_percent(beta: float) -> float:
    """Percent change implied by a log-outcome coefficient: ``e**beta - 1``."""
    if not math.isfinite(beta):
        raise ValidationError(f"coefficient must be finite, got {beta}")
    return math.expm1(beta)


# ---------------------------------------------------------------------------
# fit specifications and results


@dataclass(frozen=True)
class RegressionSpec:
    """Shared settings for the panel fits.

    ``transform`` is applied to the outcome column: ``log1p`` (default,
    keeps zero-count months), ``identity``, or ``log`` which drops rows
    with a nonpositive outcome.
    """

    outcome: str = "fjobnum"
    transform: str = "log1p"
    controls: tuple[str, ...] = ("tenure",)
    fe: tuple[str, ...] = ("worker", "month")
    cluster: str = "worker"
    market_trend: bool = False
    baseline_period: int = -1

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValidationError(f"transform must be one of {TRANSFORMS}, got {self.transform!r}")
        if self.cluster not in ("worker", "market", "row"):
            raise ValidationError(f"cluster must be worker, market, or row, got {self.cluster!r}")
        for dim in self.fe:
            if dim not in ("worker", "month"):
                raise ValidationError(f"fe dimensions must be worker/month, got {dim!r}")


@dataclass
class FitResult:
    """Coefficients and cluster-robust inference for one regression."""

    coefficients: dict[str, float]
    se: dict[str, float]
    pvalues: dict[str, float]
    n_obs: int
    n_clusters: int
    within_r2: float
    converged_fe_iterations: int
    outcome_sd: float
    vcov: np.ndarray = field(repr=False, default=None)
    terms: tuple[str, ...] = ()

    def tstat(self, term: str) -> float:
        s = self.se[term]
        if s == 0.0:
            return math.inf if self.coefficients[term] != 0 else 0.0
        return self.coefficients[term] / s


@dataclass(frozen=True)
class TostPeriod:
    sigma: int
    estimate: float
    se: float
    passed: bool


@dataclass
class TostResult:
    """Equivalence test over the pre-shock event-study coefficients."""

    periods: list[TostPeriod]
    overall_pass: bool
    delta: float
    alpha: float


def _transform_outcome(values: np.ndarray, transform: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (transformed outcome, keep mask)."""
    values = np.asarray(values, dtype=np.float64)
    if transform == "log1p":
        return np.log1p(values), np.ones(len(values), dtype=bool)
    if transform == "identity":
        return values, np.ones(len(values), dtype=bool)
    keep = values > 0
    out = np.zeros(len(values))
    out[keep] = np.log(values[keep])
    return out, keep


def _pvalue(beta: float, se: float, df: int) -> float:
    if se == 0.0:
        return 0.0 if beta != 0.0 else 1.0
    t = abs(beta / se)
    return float(2.0 * stats.t.sf(t, df))


def _cluster_codes(panel: PanelArrays, which: str) -> np.ndarray:
    if which == "worker":
        return panel.worker_id
    if which == "market":
        return panel.market_id
    return np.arange(panel.n_rows)


def _run_fit(
    y: np.ndarray,
    columns: dict[str, np.ndarray],
    unit_codes: np.ndarray | None,
    time_codes: np.ndarray | None,
    cluster_ids: np.ndarray,
) -> FitResult:
    names = list(columns)
    m = np.column_stack([y] + [np.asarray(columns[c], dtype=np.float64) for c in names])
    absorbed = absorb_two_way(m, unit_codes, time_codes)
    ya = absorbed.values[:, 0]
    xa = absorbed.values[:, 1:]
    ols = ols_fit(xa, ya, names=names)
    vcov = cluster_vcov(xa, ols.residuals, cluster_ids)
    g = len(np.unique(cluster_ids))
    se = np.sqrt(np.diag(vcov))
    coefficients = {name: float(b) for name, b in zip(names, ols.coefficients)}
    ses = {name: float(s) for name, s in zip(names, se)}
    pvalues = {name: _pvalue(coefficients[name], ses[name], g - 1) for name in names}
    ss_tot = float(ya @ ya)
    ss_res = float(ols.residuals @ ols.residuals)
    within_r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return FitResult(
        coefficients=coefficients,
        se=ses,
        pvalues=pvalues,
        n_obs=len(y),
        n_clusters=g,
        within_r2=within_r2,
        converged_fe_iterations=absorbed.iterations,
        outcome_sd=float(np.std(y, ddof=1)) if len(y) > 1 else 0.0,
        vcov=vcov,
        terms=tuple(names),
    )


def _prepare(panel, spec: RegressionSpec):
    arrays = as_panel_arrays(panel)
    y, keep = _transform_outcome(arrays.column(spec.outcome), spec.transform)
    if not keep.all():
        arrays = arrays.subset(keep)
        y = y[keep]
    unit = arrays.worker_id if "worker" in spec.fe else None
    time = arrays.month_index if "month" in spec.fe else None
    cluster = _cluster_codes(arrays, spec.cluster)
    return arrays, y, unit, time, cluster


def _control_columns(arrays: PanelArrays, spec: RegressionSpec) -> dict[str, np.ndarray]:
    cols: dict[str, np.ndarray] = {}
    if spec.market_trend:
        cols["treat_x_trend"] = arrays.treat * arrays.month_index
    for name in spec.controls:
        cols[name] = arrays.column(name).astype(np.float64)
    return cols


def did_fit(panel, spec: RegressionSpec | None = None) -> FitResult:
    """Two-way fixed-effects difference-in-differences.

    The interest term ``treat_x_post35`` is the interaction of the treated
    flag with the first-shock post indicator; with ``market_trend`` set, a
    treated-group linear time trend is added.
    """
    spec = spec or RegressionSpec()
    arrays, y, unit, time, cluster = _prepare(panel, spec)
    cols = {"treat_x_post35": arrays.treat * arrays.post35}
    cols.update(_control_columns(arrays, spec))
    return _run_fit(y, cols, unit, time, cluster)


def dual_shock_fit(panel, spec: RegressionSpec | None = None) -> FitResult:
    """DiD with both shock indicators.

    ``treat_x_post35`` carries the first-shock effect; because the second
    indicator is nested in the first, ``treat_x_post40`` is the incremental
    effect after the second release.
    """
    spec = spec or RegressionSpec()
    arrays, y, unit, time, cluster = _prepare(panel, spec)
    if np.any(arrays.post40 > arrays.post35):
        raise ValidationError("post40 must be nested in post35")
    cols = {
        "treat_x_post35": arrays.treat * arrays.post35,
        "treat_x_post40": arrays.treat * arrays.post40,
    }
    cols.update(_control_columns(arrays, spec))
    return _run_fit(y, cols, unit, time, cluster)


def _relative_time(arrays: PanelArrays) -> np.ndarray:
    post_months = arrays.month_index[arrays.post35 == 1]
    if post_months.size == 0:
        raise ValidationError("panel has no post-shock months (post35 never 1)")
    shock = int(post_months.min())
    return arrays.month_index - shock


def event_study_fit(panel, spec: RegressionSpec | None = None) -> FitResult:
    """Relative-time (lead/lag) model around the first shock.

    One ``treat_rel[s]`` coefficient per relative month ``s``, omitting
    the baseline period (default ``-1``, the last pre-shock month).
    """
    spec = spec or RegressionSpec()
    arrays, y, unit, time, cluster = _prepare(panel, spec)
    rel = _relative_time(arrays)
    present = np.unique(rel)
    expected = np.arange(present.min(), present.max() + 1)
    missing = sorted(set(expected.tolist()) - set(present.tolist()))
    if missing:
        raise ValidationError(f"relative periods missing from panel: {missing}")
    if spec.baseline_period not in present:
        raise ValidationError(f"baseline period {spec.baseline_period} not present in panel")
    cols: dict[str, np.ndarray] = {}
    for sigma in present:
        if sigma == spec.baseline_period:
            continue
        cols[f"treat_rel[{int(sigma)}]"] = arrays.treat * (rel == sigma).astype(np.float64)
    cols.update(_control_columns(arrays, spec))
    return _run_fit(y, cols, unit, time, cluster)


def heterogeneity_fit(panel, spec: RegressionSpec | None = None, moderator: str = "us") -> FitResult:
    """DiD with a binary worker-level moderator interacted with the shock.

    Reports the moderated treatment effect and the moderator-by-post term;
    the moderator's main effect is absorbed by the worker fixed effect.
    """
    spec = spec or RegressionSpec()
    arrays, y, unit, time, cluster = _prepare(panel, spec)
    mod = arrays.column(moderator)
    if np.any((mod != 0) & (mod != 1)):
        raise ValidationError(f"moderator {moderator!r} must be binary")
    order = np.argsort(arrays.worker_id, kind="stable")
    wid, first = np.unique(arrays.worker_id[order], return_index=True)
    per_worker = mod[order]
    starts = np.r_[first, len(per_worker)]
    for i in range(len(wid)):
        chunk = per_worker[starts[i]:starts[i + 1]]
        if chunk.min() != chunk.max():
            raise ValidationError(f"moderator {moderator!r} varies within worker {wid[i]}")
    gpt = arrays.treat * arrays.post35
    cols = {
        f"{moderator}_x_treat_x_post35": mod * gpt,
        "treat_x_post35": gpt,
        f"{moderator}_x_post35": mod * arrays.post35,
    }
    cols.update(_control_columns(arrays, spec))
    return _run_fit(y, cols, unit, time, cluster)


def demand_did_fit(series, cluster: str = "row", market_trend: bool = False) -> FitResult:
    """Market-week DiD on log1p fulfilled postings with market and week effects.

    ``cluster`` picks the inference level: ``row`` (independent cells,
    matching the generating process here), ``market``, or ``week``.
    """
    arrays: DemandArrays = as_demand_arrays(series)
    if len(np.unique(arrays.market_id)) < 2:
        raise ValidationError("demand DiD needs at least 2 markets")
    if arrays.post.min() == arrays.post.max():
        raise ValidationError("demand window must span the shock (post must vary)")
    y = np.log1p(arrays.postnum.astype(np.float64))
    market_codes = np.unique(arrays.market_id, return_inverse=True)[1]
    cols = {"treat_x_post": arrays.treat * arrays.post}
    if market_trend:
        cols["treat_x_trend"] = arrays.treat * arrays.week_index
    if cluster == "row":
        cluster_ids = np.arange(arrays.n_rows)
    elif cluster == "market":
        cluster_ids = market_codes
    elif cluster == "week":
        cluster_ids = arrays.week_index
    else:
        raise ValidationError(f"cluster must be row, market, or week, got {cluster!r}")
    return _run_fit(y, cols, market_codes, arrays.week_index, cluster_ids)


# ---------------------------------------------------------------------------
# pre-trend equivalence


def pre_period_terms(fit: FitResult) -> list[tuple[int, str]]:
    """(sigma, term) pairs for the pre-shock event-study coefficients."""
    out = []
    for term in fit.terms:
        match = _REL_TERM.match(term)
        if match and int(match.group(1)) < 0:
            out.append((int(match.group(1)), term))
    return sorted(out)


def tost_pretrends(fit: FitResult, bounds: float | None = None, alpha: float = 0.05) -> TostResult:
    """Two one-sided tests of equivalence on every pre-shock coefficient.

    Each period passes when ``(b + delta)/se`` exceeds the upper critical
    value and ``(b - delta)/se`` falls below the lower one, i.e. the
    coefficient is bounded inside ``(-delta, +delta)`` at level ``alpha``.
    The default ``delta`` is 0.36 times the outcome standard deviation.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    delta = TOST_SD_MULTIPLE * fit.outcome_sd if bounds is None else float(bounds)
    if delta <= 0:
        raise ValidationError(f"equivalence bound must be positive, got {delta}")
    pre = pre_period_terms(fit)
    if not pre:
        raise ValidationError("fit has no pre-shock relative-time coefficients")
    df = fit.n_clusters - 1
    t_crit = float(stats.t.ppf(1.0 - alpha, df))
    periods = []
    for sigma, term in pre:
        b = fit.coefficients[term]
        s = fit.se[term]
        if s == 0.0:
            ok = abs(b) < delta
        else:
            ok = (b + delta) / s > t_crit and (b - delta) / s < -t_crit
        periods.append(TostPeriod(sigma=sigma, estimate=b, se=s, passed=bool(ok)))
    return TostResult(
        periods=periods,
        overall_pass=all(p.passed for p in periods),
        delta=delta,
        alpha=alpha,
    )
