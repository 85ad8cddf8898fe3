"""Batch front door: scenario files, CSV ingestion, end-to-end runs, and
reproducibility manifests.

A run executes simulate -> match -> estimate -> tost -> report, writing
every artifact into one output directory. All file contents are pure
functions of (config, seed, package version); the manifest hash covers
the config hash, options, and output file hashes, so two identical runs
produce identical manifests (timings are recorded but excluded from the
hash).
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import OlmsimError, PipelineError, SchemaError, ValidationError
from .market import sweep_comparative_statics
from .matching import balance_table, derive_worker_covariates, logit_fit, propensity_match
from .panel import DEMAND_COLUMNS, PANEL_COLUMNS, DemandArrays, PanelArrays, PanelRow
from .regression import (
    RegressionSpec,
    demand_did_fit,
    did_fit,
    dual_shock_fit,
    event_study_fit,
    tost_pretrends,
)
from .report import (
    balance_csv_lines,
    balance_text_table,
    classify_quadrant,
    fit_csv_lines,
    fit_text_table,
    quadrant_csv_lines,
    statics_csv_lines,
    tost_as_dict,
)
from .synth import (
    ScenarioConfig,
    config_from_dict,
    config_to_dict,
    generate_demand_arrays,
    generate_panel_arrays,
)

DEFAULT_CALIPER = 0.02
DEFAULT_ALPHA = 0.05
DEFAULT_WEEKS = 95
STATICS_GRID = 101

#: the three outcome/transform pairs every estimation stage reports
OUTCOMES = (("fjobnum", "log1p"), ("fjobratio", "identity"), ("fjobearn", "log1p"))

STAGE_TOKENS = (
    "simulate",
    "match",
    "estimate",
    "estimate_did",
    "estimate_event",
    "estimate_dual",
    "estimate_demand",
    "tost",
    "report",
)


# ---------------------------------------------------------------------------
# scenario and CSV files


def parse_scenario(path: str | Path) -> ScenarioConfig:
    """Load and fully validate a scenario JSON file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path} must contain a JSON object")
    return config_from_dict(data)


def write_scenario(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")


def panel_csv_lines(arrays: PanelArrays) -> list[str]:
    # repr gives the shortest exact round-trip form for the float columns
    lines = [",".join(PANEL_COLUMNS)]
    for i in range(arrays.n_rows):
        lines.append(
            f"{arrays.worker_id[i]},{arrays.market_id[i]},{arrays.month_index[i]},"
            f"{arrays.treat[i]},{arrays.post35[i]},{arrays.post40[i]},"
            f"{arrays.fjobnum[i]},{float(arrays.fjobearn[i])!r},{float(arrays.fjobratio[i])!r},"
            f"{arrays.tenure[i]},{arrays.us[i]},{arrays.experienced[i]}"
        )
    return lines


def demand_csv_lines(arrays: DemandArrays) -> list[str]:
    lines = [",".join(DEMAND_COLUMNS)]
    for i in range(arrays.n_rows):
        lines.append(
            f"{arrays.market_id[i]},{arrays.week_index[i]},{arrays.postnum[i]},"
            f"{arrays.treat[i]},{arrays.post[i]}"
        )
    return lines


def _parse_int(value: str, line: int, name: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ValidationError(f"line {line}: {name} must be an integer, got {value!r}") from exc


def _parse_float(value: str, line: int, name: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ValidationError(f"line {line}: {name} must be numeric, got {value!r}") from exc


def ingest_panel_csv(path: str | Path) -> list[PanelRow]:
    """Read a panel CSV, enforcing the exact schema and every row invariant."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        if tuple(header) != PANEL_COLUMNS:
            raise SchemaError(
                f"{path} header mismatch: expected {','.join(PANEL_COLUMNS)}, got {','.join(header)}"
            )
        raw = {name: [] for name in PANEL_COLUMNS}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(PANEL_COLUMNS):
                raise SchemaError(f"{path} line {line_no}: expected {len(PANEL_COLUMNS)} fields, got {len(row)}")
            for name, value in zip(PANEL_COLUMNS, row):
                raw[name].append(value)
    n = len(raw["worker_id"])
    if n == 0:
        raise SchemaError(f"{path} has no data rows")

    def ints(name):
        return np.array([_parse_int(v, i + 2, name) for i, v in enumerate(raw[name])], dtype=np.int64)

    def floats(name):
        return np.array([_parse_float(v, i + 2, name) for i, v in enumerate(raw[name])], dtype=np.float64)

    arrays = PanelArrays(
        worker_id=ints("worker_id"),
        market_id=np.array(raw["market_id"], dtype=object),
        month_index=ints("month_index"),
        treat=ints("treat"),
        post35=ints("post35"),
        post40=ints("post40"),
        fjobnum=ints("fjobnum"),
        fjobearn=floats("fjobearn"),
        fjobratio=floats("fjobratio"),
        tenure=ints("tenure"),
        us=ints("us"),
        experienced=ints("experienced"),
    )
    arrays.validate(where="data row")
    return arrays.to_rows()


# ---------------------------------------------------------------------------
# run manifest


@dataclass
class RunManifest:
    """Reproducibility record of one pipeline run."""

    config_hash: str
    seed: int
    version: str
    stages: list[str]
    options: dict
    outputs: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def manifest_hash(self) -> str:
        payload = json.dumps(
            {
                "config_hash": self.config_hash,
                "seed": self.seed,
                "version": self.version,
                "stages": self.stages,
                "options": self.options,
                "outputs": dict(sorted(self.outputs.items())),
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "stages": self.stages,
            "options": self.options,
            "outputs": dict(sorted(self.outputs.items())),
            "timings": self.timings,
            "manifest_hash": self.manifest_hash,
        }


def config_hash(config: ScenarioConfig) -> str:
    payload = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# pipeline


def _normalize_stages(stages) -> list[str]:
    if stages is None:
        return ["simulate", "match", "estimate", "tost", "report"]
    out = []
    for token in stages:
        if token not in STAGE_TOKENS:
            raise ValidationError(f"unknown stage {token!r}; valid stages: {', '.join(STAGE_TOKENS)}")
        out.append(token)
    return out


def _outcome_spec(outcome: str, transform: str) -> RegressionSpec:
    return RegressionSpec(outcome=outcome, transform=transform, controls=("tenure",))


@dataclass
class _Workspace:
    """Lazily computed intermediate products shared between stages."""

    config: ScenarioConfig
    caliper: float
    panel: PanelArrays | None = None
    demand: DemandArrays | None = None
    matches: dict | None = None
    samples: dict | None = None

    def get_panel(self) -> PanelArrays:
        if self.panel is None:
            self.panel = generate_panel_arrays(self.config)
        return self.panel

    def get_demand(self) -> DemandArrays:
        if self.demand is None:
            self.demand = generate_demand_arrays(self.config, weeks=DEFAULT_WEEKS)
        return self.demand

    def get_matches(self) -> dict:
        """Per treated market: matching against the control-market pool."""
        if self.matches is None:
            panel = self.get_panel()
            control_id = self.config.control_market_id
            self.matches = {}
            for market_id in self.config.treated_ids():
                pair_mask = (panel.market_id == market_id) | (panel.market_id == control_id)
                pair = panel.subset(pair_mask)
                ids, covariates, names, treat = derive_worker_covariates(pair)
                model = logit_fit(covariates, treat, names=names)
                scores = model.predict_proba(covariates)
                result = propensity_match(scores, treat, self.caliper)
                balance = balance_table(covariates, treat, result, names=names)
                matched_workers = np.concatenate(
                    [ids[result.treated_ids], ids[result.control_ids]]
                )
                self.matches[market_id] = {
                    "result": result,
                    "balance": balance,
                    "worker_ids": matched_workers,
                }
        return self.matches

    def get_samples(self) -> dict:
        """Matched estimation panel per treated market."""
        if self.samples is None:
            panel = self.get_panel()
            self.samples = {}
            for market_id, match in self.get_matches().items():
                mask = np.isin(panel.worker_id, match["worker_ids"])
                self.samples[market_id] = panel.subset(mask)
        return self.samples


def run_pipeline(
    config: ScenarioConfig | str | Path,
    out_dir: str | Path,
    seed: int | None = None,
    stages=None,
    alpha: float = DEFAULT_ALPHA,
    caliper: float = DEFAULT_CALIPER,
    bounds: float | None = None,
) -> RunManifest:
    """Run the requested stages and write their artifacts plus a manifest.

    ``config`` may be a scenario path or an already-validated config; an
    explicit ``seed`` overrides the one in the file. Upstream products are
    computed as needed but only the requested stages write files.
    """
    if not isinstance(config, ScenarioConfig):
        config = parse_scenario(config)
    if seed is not None:
        config = config.with_seed(seed)
    requested = _normalize_stages(stages)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    manifest = RunManifest(
        config_hash=config_hash(config),
        seed=config.seed,
        version=__version__,
        stages=requested,
        options={"alpha": alpha, "caliper": caliper, "bounds": bounds, "weeks": DEFAULT_WEEKS},
    )
    ws = _Workspace(config=config, caliper=caliper)

    def emit(name: str, text: str) -> None:
        path = out / name
        path.write_text(text)
        manifest.outputs[name] = hashlib.sha256(text.encode()).hexdigest()

    def run_stage(token: str, fn) -> None:
        start = time.perf_counter()
        try:
            fn()
        except OlmsimError as exc:
            raise PipelineError(token, exc) from exc
        manifest.timings[token] = round(time.perf_counter() - start, 6)

    tables: list[str] = []
    event_fits: dict = {}
    dual_fits: dict = {}

    def stage_simulate():
        panel = ws.get_panel()
        emit("panel.csv", "\n".join(panel_csv_lines(panel)) + "\n")
        emit("demand.csv", "\n".join(demand_csv_lines(ws.get_demand())) + "\n")
        for scenario in config.markets:
            rows = sweep_comparative_statics(scenario.market, STATICS_GRID)
            emit(f"statics_{scenario.market_id}.csv", "\n".join(statics_csv_lines(rows)) + "\n")

    def stage_match():
        for market_id, match in ws.get_matches().items():
            result = match["result"]
            pair_lines = ["treated_id,control_id,distance"]
            for p in result.pairs:
                pair_lines.append(f"{p.treated_id},{p.control_id},{p.distance:.10g}")
            for d in result.dropped_treated:
                pair_lines.append(f"{d.unit_id},,{d.reason}")
            emit(f"match_{market_id}.csv", "\n".join(pair_lines) + "\n")
            emit(f"balance_{market_id}.csv", "\n".join(balance_csv_lines(match["balance"])) + "\n")
            tables.append(balance_text_table(match["balance"], f"balance: {market_id} vs control"))

    def make_estimator(kind: str):
        def stage_estimate():
            for market_id, sample in ws.get_samples().items():
                for outcome, transform in OUTCOMES:
                    spec = _outcome_spec(outcome, transform)
                    label = f"{market_id}_{outcome}"
                    if kind in ("did", "all"):
                        fit = did_fit(sample, spec)
                        emit(f"fit_did_{label}.csv", "\n".join(fit_csv_lines(fit)) + "\n")
                        tables.append(fit_text_table(fit, f"did: {label} ({transform})"))
                    if kind in ("event", "all"):
                        fit = event_study_fit(sample, spec)
                        event_fits[(market_id, outcome)] = fit
                        emit(f"fit_event_{label}.csv", "\n".join(fit_csv_lines(fit)) + "\n")
                        tables.append(fit_text_table(fit, f"event study: {label} ({transform})"))
                    if kind in ("dual", "all"):
                        fit = dual_shock_fit(sample, spec)
                        dual_fits[(market_id, outcome)] = fit
                        emit(f"fit_dual_{label}.csv", "\n".join(fit_csv_lines(fit)) + "\n")
                        tables.append(fit_text_table(fit, f"dual shock: {label} ({transform})"))
            if kind in ("demand", "all"):
                demand = ws.get_demand()
                control_id = config.control_market_id
                for market_id in config.treated_ids():
                    mask = (demand.market_id == market_id) | (demand.market_id == control_id)
                    fit = demand_did_fit(demand.subset(mask))
                    emit(f"fit_demand_{market_id}.csv", "\n".join(fit_csv_lines(fit)) + "\n")
                    tables.append(fit_text_table(fit, f"demand: {market_id} vs control"))

        return stage_estimate

    def ensure_event_fits():
        if not event_fits:
            for market_id, sample in ws.get_samples().items():
                for outcome, transform in OUTCOMES:
                    event_fits[(market_id, outcome)] = event_study_fit(sample, _outcome_spec(outcome, transform))

    def ensure_dual_fits():
        if not dual_fits:
            for market_id, sample in ws.get_samples().items():
                for outcome, transform in OUTCOMES:
                    dual_fits[(market_id, outcome)] = dual_shock_fit(sample, _outcome_spec(outcome, transform))

    def stage_tost():
        ensure_event_fits()
        for (market_id, outcome), fit in sorted(event_fits.items()):
            result = tost_pretrends(fit, bounds=bounds, alpha=alpha)
            emit(
                f"tost_{market_id}_{outcome}.json",
                json.dumps(tost_as_dict(result), indent=2, sort_keys=True) + "\n",
            )

    def stage_report():
        ensure_dual_fits()
        rows = []
        for (market_id, outcome), fit in sorted(dual_fits.items()):
            b1 = fit.coefficients["treat_x_post35"]
            p1 = fit.pvalues["treat_x_post35"]
            b2 = fit.coefficients["treat_x_post40"]
            p2 = fit.pvalues["treat_x_post40"]
            rows.append((market_id, outcome, b1, p1, b2, p2, classify_quadrant(b1, p1, b2, p2, alpha)))
        emit("quadrant.csv", "\n".join(quadrant_csv_lines(rows)) + "\n")
        if tables:
            emit("tables.txt", "\n\n".join(tables) + "\n")

    stage_fns = {
        "simulate": stage_simulate,
        "match": stage_match,
        "estimate": make_estimator("all"),
        "estimate_did": make_estimator("did"),
        "estimate_event": make_estimator("event"),
        "estimate_dual": make_estimator("dual"),
        "estimate_demand": make_estimator("demand"),
        "tost": stage_tost,
        "report": stage_report,
    }
    for token in STAGE_TOKENS:
        if token in requested:
            run_stage(token, stage_fns[token])

    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# selftest


def selftest(verbose: bool = True) -> bool:
    """Fast internal consistency checks; returns True when all pass."""
    from .market import MarketPotentialSpec, MarketSpec, PotentialFamily, cournot_equilibrium, eval_potential, inflection_point
    from .regression import absorb_two_way, coef_to_percent

    checks: list[tuple[str, bool]] = []

    def log(name: str, ok: bool):
        checks.append((name, ok))
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")

    ok = abs(coef_to_percent(-0.094) + 0.0897) < 1e-4 and abs(coef_to_percent(0.062) - 0.0640) < 1e-4
    log("log-coefficient percent identities", ok)

    rng = np.random.default_rng(0)
    ok = True
    for _ in range(20):
        c = rng.uniform(0.5, 3.0)
        kappa = 0.5 * c * rng.uniform(1.4, 3.0)
        s0 = max(kappa, c) + rng.uniform(0.3, 2.5)
        market = MarketSpec(
            n=int(rng.integers(1, 9)), c=c, b=rng.uniform(0.2, 2.0),
            potential=MarketPotentialSpec(PotentialFamily.QUADRATIC, S0=s0, kappa=kappa),
        )
        a = rng.uniform(0, 1)
        eq = cournot_equilibrium(market, a)
        s = eval_potential(market.potential, a)
        mc = market.marginal_cost(a)
        q = np.full(market.n, max(s, 1.0) * 0.1)
        omega = 2.0 / (market.n + 1)
        for _ in range(400):
            br = np.maximum(0.0, (s - mc - market.b * (q.sum() - q)) / (2 * market.b))
            q = (1 - omega) * q + omega * br
        ok = ok and np.allclose(q, eq.q, atol=1e-9)
        ok = ok and abs(inflection_point(market) - c / (2 * kappa)) < 1e-8
    log("cournot closed form vs best-response iteration; analytic inflection", ok)

    ok = True
    for _ in range(3):
        unit = np.repeat(np.arange(5), 4)
        tme = np.tile(np.arange(4), 5)
        x = rng.standard_normal((20, 2))
        absorbed = absorb_two_way(x, unit, tme).values
        d = np.column_stack(
            [np.ones(20)]
            + [(unit == i).astype(float) for i in range(1, 5)]
            + [(tme == j).astype(float) for j in range(1, 4)]
        )
        beta, *_ = np.linalg.lstsq(d, x, rcond=None)
        ok = ok and np.allclose(absorbed, x - d @ beta, atol=1e-8)
    log("two-way absorption vs explicit dummies", ok)

    from .scenarios import demo_config

    cfg = demo_config().with_seed(3)
    small = cfg.__class__(**{**cfg.__dict__, "workers_per_market": 8})
    a = generate_panel_arrays(small)
    b = generate_panel_arrays(small)
    ok = all(np.array_equal(a.column(n), b.column(n)) for n in ("fjobnum", "tenure")) and np.allclose(
        a.fjobearn, b.fjobearn
    )
    log("panel generation deterministic", ok)

    return all(flag for _, flag in checks)
