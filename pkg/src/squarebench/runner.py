"""Experiment configs, the run loop, and result persistence.

An experiment config is one JSON file describing a dataset, a strategy grid,
a backend, and decoding parameters. Running it evaluates every strategy over
the same deterministic sample: each record's prompt is assembled, completed
through the response cache, extracted, and scored; per-record artifacts and a
summary are written per strategy, plus one run-level report table.

Relative paths inside a config file are resolved against the config's own
directory, so preset configs can be copied around together with their data.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .backend import (
    BackendSpec,
    CacheStore,
    DecodingParams,
    cache_key,
    cached_complete,
    make_backend,
)
from .dataset import (
    GoldKind,
    QueryRecord,
    load_dataset,
    sample_records,
    take_top_k_contexts,
)
from .errors import BackendError, ConfigError, RunFailedError
from .extraction import extract_answer
from .metrics import (
    MetricName,
    MetricReport,
    ScoredRecord,
    aggregate,
    metric_for_gold_kind,
    score_prediction,
)
from .prompts import StrategyConfig, assemble_prompt
from .reporting import ResultSummary, render_run_summary

logger = logging.getLogger(__name__)

_CONFIG_FIELDS = {
    "dataset_path",
    "dataset_name",
    "gold_kind",
    "metric",
    "sample_n",
    "sample_seed",
    "k_contexts",
    "strategies",
    "backend",
    "decoding",
    "cache_dir",
    "output_dir",
    "template_dir",
}
_STRATEGY_FIELDS = {"kind", "n_questions", "aggregation", "fewshot_k"}
_BACKEND_FIELDS = {
    "kind",
    "model_name",
    "base_url",
    "script_dir",
    "fallback_reply",
    "max_in_flight",
}
_DECODING_FIELDS = {"mode", "temperature", "max_output_tokens"}


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment grid."""

    dataset_path: str
    gold_kind: GoldKind
    sample_n: int
    sample_seed: int
    strategies: tuple[StrategyConfig, ...]
    backend: BackendSpec
    cache_dir: str
    output_dir: str
    dataset_name: str = ""
    metric: MetricName | None = None
    k_contexts: int = 5
    decoding: DecodingParams = DecodingParams()
    template_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "gold_kind", GoldKind(self.gold_kind))
        if not self.dataset_name:
            object.__setattr__(self, "dataset_name", Path(self.dataset_path).stem)
        expected_metric = metric_for_gold_kind(self.gold_kind)
        if self.metric is None:
            object.__setattr__(self, "metric", expected_metric)
        else:
            object.__setattr__(self, "metric", MetricName(self.metric))
            if self.metric is not expected_metric:
                raise ConfigError(
                    f"metric {self.metric.value} does not fit gold kind "
                    f"{self.gold_kind.value} (expected {expected_metric.value})"
                )
        if self.sample_n < 1:
            raise ConfigError("sample_n must be >= 1")
        if self.k_contexts < 1:
            raise ConfigError("k_contexts must be >= 1")
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if not self.strategies:
            raise ConfigError("config needs at least one strategy")
        names = [s.name for s in self.strategies]
        if len(names) != len(set(names)):
            raise ConfigError(f"duplicate strategy configurations: {names}")


def _require(raw: dict, key: str, path):
    if key not in raw:
        raise ConfigError(f"{path}: missing required field {key!r}")
    return raw[key]


def _check_fields(raw: dict, allowed: set, where: str) -> None:
    unknown = sorted(raw.keys() - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown fields {unknown}")


def _resolve(base: Path, value):
    if value is None:
        return None
    return str((base / value).resolve()) if not Path(value).is_absolute() else str(value)


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    _check_fields(raw, _CONFIG_FIELDS, str(path))
    base = path.parent

    strategies = []
    raw_strategies = _require(raw, "strategies", path)
    if not isinstance(raw_strategies, list):
        raise ConfigError(f"{path}: 'strategies' must be an array")
    for i, entry in enumerate(raw_strategies):
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: strategy {i} must be an object")
        _check_fields(entry, _STRATEGY_FIELDS, f"{path} strategy {i}")
        try:
            strategies.append(StrategyConfig(**entry))
        except ValueError as exc:
            raise ConfigError(f"{path} strategy {i}: {exc}") from None

    raw_backend = _require(raw, "backend", path)
    _check_fields(raw_backend, _BACKEND_FIELDS, f"{path} backend")
    if "script_dir" in raw_backend:
        raw_backend = dict(raw_backend, script_dir=_resolve(base, raw_backend["script_dir"]))
    backend = BackendSpec(**raw_backend)

    raw_decoding = raw.get("decoding", {})
    _check_fields(raw_decoding, _DECODING_FIELDS, f"{path} decoding")
    try:
        decoding = DecodingParams(**raw_decoding)
    except ValueError as exc:
        raise ConfigError(f"{path} decoding: {exc}") from None

    try:
        gold_kind = GoldKind(_require(raw, "gold_kind", path))
    except ValueError:
        raise ConfigError(f"{path}: unknown gold_kind {raw.get('gold_kind')!r}") from None
    metric = raw.get("metric")
    if metric is not None:
        try:
            metric = MetricName(metric)
        except ValueError:
            raise ConfigError(f"{path}: unknown metric {raw.get('metric')!r}") from None

    return ExperimentConfig(
        dataset_path=_resolve(base, _require(raw, "dataset_path", path)),
        dataset_name=raw.get("dataset_name", ""),
        gold_kind=gold_kind,
        metric=metric,
        sample_n=_require(raw, "sample_n", path),
        sample_seed=_require(raw, "sample_seed", path),
        k_contexts=raw.get("k_contexts", 5),
        strategies=tuple(strategies),
        backend=backend,
        decoding=decoding,
        cache_dir=_resolve(base, _require(raw, "cache_dir", path)),
        output_dir=_resolve(base, _require(raw, "output_dir", path)),
        template_dir=_resolve(base, raw.get("template_dir")),
    )


def _strategy_dict(strategy: StrategyConfig) -> dict:
    return {
        "kind": strategy.kind.value,
        "n_questions": strategy.n_questions,
        "aggregation": strategy.aggregation.value,
        "fewshot_k": strategy.fewshot_k,
    }


def config_fingerprint(config: ExperimentConfig, strategy: StrategyConfig) -> str:
    """Digest of the result-determining config fields.

    File locations (dataset path, cache dir, script dir) are left out so the
    fingerprint is stable across checkouts; dataset identity is carried by
    dataset_name.
    """
    payload = {
        "dataset_name": config.dataset_name,
        "gold_kind": config.gold_kind.value,
        "metric": config.metric.value,
        "sample_n": config.sample_n,
        "sample_seed": config.sample_seed,
        "k_contexts": config.k_contexts,
        "strategy": _strategy_dict(strategy),
        "backend": {
            "kind": config.backend.kind,
            "model_name": config.backend.model_name,
            "fallback_reply": config.backend.fallback_reply,
        },
        "decoding": {
            "mode": config.decoding.mode.value,
            "temperature": config.decoding.temperature,
            "max_output_tokens": config.decoding.max_output_tokens,
        },
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExperimentResult:
    """Everything run_experiment produces for one strategy."""

    config_fingerprint: str
    dataset_name: str
    model_name: str
    metric_name: MetricName
    strategy: StrategyConfig
    per_record: tuple[ScoredRecord, ...]
    report: MetricReport
    failures: tuple[tuple[str, str], ...]
    audit_rows: tuple[dict, ...]
    started_at: str
    finished_at: str

    def summary(self) -> ResultSummary:
        return ResultSummary(
            dataset_name=self.dataset_name,
            model_name=self.model_name,
            metric_name=self.metric_name,
            strategy=self.strategy,
            aggregate_percent=self.report.aggregate_percent,
            capture_rate=self.report.capture_rate,
            n_records=self.report.n_records,
        )


def _effective_sample(config: ExperimentConfig, records) -> list[QueryRecord]:
    n = config.sample_n
    if n > len(records):
        logger.warning(
            "sample_n=%d exceeds dataset size %d; using every record", n, len(records)
        )
        n = len(records)
    return sample_records(records, n, config.sample_seed)


def run_experiment(
    config: ExperimentConfig,
    strategy: StrategyConfig,
    backend=None,
    cache: CacheStore | None = None,
    records=None,
    allow_partial: bool = False,
    write_outputs: bool = True,
) -> ExperimentResult:
    """Evaluate one strategy over the configured sample.

    A record whose backend call fails past the retry budget aborts the run
    unless allow_partial is set, in which case it is reported in
    ``failures`` and everything else is still scored.
    """
    backend = backend if backend is not None else make_backend(config.backend)
    cache = cache if cache is not None else CacheStore(config.cache_dir)
    if records is None:
        records = load_dataset(config.dataset_path, config.gold_kind)
    sample = [take_top_k_contexts(r, config.k_contexts) for r in _effective_sample(config, records)]

    def process(record: QueryRecord) -> dict:
        prompt = assemble_prompt(strategy, record, config.template_dir)
        digest = cache_key(backend.model_name, config.decoding, prompt).digest
        try:
            generation, hit = cached_complete(prompt, config.decoding, backend, cache)
        except BackendError as exc:
            return {"record_id": record.id, "prompt_digest": digest, "error": str(exc)}
        extraction = extract_answer(generation.text)
        return {
            "record_id": record.id,
            "prompt_digest": digest,
            "cache_hit": hit,
            "captured": extraction.captured,
            "extracted_answer": extraction.answer,
            "score": score_prediction(extraction.answer, record.gold),
            "raw_score": score_prediction(generation.text, record.gold),
            "generation_text": generation.text,
            "error": None,
        }

    started_at = datetime.now(timezone.utc).isoformat()
    with ThreadPoolExecutor(max_workers=config.backend.max_in_flight) as pool:
        rows = list(pool.map(process, sample))
    finished_at = datetime.now(timezone.utc).isoformat()

    failures = tuple((r["record_id"], r["error"]) for r in rows if r["error"] is not None)
    if failures and not allow_partial:
        record_id, error = failures[0]
        raise RunFailedError(
            f"{len(failures)} of {len(sample)} records failed "
            f"(first: {record_id}: {error}); rerun with allow_partial to keep going"
        )
    scored = tuple(
        ScoredRecord(
            record_id=r["record_id"],
            score=r["score"],
            captured=r["captured"],
            extracted_answer=r["extracted_answer"],
        )
        for r in rows
        if r["error"] is None
    )
    if not scored:
        raise RunFailedError("every record failed; nothing to aggregate")
    report = aggregate(scored, config.metric)
    result = ExperimentResult(
        config_fingerprint=config_fingerprint(config, strategy),
        dataset_name=config.dataset_name,
        model_name=config.backend.model_name,
        metric_name=config.metric,
        strategy=strategy,
        per_record=scored,
        report=report,
        failures=failures,
        audit_rows=tuple(rows),
        started_at=started_at,
        finished_at=finished_at,
    )
    if write_outputs:
        write_result(result, config.output_dir)
    return result


def write_result(result: ExperimentResult, output_dir) -> None:
    """Persist per-record audit rows, the result summary, and run metadata."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.strategy.name
    with (out / f"records_{name}.jsonl").open("w", encoding="utf-8") as fh:
        for row in result.audit_rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    summary = {
        "config_fingerprint": result.config_fingerprint,
        "dataset_name": result.dataset_name,
        "model_name": result.model_name,
        "metric": result.metric_name.value,
        "strategy": _strategy_dict(result.strategy),
        "aggregate_percent": result.report.aggregate_percent,
        "capture_rate": result.report.capture_rate,
        "n_records": result.report.n_records,
        "n_failures": len(result.failures),
    }
    (out / f"result_{name}.json").write_text(
        json.dumps(summary, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    hits = sum(1 for r in result.audit_rows if r.get("cache_hit"))
    raw_scores = [r["raw_score"] for r in result.audit_rows if r["error"] is None]
    meta = {
        "config_fingerprint": result.config_fingerprint,
        "started_at": result.started_at,
        "finished_at": result.finished_at,
        "model_name": result.model_name,
        "cache_hits": hits,
        "cache_misses": len(result.audit_rows) - hits - len(result.failures),
        "n_failures": len(result.failures),
        "raw_aggregate_percent": 100.0 * sum(raw_scores) / len(raw_scores),
    }
    (out / f"run_meta_{name}.json").write_text(
        json.dumps(meta, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_result_summary(path) -> ResultSummary:
    """Read back a result_*.json summary for reporting or checks."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        return ResultSummary(
            dataset_name=raw["dataset_name"],
            model_name=raw["model_name"],
            metric_name=MetricName(raw["metric"]),
            strategy=StrategyConfig(**raw["strategy"]),
            aggregate_percent=float(raw["aggregate_percent"]),
            capture_rate=float(raw["capture_rate"]),
            n_records=int(raw["n_records"]),
        )
    except OSError as exc:
        raise ConfigError(f"cannot read result {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path} is not a result summary: {exc}") from None


def select_strategies(config: ExperimentConfig, selector: str | None):
    """Match a --strategy selector against names, then kinds."""
    if selector is None:
        return config.strategies
    matches = tuple(s for s in config.strategies if s.name == selector)
    if not matches:
        matches = tuple(s for s in config.strategies if s.kind.value == selector)
    if not matches:
        known = ", ".join(s.name for s in config.strategies)
        raise ConfigError(f"no strategy matches {selector!r}; config has: {known}")
    return matches


def run_config(
    config: ExperimentConfig,
    strategy_filter: str | None = None,
    allow_partial: bool = False,
    backend=None,
) -> list[ExperimentResult]:
    """Run every selected strategy and write the run-level report files."""
    backend = backend if backend is not None else make_backend(config.backend)
    cache = CacheStore(config.cache_dir)
    records = load_dataset(config.dataset_path, config.gold_kind)
    results = []
    for strategy in select_strategies(config, strategy_filter):
        result = run_experiment(
            config,
            strategy,
            backend=backend,
            cache=cache,
            records=records,
            allow_partial=allow_partial,
        )
        logger.info(
            "%s: %s=%s capture_rate=%.3f n=%d failures=%d",
            strategy.name,
            result.metric_name.value,
            f"{result.report.aggregate_percent:.1f}",
            result.report.capture_rate,
            result.report.n_records,
            len(result.failures),
        )
        results.append(result)
    text, csv_text = render_run_summary(results)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text, encoding="utf-8")
    (out / "report.csv").write_text(csv_text, encoding="utf-8")
    return results


@dataclass(frozen=True)
class CheckVerdict:
    passed: bool
    aggregate_percent: float
    reference: float
    tolerance: float
    difference: float


def compare_to_reference(result, reference: float, tolerance: float) -> CheckVerdict:
    """Pass iff the result's aggregate is within tolerance of the reference."""
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    if isinstance(result, ExperimentResult):
        value = result.report.aggregate_percent
    else:
        value = result.aggregate_percent
    difference = abs(value - reference)
    return CheckVerdict(
        passed=difference <= tolerance,
        aggregate_percent=value,
        reference=reference,
        tolerance=tolerance,
        difference=difference,
    )
