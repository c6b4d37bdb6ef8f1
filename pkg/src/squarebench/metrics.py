"""Answer-matching metrics: substring exact match and aspect recall.

Both metrics compare normalized text. Normalization lowercases, strips
punctuation, removes the articles a/an/the, and collapses whitespace; matching
then requires the normalized gold alias to appear as a contiguous run of
whole tokens inside the normalized prediction, so the alias "art" does not
match inside "party".
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

from .dataset import GoldKind, GoldLabel
from .errors import EmptyInputError

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_ARTICLES = re.compile(r"\b(a|an|the)\b")


class MetricName(str, Enum):
    SUB_EM = "subEM"
    RECALL_EM = "recallEM"


def metric_for_gold_kind(kind: GoldKind) -> MetricName:
    return MetricName.SUB_EM if GoldKind(kind) is GoldKind.ALIAS_LIST else MetricName.RECALL_EM


def normalize_text(text: str) -> str:
    """Lowercase, drop punctuation, drop articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def _contains_alias(prediction_norm: str, alias_norm: str) -> bool:
    # Token-boundary containment via space padding; both sides are already
    # single-spaced. An alias that normalizes to nothing never matches.
    if not alias_norm:
        return False
    return f" {alias_norm} " in f" {prediction_norm} "


def sub_em(prediction: str, gold: GoldLabel) -> int:
    """1 if any gold alias appears (normalized, token-aligned) in the prediction."""
    if gold.kind is not GoldKind.ALIAS_LIST:
        raise ValueError(f"sub_em needs alias_list gold, got {gold.kind.value}")
    prediction_norm = normalize_text(prediction)
    for alias in gold.aliases:
        if _contains_alias(prediction_norm, normalize_text(alias)):
            return 1
    return 0


def recall_em(prediction: str, gold: GoldLabel) -> float:
    """Fraction of gold aspects with at least one alias found in the prediction."""
    if gold.kind is not GoldKind.ASPECT_SETS:
        raise ValueError(f"recall_em needs aspect_sets gold, got {gold.kind.value}")
    prediction_norm = normalize_text(prediction)
    hits = 0
    for aspect in gold.aspects:
        if any(_contains_alias(prediction_norm, normalize_text(a)) for a in aspect):
            hits += 1
    return hits / len(gold.aspects)


def score_prediction(prediction: str, gold: GoldLabel) -> float:
    """Dispatch to the metric matching the gold kind; always returns a float."""
    if gold.kind is GoldKind.ALIAS_LIST:
        return float(sub_em(prediction, gold))
    return recall_em(prediction, gold)


@dataclass(frozen=True)
class ScoredRecord:
    """Per-record scoring outcome."""

    record_id: str
    score: float
    captured: bool
    extracted_answer: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be within [0, 1], got {self.score}")


@dataclass(frozen=True)
class MetricReport:
    """Aggregate over one experiment's scored records."""

    metric_name: MetricName
    aggregate_percent: float
    capture_rate: float
    n_records: int


def aggregate(scored, metric_name: MetricName | str) -> MetricReport:
    """Aggregate per-record scores into a percentage plus capture statistics.

    Uses math.fsum, so the result does not depend on record order.
    """
    metric = MetricName(metric_name)
    scored = list(scored)
    if not scored:
        raise EmptyInputError("aggregate needs at least one scored record")
    if metric is MetricName.SUB_EM and any(r.score not in (0.0, 1.0) for r in scored):
        raise ValueError("subEM scores must be 0 or 1")
    total = math.fsum(r.score for r in scored)
    captured = sum(1 for r in scored if r.captured)
    return MetricReport(
        metric_name=metric,
        aggregate_percent=100.0 * total / len(scored),
        capture_rate=captured / len(scored),
        n_records=len(scored),
    )


def format_percent(value: float) -> str:
    """Render a percentage with one decimal, rounding halves up (88.45 -> 88.5)."""
    return str(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))
