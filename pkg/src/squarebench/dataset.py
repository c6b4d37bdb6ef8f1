"""Loading, sampling, and context handling for line-delimited QA datasets.

A dataset is a UTF-8 JSONL file, one record per line:

    {"id": "q1",
     "question": "Who wrote Dubliners?",
     "answers": ["James Joyce", "Joyce"],
     "contexts": [{"text": "...", "title": "Dubliners", "score": 1.93,
                   "source_id": "wiki:Dubliners"}]}

A record carries exactly one gold field: "answers" (a flat alias list, for
substring exact match) or "aspects" (a list of alias sets, for recall-style
scoring of long-form answers). Unknown fields are ignored with a warning so
exports from other tools load without preprocessing.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import (
    DatasetIOError,
    GoldKindMismatchError,
    RecordInvalidError,
    SampleTooLargeError,
)

logger = logging.getLogger(__name__)

_RECORD_FIELDS = {"id", "question", "answers", "aspects", "contexts"}
_CONTEXT_FIELDS = {"text", "title", "score", "source_id"}


class GoldKind(str, Enum):
    ALIAS_LIST = "alias_list"
    ASPECT_SETS = "aspect_sets"


@dataclass(frozen=True)
class ContextPassage:
    """One retrieved passage attached to a record."""

    text: str
    title: str | None = None
    score: float | None = None
    source_id: str | None = None

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("context text must be a non-empty string")
        if self.score is not None:
            object.__setattr__(self, "score", float(self.score))


@dataclass(frozen=True)
class GoldLabel:
    """Gold answers for one record, either a flat alias list or aspect sets."""

    kind: GoldKind
    aliases: tuple[str, ...] = ()
    aspects: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", GoldKind(self.kind))
        object.__setattr__(self, "aliases", tuple(self.aliases))
        object.__setattr__(self, "aspects", tuple(tuple(a) for a in self.aspects))
        if self.kind is GoldKind.ALIAS_LIST:
            if not self.aliases:
                raise ValueError("alias_list gold needs at least one alias")
            if self.aspects:
                raise ValueError("alias_list gold must not carry aspects")
            bad = [a for a in self.aliases if not isinstance(a, str) or not a]
        else:
            if not self.aspects:
                raise ValueError("aspect_sets gold needs at least one aspect")
            if self.aliases:
                raise ValueError("aspect_sets gold must not carry aliases")
            if any(not aspect for aspect in self.aspects):
                raise ValueError("every aspect needs at least one alias")
            bad = [a for aspect in self.aspects for a in aspect if not isinstance(a, str) or not a]
        if bad:
            raise ValueError("gold aliases must be non-empty strings")

    @classmethod
    def alias_list(cls, aliases) -> "GoldLabel":
        return cls(kind=GoldKind.ALIAS_LIST, aliases=tuple(aliases))

    @classmethod
    def aspect_sets(cls, aspects) -> "GoldLabel":
        return cls(kind=GoldKind.ASPECT_SETS, aspects=tuple(tuple(a) for a in aspects))


@dataclass(frozen=True)
class QueryRecord:
    """One evaluation item: a question, its gold labels, and retrieved contexts."""

    id: str
    question: str
    gold: GoldLabel
    contexts: tuple[ContextPassage, ...] = ()

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("record id must be a non-empty string")
        if not isinstance(self.question, str) or not self.question.strip():
            raise ValueError("question must be a non-empty string")
        object.__setattr__(self, "contexts", _ordered_contexts(self.contexts))


def _ordered_contexts(contexts) -> tuple[ContextPassage, ...]:
    """Establish non-increasing score order when every passage is scored.

    Unscored (or partially scored) context lists keep their input order; the
    sort is stable, so equal scores keep input order too.
    """
    passages = tuple(contexts)
    if passages and all(p.score is not None for p in passages):
        passages = tuple(sorted(passages, key=lambda p: -p.score))
    return passages


def _parse_context(raw, line_no: int, warn) -> ContextPassage:
    if not isinstance(raw, dict):
        raise RecordInvalidError(f"line {line_no}: context entries must be objects")
    for key in raw.keys() - _CONTEXT_FIELDS:
        warn(f"context field {key!r}")
    text = raw.get("text")
    score = raw.get("score")
    if score is not None and not isinstance(score, (int, float)):
        raise RecordInvalidError(f"line {line_no}: context score must be numeric")
    try:
        return ContextPassage(
            text=text,
            title=raw.get("title"),
            score=score,
            source_id=raw.get("source_id"),
        )
    except (TypeError, ValueError) as exc:
        raise RecordInvalidError(f"line {line_no}: {exc}") from None


def _parse_gold(raw: dict, line_no: int, expected_kind: GoldKind) -> GoldLabel:
    has_answers = "answers" in raw
    has_aspects = "aspects" in raw
    if has_answers and has_aspects:
        raise RecordInvalidError(f"line {line_no}: record has both 'answers' and 'aspects'")
    if not has_answers and not has_aspects:
        raise RecordInvalidError(f"line {line_no}: record has neither 'answers' nor 'aspects'")
    found_kind = GoldKind.ALIAS_LIST if has_answers else GoldKind.ASPECT_SETS
    if found_kind is not expected_kind:
        raise GoldKindMismatchError(
            f"line {line_no}: expected {expected_kind.value} gold but found {found_kind.value}"
        )
    try:
        if has_answers:
            if not isinstance(raw["answers"], list):
                raise ValueError("'answers' must be an array of strings")
            return GoldLabel.alias_list(raw["answers"])
        if not isinstance(raw["aspects"], list) or any(
            not isinstance(a, list) for a in raw["aspects"]
        ):
            raise ValueError("'aspects' must be an array of string arrays")
        return GoldLabel.aspect_sets(raw["aspects"])
    except ValueError as exc:
        raise RecordInvalidError(f"line {line_no}: {exc}") from None


def load_dataset(path, expected_gold_kind: GoldKind | str) -> list[QueryRecord]:
    """Read a JSONL dataset, validating each record.

    Raises DatasetIOError when the file cannot be read, RecordInvalidError
    (with the offending line number) on bad records, and GoldKindMismatchError
    when a record's gold field does not match expected_gold_kind.
    """
    expected_kind = GoldKind(expected_gold_kind)
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetIOError(f"cannot read dataset {path}: {exc}") from exc

    warned: set[str] = set()

    def warn(what: str) -> None:
        if what not in warned:
            warned.add(what)
            logger.warning("%s: ignoring unknown %s", path.name, what)

    records: list[QueryRecord] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordInvalidError(f"line {line_no}: invalid JSON ({exc.msg})") from None
        if not isinstance(raw, dict):
            raise RecordInvalidError(f"line {line_no}: record must be a JSON object")
        for key in raw.keys() - _RECORD_FIELDS:
            warn(f"record field {key!r}")

        gold = _parse_gold(raw, line_no, expected_kind)
        raw_contexts = raw.get("contexts", [])
        if not isinstance(raw_contexts, list):
            raise RecordInvalidError(f"line {line_no}: 'contexts' must be an array")
        contexts = tuple(_parse_context(c, line_no, warn) for c in raw_contexts)
        try:
            record = QueryRecord(
                id=raw.get("id"),
                question=raw.get("question"),
                gold=gold,
                contexts=contexts,
            )
        except (TypeError, ValueError) as exc:
            raise RecordInvalidError(f"line {line_no}: {exc}") from None
        if record.id in seen_ids:
            raise RecordInvalidError(f"line {line_no}: duplicate record id {record.id!r}")
        seen_ids.add(record.id)
        records.append(record)
    return records


def serialize_record(record: QueryRecord) -> str:
    """Render one record as a JSON line (inverse of load_dataset for one line)."""
    out: dict = {"id": record.id, "question": record.question}
    if record.gold.kind is GoldKind.ALIAS_LIST:
        out["answers"] = list(record.gold.aliases)
    else:
        out["aspects"] = [list(a) for a in record.gold.aspects]
    contexts = []
    for p in record.contexts:
        ctx: dict = {"text": p.text}
        if p.title is not None:
            ctx["title"] = p.title
        if p.score is not None:
            ctx["score"] = p.score
        if p.source_id is not None:
            ctx["source_id"] = p.source_id
        contexts.append(ctx)
    out["contexts"] = contexts
    return json.dumps(out, ensure_ascii=False)


def write_dataset(records, path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(serialize_record(record) + "\n")
    except OSError as exc:
        raise DatasetIOError(f"cannot write dataset {path}: {exc}") from exc


def sample_records(records, n: int, seed: int) -> list[QueryRecord]:
    """Draw n records without replacement, deterministically for a given seed.

    The sample keeps the original file order, so downstream iteration order
    does not depend on the RNG's draw order.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    if n > len(records):
        raise SampleTooLargeError(f"sample size {n} exceeds dataset size {len(records)}")
    rng = random.Random(seed)
    picked = sorted(rng.sample(range(len(records)), n))
    return [records[i] for i in picked]


def take_top_k_contexts(record: QueryRecord, k: int) -> QueryRecord:
    """Return a copy of the record keeping its k best-scored passages.

    When scores are present the order is non-increasing score with ties kept in
    input order; without scores the input order stands. Applying this twice
    with the same k changes nothing.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    kept = _ordered_contexts(record.contexts)[: min(k, len(record.contexts))]
    return dataclasses.replace(record, contexts=kept)
