"""Attach retrieved contexts to question records and write evaluation JSONL.

The output format is the line-delimited QA schema consumed by evaluation
harnesses: one object per line with ``id``, ``question``, exactly one gold
field (``answers``: flat alias list, or ``aspects``: list of alias sets),
and ``contexts`` — objects carrying ``text``, optional ``title``, ``score``,
and ``source_id``.  Input question files use the same schema; any contexts
already present are replaced by fresh retrieval results.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .embedders import Embedder
from .errors import DatasetFormatError
from .index import EmbeddingIndex, retrieve_top_k

logger = logging.getLogger(__name__)

_KNOWN_KEYS = {"id", "question", "answers", "aspects", "contexts"}


@dataclass(frozen=True)
class QuestionRecord:
    """One question with its gold labels, before contexts are attached."""

    id: str
    question: str
    answers: Optional[tuple[str, ...]] = None
    aspects: Optional[tuple[tuple[str, ...], ...]] = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise DatasetFormatError("id must be a non-empty string")
        if not isinstance(self.question, str) or not self.question.strip():
            raise DatasetFormatError("question must be a non-empty string")
        if (self.answers is None) == (self.aspects is None):
            raise DatasetFormatError(
                "record needs exactly one of 'answers' or 'aspects'"
            )
        if self.answers is not None:
            if not self.answers or any(
                not isinstance(a, str) or not a for a in self.answers
            ):
                raise DatasetFormatError("'answers' must be non-empty strings")
        if self.aspects is not None:
            if not self.aspects or any(
                not aspect or any(not isinstance(a, str) or not a for a in aspect)
                for aspect in self.aspects
            ):
                raise DatasetFormatError(
                    "'aspects' must be non-empty lists of non-empty strings"
                )


def load_questions(path: Path) -> list[QuestionRecord]:
    """Read question records from a JSONL file.

    Raises :class:`DatasetFormatError` naming the first offending line.
    Unknown fields and pre-existing contexts are ignored (contexts are about
    to be replaced); duplicate ids are rejected.
    """
    records: list[QuestionRecord] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(
                    f"{path}:{line_no}: invalid JSON: {exc}"
                ) from exc
            if not isinstance(raw, dict):
                raise DatasetFormatError(f"{path}:{line_no}: expected an object")
            for key in set(raw) - _KNOWN_KEYS:
                logger.warning("%s:%d: ignoring unknown field %r", path, line_no, key)
            answers = raw.get("answers")
            aspects = raw.get("aspects")
            if answers is not None and not isinstance(answers, list):
                raise DatasetFormatError(
                    f"{path}:{line_no}: 'answers' must be an array"
                )
            if aspects is not None and (
                not isinstance(aspects, list)
                or any(not isinstance(a, list) for a in aspects)
            ):
                raise DatasetFormatError(
                    f"{path}:{line_no}: 'aspects' must be an array of arrays"
                )
            try:
                record = QuestionRecord(
                    id=raw.get("id"),
                    question=raw.get("question"),
                    answers=tuple(answers) if answers is not None else None,
                    aspects=tuple(tuple(a) for a in aspects)
                    if aspects is not None
                    else None,
                )
            except DatasetFormatError as exc:
                raise DatasetFormatError(f"{path}:{line_no}: {exc}") from exc
            if record.id in seen_ids:
                raise DatasetFormatError(
                    f"{path}:{line_no}: duplicate id {record.id!r}"
                )
            seen_ids.add(record.id)
            records.append(record)
    return records


def record_with_contexts(
    record: QuestionRecord,
    index: EmbeddingIndex,
    embedder: Embedder,
    k: int,
) -> dict:
    """Retrieve the top-``k`` passages for one question and assemble the
    output object, contexts in descending-score order."""
    hits = retrieve_top_k(index, record.question, embedder, k)
    out: dict = {"id": record.id, "question": record.question}
    if record.answers is not None:
        out["answers"] = list(record.answers)
    else:
        out["aspects"] = [list(a) for a in record.aspects or ()]
    contexts = []
    for passage, score in hits:
        ctx: dict = {"text": passage.text}
        if passage.title is not None:
            ctx["title"] = passage.title
        ctx["score"] = score
        ctx["source_id"] = passage.source_id
        contexts.append(ctx)
    out["contexts"] = contexts
    return out


def export_contexts(
    records: Sequence[QuestionRecord],
    index: EmbeddingIndex,
    embedder: Embedder,
    k: int,
    out_path: Path,
) -> int:
    """Write one JSONL line per question with its retrieved contexts.

    Returns the number of records written.  Output is deterministic for a
    given index, embedder, and input order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    count = 0
    with open(out_path, "w", encoding="utf-8") as handle:
        for record in records:
            obj = record_with_contexts(record, index, embedder, k)
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")
            count += 1
    return count
