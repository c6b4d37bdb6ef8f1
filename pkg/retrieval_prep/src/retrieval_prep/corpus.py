"""Passage corpus model and JSONL loading."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import CorpusFormatError

_ALLOWED_KEYS = {"source_id", "title", "text"}


@dataclass(frozen=True)
class CorpusPassage:
    """One retrievable unit of text.

    ``source_id`` identifies the passage within its corpus; ``title`` is an
    optional human-readable heading carried through to exported contexts.
    """

    source_id: str
    text: str
    title: Optional[str] = None

    def __post_init__(self) -> None:
        if not isinstance(self.source_id, str) or not self.source_id.strip():
            raise CorpusFormatError("source_id must be a non-empty string")
        if not isinstance(self.text, str) or not self.text.strip():
            raise CorpusFormatError("text must be a non-empty string")
        if self.title is not None and not isinstance(self.title, str):
            raise CorpusFormatError("title must be a string when present")

    def display_text(self) -> str:
        """Text as it should appear in an exported context.

        Passages with a title render as ``"{title}\\n{text}"`` so the heading
        survives the export, mirroring how titled passages are usually shown
        to a reader.
        """
        if self.title:
            return f"{self.title}\n{self.text}"
        return self.text


def load_corpus(path: Path) -> list[CorpusPassage]:
    """Read a line-delimited JSON corpus file.

    Each line must be an object with string ``source_id`` and ``text`` and an
    optional string ``title``.  Raises :class:`CorpusFormatError` naming the
    first offending line; duplicate ``source_id`` values are rejected because
    retrieval results reference passages by id.
    """
    passages: list[CorpusPassage] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise CorpusFormatError(f"{path}:{line_no}: expected an object")
            unknown = set(raw) - _ALLOWED_KEYS
            if unknown:
                raise CorpusFormatError(
                    f"{path}:{line_no}: unknown fields {sorted(unknown)}"
                )
            missing = {"source_id", "text"} - set(raw)
            if missing:
                raise CorpusFormatError(
                    f"{path}:{line_no}: missing fields {sorted(missing)}"
                )
            try:
                passage = CorpusPassage(
                    source_id=raw["source_id"],
                    text=raw["text"],
                    title=raw.get("title"),
                )
            except CorpusFormatError as exc:
                raise CorpusFormatError(f"{path}:{line_no}: {exc}") from exc
            if passage.source_id in seen_ids:
                raise CorpusFormatError(
                    f"{path}:{line_no}: duplicate source_id {passage.source_id!r}"
                )
            seen_ids.add(passage.source_id)
            passages.append(passage)
    return passages
