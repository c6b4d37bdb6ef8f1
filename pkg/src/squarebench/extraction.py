"""Pull the final short answer out of a free-form model generation.

Models prompted by this harness are told to finish with an "Answer: ..." line,
but frequently bury intermediate "Answer:" lines in their reasoning. The
extractor anchors on the LAST case-insensitive occurrence of "answer" and
takes everything after it, so sub-question answers and reasoning chatter are
skipped. Generations with no "answer" token at all fall back to the full text.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass

from .errors import EmptyInputError

# The greedy .* prefix pins the capture to the last "answer" occurrence;
# DOTALL lets both the prefix and the captured span cross line breaks.
ANSWER_PATTERN = re.compile(r".*answer(.*)", re.IGNORECASE | re.DOTALL)

_LEADING = ":" + string.whitespace
_TRAILING = "." + string.whitespace


@dataclass(frozen=True)
class ExtractionResult:
    """Extracted answer plus whether the pattern actually captured anything.

    When captured is False, ``answer`` is the full generation text and scoring
    proceeds on that fallback.  ``raw_match`` keeps the untrimmed capture for
    audits (None when the pattern found no "answer" token at all).
    """

    answer: str
    captured: bool
    raw_match: str | None = None


def trim_answer_span(span: str) -> str:
    """Drop leading colons/whitespace and trailing whitespace/periods.

    Trailing periods are stripped exhaustively, not just once, so trimming is
    idempotent.
    """
    return span.lstrip(_LEADING).rstrip(_TRAILING)


def extract_answer(text: str) -> ExtractionResult:
    """Extract the final answer span from a generation.

    An empty span after trimming (e.g. the generation ends with a bare
    "Answer:") counts as not captured.
    """
    match = ANSWER_PATTERN.match(text)
    if match is None:
        return ExtractionResult(answer=text, captured=False, raw_match=None)
    raw = match.group(1)
    span = trim_answer_span(raw)
    if not span:
        return ExtractionResult(answer=text, captured=False, raw_match=raw)
    return ExtractionResult(answer=span, captured=True, raw_match=raw)


def capture_rate(results) -> float:
    """Fraction of extraction results where the pattern captured a span."""
    results = list(results)
    if not results:
        raise EmptyInputError("capture_rate needs at least one extraction result")
    return sum(1 for r in results if r.captured) / len(results)
