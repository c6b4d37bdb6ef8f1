"""Strategy definitions and chat prompt assembly.

Seven prompt strategies are shipped: baseline (question only), rag (question
plus retrieved contexts), cot (step-by-step reasoning), rar (reframe then
answer), and square (generate N sub-questions, answer them, then answer the
original question) in three flavors that differ in how the final answer is
drawn from the sub-answers: none, summarize, vote.

System prompts and two-shot exemplars live in a template directory, one
``system_{strategy}.txt`` and one ``fewshot_{strategy}.jsonl`` per strategy
(fields: question, assistant_reply). The packaged store under ``templates/``
is the default; pass ``template_dir`` to swap in your own transcriptions.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path

from .dataset import ContextPassage, QueryRecord
from .errors import ContextsForbiddenError, ContextsRequiredError, TemplateStoreError

logger = logging.getLogger(__name__)

_PACKAGED_TEMPLATES = Path(__file__).parent / "templates"
_ROLES = ("system", "user", "assistant")


class StrategyKind(str, Enum):
    BASELINE = "baseline"
    RAG = "rag"
    COT = "cot"
    RAR = "rar"
    SQUARE = "square"


class Aggregation(str, Enum):
    NONE = "none"
    SUMMARIZE = "summarize"
    VOTE = "vote"


_LABELS = {
    StrategyKind.BASELINE: "Baseline",
    StrategyKind.RAG: "RAG",
    StrategyKind.COT: "CoT",
    StrategyKind.RAR: "RaR",
    StrategyKind.SQUARE: "SQuARE",
}


@dataclass(frozen=True)
class StrategyConfig:
    """One prompting strategy, fully parameterized."""

    kind: StrategyKind
    n_questions: int = 3
    aggregation: Aggregation = Aggregation.NONE
    fewshot_k: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        if self.kind is StrategyKind.SQUARE and self.n_questions < 1:
            raise ValueError("n_questions must be >= 1 for the square strategy")
        if self.kind is not StrategyKind.SQUARE and self.aggregation is not Aggregation.NONE:
            raise ValueError(f"aggregation applies only to square, not {self.kind.value}")
        if self.fewshot_k not in (0, 2):
            raise ValueError(f"fewshot_k must be 0 or 2, got {self.fewshot_k}")

    @property
    def template_key(self) -> str:
        """Template-store key: the kind, suffixed by aggregation for square."""
        if self.kind is StrategyKind.SQUARE and self.aggregation is not Aggregation.NONE:
            return f"square_{self.aggregation.value}"
        return self.kind.value

    @property
    def name(self) -> str:
        """Machine name, unique per parameterization (used in file names)."""
        parts = [self.kind.value]
        if self.kind is StrategyKind.SQUARE:
            parts.append(f"n{self.n_questions}")
            if self.aggregation is not Aggregation.NONE:
                parts.append(self.aggregation.value)
        parts.append(f"fs{self.fewshot_k}")
        return "_".join(parts)

    @property
    def label(self) -> str:
        """Human label for report columns, e.g. "SQuARE+Vote"."""
        label = _LABELS[self.kind]
        if self.kind is StrategyKind.SQUARE and self.aggregation is not Aggregation.NONE:
            label += "+" + self.aggregation.value.capitalize()
        return label


@dataclass(frozen=True)
class FewShotExample:
    """A worked example: a question and the full assistant reply for it."""

    question: str
    assistant_reply: str

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError("few-shot question must be non-empty")
        if "Answer" not in self.assistant_reply:
            raise ValueError("few-shot reply must contain an 'Answer' line")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class ChatPrompt:
    """An ordered message sequence ready to send to a chat-completion backend.

    Shape is enforced on construction: exactly one system message, first; then
    user/assistant strictly alternating, starting and ending with user.
    """

    messages: tuple[ChatMessage, ...]

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        msgs = self.messages
        if len(msgs) < 2:
            raise ValueError("prompt needs at least a system and a user message")
        if msgs[0].role != "system":
            raise ValueError("first message must be the system message")
        if any(m.role == "system" for m in msgs[1:]):
            raise ValueError("only one system message is allowed")
        for i, msg in enumerate(msgs[1:]):
            expected = "user" if i % 2 == 0 else "assistant"
            if msg.role != expected:
                raise ValueError(f"message {i + 1} must be {expected}, got {msg.role}")
        if msgs[-1].role != "user":
            raise ValueError("last message must be from the user")

    def as_payload(self) -> list[dict]:
        return [{"role": m.role, "content": m.content} for m in self.messages]


_STRATEGY_KEYS = (
    "baseline",
    "rag",
    "cot",
    "rar",
    "square",
    "square_summarize",
    "square_vote",
)


class TemplateStore:
    """Read-only view of a prompt template directory, loaded eagerly."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self._system: dict[str, str] = {}
        self._fewshot: dict[str, tuple[FewShotExample, ...]] = {}
        for key in _STRATEGY_KEYS:
            self._system[key] = self._read_system(key)
            self._fewshot[key] = self._read_fewshot(key)

    def _read_system(self, key: str) -> str:
        path = self.directory / f"system_{key}.txt"
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise TemplateStoreError(f"missing system prompt template: {path} ({exc})") from exc
        text = text.rstrip("\n")
        if not text:
            raise TemplateStoreError(f"empty system prompt template: {path}")
        return text

    def _read_fewshot(self, key: str) -> tuple[FewShotExample, ...]:
        path = self.directory / f"fewshot_{key}.jsonl"
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise TemplateStoreError(f"missing few-shot template: {path} ({exc})") from exc
        examples = []
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                examples.append(
                    FewShotExample(
                        question=raw["question"], assistant_reply=raw["assistant_reply"]
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise TemplateStoreError(f"{path} line {line_no}: {exc}") from None
        if not examples:
            raise TemplateStoreError(f"no examples in few-shot template: {path}")
        return tuple(examples)

    def system_text(self, key: str) -> str:
        return self._system[key]

    def fewshot(self, key: str) -> tuple[FewShotExample, ...]:
        return self._fewshot[key]


@lru_cache(maxsize=4)
def _store_for(directory: str) -> TemplateStore:
    return TemplateStore(directory)


def default_store() -> TemplateStore:
    return _store_for(str(_PACKAGED_TEMPLATES))


def _resolve_store(template_dir) -> TemplateStore:
    if template_dir is None:
        return default_store()
    if isinstance(template_dir, TemplateStore):
        return template_dir
    return _store_for(str(template_dir))


def build_system_prompt(strategy: StrategyConfig, template_dir=None) -> str:
    """Render the strategy's system prompt, filling the {N} placeholder."""
    store = _resolve_store(template_dir)
    text = store.system_text(strategy.template_key)
    if strategy.kind is StrategyKind.SQUARE:
        text = text.replace("{N}", str(strategy.n_questions))
    return text


def fewshot_examples(strategy: StrategyConfig, template_dir=None) -> tuple[FewShotExample, ...]:
    """The strategy's worked examples; empty for a zero-shot configuration."""
    if strategy.fewshot_k == 0:
        return ()
    store = _resolve_store(template_dir)
    examples = store.fewshot(strategy.template_key)
    if len(examples) != strategy.fewshot_k:
        raise TemplateStoreError(
            f"strategy {strategy.name} wants {strategy.fewshot_k} examples, "
            f"template has {len(examples)}"
        )
    return examples


def build_user_message(
    strategy: StrategyConfig,
    question: str,
    contexts: tuple[ContextPassage, ...] = (),
    allow_missing_contexts: bool = False,
) -> str:
    """Render the final user turn: numbered context blocks, then the question.

    Baseline takes no contexts (passing any is an error). Every other strategy
    expects at least one passage; a record that genuinely has none renders
    question-only with a warning when allow_missing_contexts is set.
    """
    if strategy.kind is StrategyKind.BASELINE:
        if contexts:
            raise ContextsForbiddenError("baseline prompts take no context passages")
        return f"Question: {question}"
    if not contexts:
        if not allow_missing_contexts:
            raise ContextsRequiredError(
                f"strategy {strategy.kind.value} expects context passages"
            )
        logger.warning("record has no contexts; sending question only")
        return f"Question: {question}"
    blocks = [f"Context {i}: {p.text}" for i, p in enumerate(contexts, start=1)]
    return "\n\n".join(blocks + [f"Question: {question}"])


def assemble_prompt(
    strategy: StrategyConfig, record: QueryRecord, template_dir=None
) -> ChatPrompt:
    """Build the full chat prompt for one record under one strategy.

    Layout: system prompt, then one user/assistant pair per few-shot example
    (exemplars ship question-only, without contexts), then the record's user
    turn. Baseline drops the record's contexts; other strategies include them.
    """
    messages = [ChatMessage("system", build_system_prompt(strategy, template_dir))]
    for example in fewshot_examples(strategy, template_dir):
        messages.append(ChatMessage("user", f"Question: {example.question}"))
        messages.append(ChatMessage("assistant", example.assistant_reply))
    contexts = () if strategy.kind is StrategyKind.BASELINE else record.contexts
    messages.append(
        ChatMessage(
            "user",
            build_user_message(
                strategy, record.question, contexts, allow_missing_contexts=True
            ),
        )
    )
    return ChatPrompt(tuple(messages))
