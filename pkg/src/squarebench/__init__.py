"""squarebench: an evaluation harness for QA prompting strategies.

Runs baseline, retrieval-augmented, chain-of-thought, rephrase-and-respond,
and self-interrogation (square) prompts against any chat-completion backend,
extracts the final short answer from each generation, and scores substring
exact match or aspect recall against gold labels.
"""

from .backend import (
    BackendSpec,
    CacheKey,
    CacheStore,
    DecodeMode,
    DecodingParams,
    Generation,
    cache_key,
    cached_complete,
    complete,
    make_backend,
)
from .dataset import (
    ContextPassage,
    GoldKind,
    GoldLabel,
    QueryRecord,
    load_dataset,
    sample_records,
    serialize_record,
    take_top_k_contexts,
    write_dataset,
)
from .extraction import ExtractionResult, capture_rate, extract_answer, trim_answer_span
from .metrics import (
    MetricName,
    MetricReport,
    ScoredRecord,
    aggregate,
    format_percent,
    normalize_text,
    recall_em,
    score_prediction,
    sub_em,
)
from .prompts import (
    Aggregation,
    ChatMessage,
    ChatPrompt,
    FewShotExample,
    StrategyConfig,
    StrategyKind,
    TemplateStore,
    assemble_prompt,
    build_system_prompt,
    build_user_message,
    fewshot_examples,
)
from .reporting import ResultSummary, render_report, render_run_summary
from .runner import (
    CheckVerdict,
    ExperimentConfig,
    ExperimentResult,
    compare_to_reference,
    config_fingerprint,
    load_config,
    load_result_summary,
    run_config,
    run_experiment,
)

__version__ = "0.1.0"
