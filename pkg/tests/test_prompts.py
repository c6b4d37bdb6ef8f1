"""Strategy configs, template loading, and chat prompt assembly.

The transcription tests compare rendered prompts against independently
re-typed copies under tests/data/, so a typo in the packaged templates cannot
hide behind a copy of itself.
"""

import json
import shutil

import pytest

from conftest import load_fixture_json, make_record
from squarebench.dataset import ContextPassage, GoldLabel, QueryRecord
from squarebench.errors import (
    ContextsForbiddenError,
    ContextsRequiredError,
    TemplateStoreError,
)
from squarebench.extraction import extract_answer
from squarebench.prompts import (
    Aggregation,
    ChatMessage,
    ChatPrompt,
    StrategyConfig,
    StrategyKind,
    TemplateStore,
    assemble_prompt,
    build_system_prompt,
    build_user_message,
    default_store,
    fewshot_examples,
)


def square(n=3, aggregation=Aggregation.NONE, k=2):
    return StrategyConfig(StrategyKind.SQUARE, n_questions=n, aggregation=aggregation, fewshot_k=k)


class TestStrategyConfig:
    def test_defaults(self):
        strat = StrategyConfig(StrategyKind.SQUARE)
        assert strat.n_questions == 3
        assert strat.aggregation is Aggregation.NONE
        assert strat.fewshot_k == 2

    def test_accepts_string_enums(self):
        strat = StrategyConfig("square", aggregation="vote")
        assert strat.kind is StrategyKind.SQUARE
        assert strat.aggregation is Aggregation.VOTE

    def test_aggregation_only_for_square(self):
        with pytest.raises(ValueError):
            StrategyConfig(StrategyKind.COT, aggregation=Aggregation.VOTE)

    def test_fewshot_k_limited(self):
        with pytest.raises(ValueError):
            StrategyConfig(StrategyKind.BASELINE, fewshot_k=1)
        with pytest.raises(ValueError):
            StrategyConfig(StrategyKind.BASELINE, fewshot_k=3)

    def test_n_questions_positive(self):
        with pytest.raises(ValueError):
            StrategyConfig(StrategyKind.SQUARE, n_questions=0)

    def test_names(self):
        assert StrategyConfig(StrategyKind.BASELINE).name == "baseline_fs2"
        assert StrategyConfig(StrategyKind.RAG, fewshot_k=0).name == "rag_fs0"
        assert square(n=3).name == "square_n3_fs2"
        assert square(n=5, aggregation=Aggregation.VOTE).name == "square_n5_vote_fs2"
        assert square(n=10, aggregation=Aggregation.SUMMARIZE, k=0).name == "square_n10_summarize_fs0"

    def test_labels(self):
        assert StrategyConfig(StrategyKind.BASELINE).label == "Baseline"
        assert StrategyConfig(StrategyKind.RAG).label == "RAG"
        assert StrategyConfig(StrategyKind.COT).label == "CoT"
        assert StrategyConfig(StrategyKind.RAR).label == "RaR"
        assert square().label == "SQuARE"
        assert square(aggregation=Aggregation.SUMMARIZE).label == "SQuARE+Summarize"
        assert square(aggregation=Aggregation.VOTE).label == "SQuARE+Vote"

    def test_template_keys(self):
        assert StrategyConfig(StrategyKind.BASELINE).template_key == "baseline"
        assert square().template_key == "square"
        assert square(aggregation=Aggregation.SUMMARIZE).template_key == "square_summarize"
        assert square(aggregation=Aggregation.VOTE).template_key == "square_vote"


class TestTranscriptions:
    """Rendered prompts must byte-match the independently re-typed copies."""

    cases = [
        ("system_square_n3.txt", square(n=3)),
        ("system_square_summarize_n3.txt", square(n=3, aggregation=Aggregation.SUMMARIZE)),
        ("system_square_vote_n3.txt", square(n=3, aggregation=Aggregation.VOTE)),
        ("system_cot.txt", StrategyConfig(StrategyKind.COT)),
        ("system_rar.txt", StrategyConfig(StrategyKind.RAR)),
    ]

    @pytest.mark.parametrize("fixture_name,strategy", cases, ids=[c[0] for c in cases])
    def test_system_prompt_matches_fixture(self, data_dir, fixture_name, strategy):
        expected = (data_dir / fixture_name).read_text(encoding="utf-8")
        assert build_system_prompt(strategy) == expected

    fewshot_cases = [
        ("fewshot_square.json", square()),
        ("fewshot_square_summarize.json", square(aggregation=Aggregation.SUMMARIZE)),
        ("fewshot_square_vote.json", square(aggregation=Aggregation.VOTE)),
        ("fewshot_cot.json", StrategyConfig(StrategyKind.COT)),
        ("fewshot_rar.json", StrategyConfig(StrategyKind.RAR)),
    ]

    @pytest.mark.parametrize("fixture_name,strategy", fewshot_cases, ids=[c[0] for c in fewshot_cases])
    def test_fewshot_examples_match_fixture(self, data_dir, fixture_name, strategy):
        expected = load_fixture_json(fixture_name)
        examples = fewshot_examples(strategy)
        assert len(examples) == len(expected) == 2
        for example, fixture in zip(examples, expected):
            assert example.question == fixture["question"]
            assert example.assistant_reply == fixture["assistant_reply"]

    def test_every_packaged_exemplar_reply_is_extractable(self):
        store = default_store()
        for key in ("baseline", "rag", "cot", "rar", "square", "square_summarize", "square_vote"):
            for example in store.fewshot(key):
                result = extract_answer(example.assistant_reply)
                assert result.captured, f"{key}: {example.assistant_reply[:50]!r}"

    def test_square_system_prompts_share_first_and_last_lines(self):
        plain = build_system_prompt(square()).splitlines()
        rag = build_system_prompt(StrategyConfig(StrategyKind.RAG)).splitlines()
        assert rag[0] == plain[0]
        assert rag[-1] == plain[-1]
        assert len(rag) == 2

    def test_baseline_prompt_is_single_line_without_context_mention(self):
        text = build_system_prompt(StrategyConfig(StrategyKind.BASELINE))
        assert "\n" not in text
        assert "context" not in text.lower()


class TestPlaceholderSubstitution:
    @pytest.mark.parametrize("n", [1, 2, 3, 5, 10, 12])
    def test_square_variants_render_n(self, n):
        for aggregation in Aggregation:
            text = build_system_prompt(square(n=n, aggregation=aggregation))
            assert f"Generate {n} questions" in text
            assert "{N}" not in text

    def test_non_square_prompts_have_no_placeholder(self):
        for kind in (StrategyKind.BASELINE, StrategyKind.RAG, StrategyKind.COT, StrategyKind.RAR):
            assert "{N}" not in build_system_prompt(StrategyConfig(kind))


class TestTemplateStore:
    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(TemplateStoreError, match="system_baseline"):
            TemplateStore(tmp_path)

    def test_custom_directory_overrides_packaged(self, tmp_path):
        packaged = default_store().directory
        for path in packaged.iterdir():
            shutil.copyfile(path, tmp_path / path.name)
        (tmp_path / "system_baseline.txt").write_text("Custom baseline prompt.\n", encoding="utf-8")
        text = build_system_prompt(StrategyConfig(StrategyKind.BASELINE), template_dir=tmp_path)
        assert text == "Custom baseline prompt."
        # the packaged store is untouched
        assert build_system_prompt(StrategyConfig(StrategyKind.BASELINE)) != text

    def test_bad_fewshot_line_reports_position(self, tmp_path):
        packaged = default_store().directory
        for path in packaged.iterdir():
            shutil.copyfile(path, tmp_path / path.name)
        (tmp_path / "fewshot_rar.jsonl").write_text('{"question": "q"}\n', encoding="utf-8")
        with pytest.raises(TemplateStoreError, match="line 1"):
            TemplateStore(tmp_path)

    def test_fewshot_count_must_match_k(self, tmp_path):
        packaged = default_store().directory
        for path in packaged.iterdir():
            shutil.copyfile(path, tmp_path / path.name)
        lines = (tmp_path / "fewshot_cot.jsonl").read_text(encoding="utf-8").splitlines()
        (tmp_path / "fewshot_cot.jsonl").write_text(lines[0] + "\n", encoding="utf-8")
        store = TemplateStore(tmp_path)
        with pytest.raises(TemplateStoreError, match="wants 2"):
            fewshot_examples(StrategyConfig(StrategyKind.COT), template_dir=store)


class TestChatPromptShape:
    def system(self):
        return ChatMessage("system", "s")

    def test_valid_prompt(self):
        prompt = ChatPrompt((self.system(), ChatMessage("user", "u")))
        assert prompt.as_payload() == [
            {"role": "system", "content": "s"},
            {"role": "user", "content": "u"},
        ]

    def test_rejects_bad_shapes(self):
        user, assistant = ChatMessage("user", "u"), ChatMessage("assistant", "a")
        with pytest.raises(ValueError):
            ChatPrompt((self.system(),))
        with pytest.raises(ValueError):
            ChatPrompt((user, user))
        with pytest.raises(ValueError):
            ChatPrompt((self.system(), self.system(), user))
        with pytest.raises(ValueError):
            ChatPrompt((self.system(), user, user))
        with pytest.raises(ValueError):
            ChatPrompt((self.system(), user, assistant))  # must end with user

    def test_rejects_unknown_role_and_empty_content(self):
        with pytest.raises(ValueError):
            ChatMessage("tool", "x")
        with pytest.raises(ValueError):
            ChatMessage("user", "")


class TestUserMessage:
    def test_baseline_question_only(self):
        text = build_user_message(StrategyConfig(StrategyKind.BASELINE), "Who?")
        assert text == "Question: Who?"

    def test_baseline_rejects_contexts(self):
        with pytest.raises(ContextsForbiddenError):
            build_user_message(
                StrategyConfig(StrategyKind.BASELINE), "Who?", (ContextPassage(text="x"),)
            )

    def test_contextful_strategies_require_contexts(self):
        with pytest.raises(ContextsRequiredError):
            build_user_message(StrategyConfig(StrategyKind.RAG), "Who?")

    def test_missing_contexts_allowed_with_flag_and_warns(self, caplog):
        with caplog.at_level("WARNING", logger="squarebench.prompts"):
            text = build_user_message(
                StrategyConfig(StrategyKind.RAG), "Who?", allow_missing_contexts=True
            )
        assert text == "Question: Who?"
        assert any("no contexts" in r.getMessage() for r in caplog.records)

    def test_numbered_blocks_then_question(self):
        contexts = (ContextPassage(text="Alpha."), ContextPassage(text="Beta."))
        text = build_user_message(square(), "Who?", contexts)
        assert text == "Context 1: Alpha.\n\nContext 2: Beta.\n\nQuestion: Who?"


class TestAssemblePrompt:
    def test_matches_hand_assembled_golden_prompt(self, data_dir):
        golden = load_fixture_json("golden_prompt_square_n3_fs2.json")
        raw = golden["record"]
        record = QueryRecord(
            id=raw["id"],
            question=raw["question"],
            gold=GoldLabel.alias_list(raw["answers"]),
            contexts=tuple(ContextPassage(**c) for c in raw["contexts"]),
        )
        prompt = assemble_prompt(square(n=3), record)
        assert prompt.as_payload() == golden["messages"]

    def test_message_count_tracks_fewshot_k(self):
        record = make_record()
        assert len(assemble_prompt(square(k=2), record).messages) == 6
        assert len(assemble_prompt(square(k=0), record).messages) == 2
        assert len(assemble_prompt(StrategyConfig(StrategyKind.BASELINE), record).messages) == 6

    def test_fewshot_turns_are_question_only(self):
        prompt = assemble_prompt(square(), make_record())
        assert prompt.messages[1].content.startswith("Question: ")
        assert "Context" not in prompt.messages[1].content
        assert prompt.messages[2].role == "assistant"

    def test_baseline_drops_record_contexts(self):
        prompt = assemble_prompt(StrategyConfig(StrategyKind.BASELINE), make_record())
        assert prompt.messages[-1].content == (
            "Question: Which country hosts the headquarters of the European Space Agency?"
        )

    def test_contextless_record_warns_but_assembles(self, caplog):
        record = make_record(contexts=())
        with caplog.at_level("WARNING", logger="squarebench.prompts"):
            prompt = assemble_prompt(square(), record)
        assert prompt.messages[-1].content.startswith("Question: ")

    def test_contexts_appear_in_rank_order(self):
        record = make_record(
            contexts=(
                ContextPassage(text="worse", score=0.1),
                ContextPassage(text="better", score=0.9),
            )
        )
        final = assemble_prompt(square(), record).messages[-1].content
        assert final.index("Context 1: better") < final.index("Context 2: worse")
