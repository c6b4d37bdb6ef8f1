"""Acceptance gate for the retrieval-prep package.

Criterion: on a 1000-passage synthetic corpus with 100 queries at k=5,
`retrieve_top_k` must match a brute-force inner-product ranking, and the
exported JSONL must load through the evaluation harness's dataset reader
with zero validation errors — 100 records, 5 contexts each, scores
non-increasing.  Budget: under 60 seconds.

The oracle has two independent parts.  Score values are recomputed per row
with `np.dot` and compared under a tight float tolerance.  The ranking is
recomputed by brute force — score every passage, sort the full list by
(-score, index), slice the first k — and compared exactly.  The ranking
oracle ranks the same inner products the index computes rather than the
per-row recomputation: matrix-vector and per-row dot products legitimately
differ in the last ulp, and on structurally tied hash vectors that noise,
not the tie-break rule, would decide the order.
"""

import logging
import random
import time

import numpy as np

from retrieval_prep.corpus import CorpusPassage
from retrieval_prep.embedders import HashingEmbedder
from retrieval_prep.export import QuestionRecord, export_contexts
from retrieval_prep.index import build_index, retrieve_top_k

from squarebench.dataset import GoldKind, load_dataset

VOCAB = [
    "ocean", "river", "mountain", "forest", "desert", "valley", "glacier",
    "meadow", "canyon", "island", "harbor", "plateau", "tundra", "reef",
    "lagoon", "summit", "basin", "delta", "cliff", "grove", "marsh", "dune",
    "fjord", "prairie", "ridge", "cavern", "spring", "strait", "mesa",
    "atoll", "bay", "bluff", "bog", "brook", "butte", "cape", "cove",
    "crag", "creek", "gulch",
]

N_PASSAGES = 1000
N_QUERIES = 100
TOP_K = 5
SEED = 20260816


def synthetic_corpus(rng: random.Random) -> list[CorpusPassage]:
    passages = []
    for i in range(N_PASSAGES):
        text = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(5, 12)))
        title = f"Entry {i}" if rng.random() < 0.3 else None
        passages.append(CorpusPassage(source_id=f"doc-{i:04d}", text=text, title=title))
    return passages


def oracle_top_k(index, query_vector: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Brute-force ranking reference: score every passage, sort the full
    list by (-score, index), take the first k."""
    scores = index.vectors @ query_vector
    scored = sorted(
        ((float(scores[i]), i) for i in range(len(index.passages))),
        key=lambda pair: (-pair[0], pair[1]),
    )
    return [(index.passages[i].source_id, score) for score, i in scored[:k]]


def independent_scores(index, query_vector: np.ndarray) -> list[float]:
    """Per-row np.dot recomputation of every passage score."""
    return [
        float(np.dot(index.vectors[i], query_vector))
        for i in range(len(index.passages))
    ]


def test_retrieval_matches_oracle_and_exports_load(tmp_path, caplog):
    start = time.perf_counter()
    rng = random.Random(SEED)

    passages = synthetic_corpus(rng)
    embedder = HashingEmbedder(dim=128)
    index = build_index(passages, embedder)

    queries = [
        " ".join(rng.choice(VOCAB) for _ in range(rng.randint(3, 6)))
        for _ in range(N_QUERIES)
    ]

    oracle_ids_per_query = []
    for query in queries:
        query_vector = embedder.encode([query])[0]
        expected = oracle_top_k(index, query_vector, TOP_K)
        got = retrieve_top_k(index, query, embedder, TOP_K)
        assert [(p.source_id, s) for p, s in got] == expected

        recomputed = independent_scores(index, query_vector)
        by_id = {p.source_id: i for i, p in enumerate(index.passages)}
        for passage, score in got:
            assert abs(score - recomputed[by_id[passage.source_id]]) < 1e-12
        oracle_ids_per_query.append([sid for sid, _ in expected])

    records = [
        QuestionRecord(id=f"q-{i:03d}", question=query, answers=(rng.choice(VOCAB),))
        for i, query in enumerate(queries)
    ]
    out_path = tmp_path / "retrieved.jsonl"
    written = export_contexts(records, index, embedder, TOP_K, out_path)
    assert written == N_QUERIES

    with caplog.at_level(logging.WARNING, logger="squarebench.dataset"):
        loaded = load_dataset(out_path, GoldKind.ALIAS_LIST)
    assert caplog.records == []

    assert len(loaded) == N_QUERIES
    for record, oracle_ids in zip(loaded, oracle_ids_per_query):
        assert len(record.contexts) == TOP_K
        scores = [c.score for c in record.contexts]
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert [c.source_id for c in record.contexts] == oracle_ids

    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(f"PASS retrieval oracle + export roundtrip ({elapsed:.2f}s < 60s)")
