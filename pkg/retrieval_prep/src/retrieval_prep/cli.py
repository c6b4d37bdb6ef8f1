"""Command-line interface: build a passage index, export contexts.

    retrieval-prep build-index --corpus passages.jsonl --embedder hash-256 --out idx/
    retrieval-prep export --dataset questions.jsonl --index idx/ --k 5 --out eval.jsonl
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .corpus import load_corpus
from .embedders import make_embedder
from .errors import RetrievalPrepError
from .export import export_contexts, load_questions
from .index import build_index, load_index, save_index


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retrieval-prep",
        description="Build dense passage indexes and export retrieved contexts "
        "as QA evaluation datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build-index", help="embed a corpus and save the index")
    build.add_argument("--corpus", type=Path, required=True,
                       help="JSONL corpus file (source_id, optional title, text)")
    build.add_argument("--embedder", default="hash-256",
                       help="embedder name: hash-{dim} or a sentence-transformers "
                       "model id (default: hash-256)")
    build.add_argument("--out", type=Path, required=True,
                       help="directory to write the index into")

    export = sub.add_parser("export", help="attach top-k contexts to questions")
    export.add_argument("--dataset", type=Path, required=True,
                        help="JSONL question file (id, question, answers/aspects)")
    export.add_argument("--index", type=Path, required=True,
                        help="index directory written by build-index")
    export.add_argument("--k", type=int, default=5,
                        help="contexts to attach per question (default: 5)")
    export.add_argument("--out", type=Path, required=True,
                        help="JSONL evaluation file to write")
    return parser


def _cmd_build_index(args: argparse.Namespace) -> int:
    passages = load_corpus(args.corpus)
    embedder = make_embedder(args.embedder)
    index = build_index(passages, embedder)
    save_index(index, args.out)
    print(
        f"indexed {len(index.passages)} passages "
        f"(dim {index.dim}, embedder {index.embedder_name}) -> {args.out}"
    )
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    if args.k < 1:
        print(f"error: --k must be >= 1, got {args.k}", file=sys.stderr)
        return 2
    index = load_index(args.index)
    embedder = make_embedder(index.embedder_name)
    questions = load_questions(args.dataset)
    count = export_contexts(questions, index, embedder, args.k, args.out)
    print(f"wrote {count} records with top-{args.k} contexts -> {args.out}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "build-index":
            return _cmd_build_index(args)
        return _cmd_export(args)
    except (RetrievalPrepError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
