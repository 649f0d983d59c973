"""Standalone export tool.

    embed-export --mode word_vectors --input vectors.txt --out store.embs
    embed-export --mode document_vectors --corpus corpus.jsonl \
        --encoder hash:64 --out docs.embs
"""

from __future__ import annotations

import argparse
import sys

from . import DOCUMENT_VECTORS, WORD_VECTORS, ExportManifest, run_export
from .store import ExportError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Produce binary embedding-store files for the retrieval engine",
    )
    parser.add_argument(
        "--mode", required=True, choices=[WORD_VECTORS, DOCUMENT_VECTORS]
    )
    parser.add_argument("--input", help="word-vector text file (word_vectors mode)")
    parser.add_argument("--corpus", help="corpus JSONL (document_vectors mode)")
    parser.add_argument("--out", required=True, help="output store path")
    parser.add_argument(
        "--encoder",
        default="hash:64",
        help="document encoder id: hash:<dim> or st:<model-name>",
    )
    parser.add_argument("--dim", type=int, default=0, help="expected dimension (0 = infer)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.mode == WORD_VECTORS and not args.input:
        print("error: --input is required in word_vectors mode", file=sys.stderr)
        return 1
    if args.mode == DOCUMENT_VECTORS and not args.corpus:
        print("error: --corpus is required in document_vectors mode", file=sys.stderr)
        return 1
    manifest = ExportManifest(
        input_path=args.input or args.corpus,
        output_path=args.out,
        mode=args.mode,
        encoder=args.encoder,
        corpus_path=args.corpus,
        dim=args.dim,
    )
    try:
        count = run_export(manifest)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} vectors to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
