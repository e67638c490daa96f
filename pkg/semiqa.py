#!/usr/bin/env python3
# /// script
# requires-python = ">=3.12"
# dependencies = [
#     "backoff>=2.2.1",
#     "httpx>=0.27.0",
#     "tqdm>=4.66.0",
#     "windpyutils>=2.0.0",
# ]
# ///
"""
semiqa - Retrieval-augmented QA over statutes and financial reports.

Parses hierarchical statute text, pulls the cited subsections (or the relevant
report facts), builds zero-shot / few-shot / chain-of-thought prompts for a
completion model and scores the answers.

Usage:
    uv run semiqa.py parse-statutes data/statutes
    uv run semiqa.py retrieve --statutes data/statutes --path "s7703(a)(1)"
    uv run semiqa.py import-finqa test.json --out corpus.jsonl
    uv run semiqa.py sample corpus.jsonl -n 200 --seed 13 --out ids.txt
    uv run semiqa.py run --config configs/sara-mock.ini
    uv run semiqa.py eval runs/sara-mock --format table
    uv run semiqa.py eval-program --program "subtract(100, 60), divide(#0, 60)"
"""

from src.cli import main

if __name__ == "__main__":
    main()
