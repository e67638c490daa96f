"""Command-line interface and main orchestration."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .citations import Citation, extract_citations, render_citations
from .config import DEFAULT_SEED, STATUTE_DIR
from .errors import DataError, SemiQAError
from .evaluation import dump_for_annotation, format_report_table
from .finqa import ingest_finqa, load_corpus, save_corpus
from .pipeline import (
    RunInputs,
    Task,
    backend_error_exit,
    cmd_eval,
    cmd_run,
    load_run_config,
    sample_ids,
    write_ids,
)
from .program import compare_programs, eval_program, format_value, parse_program
from .prompting import PromptMode
from .retrieval import RetrievalStrategy, retrieve
from .sara import import_sara
from .statute import SectionPath, load_statute_corpus, render_statute, statute_records
from .utils import read_jsonl, write_jsonl


def _print_summary(label: str, report):
    print(format_report_table([(label, report)]))


def do_import_sara(args):
    statutes, cases = import_sara(args.raw_dir, args.out)
    print(f"Imported {statutes} statutes and {cases} cases into {args.out}")


def do_import_finqa(args):
    pairs = ingest_finqa(args.path)
    count = save_corpus(args.out, pairs)
    print(f"Wrote {count} questions to {args.out}")


def do_parse_statutes(args):
    corpus = load_statute_corpus(args.statute_dir)
    if args.out:
        count = write_jsonl(
            args.out, (r for statute in corpus.values() for r in statute_records(statute))
        )
        print(f"Wrote {count} sentences from {len(corpus)} sections to {args.out}")
        return
    for number, statute in corpus.items():
        if args.render:
            print(render_statute(statute))
            continue
        print(f"  s{number}: {len(statute.sentences)} sentences, {len(statute.paths)} paths")


def do_retrieve(args):
    corpus = load_statute_corpus(args.statutes)
    if args.path:
        path = SectionPath.parse(args.path)
        citations = [Citation(path, (0, len(args.path)))]
    else:
        question = args.question
        if Path(question).is_file():
            question = Path(question).read_text(encoding="utf-8")
        citations = extract_citations(question)
    context = retrieve(corpus, citations, args.strategy)

    if args.explain:
        print(f"Citations: {render_citations(citations) or '(none)'}", file=sys.stderr)
        for path, tag in context.provenance:
            print(f"  {str(path):<24} {tag}", file=sys.stderr)
        print(
            f"{len(context.sentences)} sentences, {context.char_count} chars, "
            f"~{context.approx_tokens} tokens",
            file=sys.stderr,
        )
    if args.format == "jsonl":
        for s in context.sentences:
            record = {
                "section": s.assigned_path.section_number,
                "path": str(s.assigned_path),
                "ordinal": s.ordinal,
                "text": s.text,
            }
            print(json.dumps(record, ensure_ascii=False))
    else:
        print(context.text)


def do_build_prompt(args):
    config = load_run_config(args.config)
    overrides = {}
    if args.task and Task(args.task) != config.task:
        raise DataError(f"{args.config} is a {config.task} config, not {args.task}")
    if args.mode:
        overrides["mode"] = PromptMode(args.mode)
    if overrides:
        config = replace(config, **overrides)
    prompt = RunInputs.load(config).build(args.case)
    print(prompt.text)
    print(
        f"~{prompt.approx_tokens} tokens, {len(prompt.exemplar_ids)} exemplars",
        file=sys.stderr,
    )


def _corpus_ids(path: Path) -> list[str]:
    if path.suffix == ".json":
        return [q.report_id for _, q in load_corpus(path)]
    try:
        return [str(record["id"]) for _, record in read_jsonl(path)]
    except (KeyError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: cannot read case ids ({e})") from e


def do_sample(args):
    ids = sample_ids(_corpus_ids(args.cases), args.number, args.seed)
    write_ids(args.out, ids)
    print(f"Sampled {len(ids)} case ids (seed {args.seed}) to {args.out}")


def do_run(args):
    config = load_run_config(args.config)
    result = cmd_run(config, quiet=args.quiet)
    print(f"\nRun directory: {result.run_dir}")
    print(f"Backend calls: {result.backend_calls}")
    if result.backend_failures:
        print(
            f"{result.backend_failures} case(s) failed on the backend; rerun to retry them",
            file=sys.stderr,
        )
    print()
    _print_summary(config.output_dir.name, result.report)
    return backend_error_exit(result)


def _run_labels(run_dirs: list[Path]) -> list[str]:
    """Directory names, or full paths when two runs share a name."""
    names = [Path(d).name for d in run_dirs]
    if len(set(names)) == len(names):
        return names
    return [str(d) for d in run_dirs]


def do_eval(args):
    reports = [(label, cmd_eval(d)) for label, d in zip(_run_labels(args.run_dirs), args.run_dirs)]
    if args.format == "table":
        print(format_report_table(reports))
    elif len(reports) == 1:
        print(json.dumps(reports[0][1].summary(), indent=2, sort_keys=True))
    else:
        summaries = [
            {"run_dir": str(d), **report.summary()} for d, (_, report) in zip(args.run_dirs, reports)
        ]
        print(json.dumps(summaries, indent=2, sort_keys=True))


def do_eval_program(args):
    report = None
    if args.corpus:
        if not args.case:
            raise DataError("--corpus needs --case")
        pairs = {q.report_id: (r, q) for r, q in load_corpus(args.corpus)}
        if args.case not in pairs:
            raise DataError(f"case {args.case!r} is not in {args.corpus}")
        report, question = pairs[args.case]
        if args.gold is None:
            args.gold = question.gold_program

    program = parse_program(args.program)
    print(f"Program: {program}")
    print(f"Value:   {format_value(eval_program(program, report))}")
    if args.gold is not None:
        equal, reason = compare_programs(program, args.gold, report)
        print(f"Gold:    {args.gold}")
        print(f"Equivalent: {'yes' if equal else 'no'}" + (f" ({reason})" if reason else ""))
        return 0 if equal else 1


def do_dump_annotations(args):
    report = cmd_eval(args.run_dir)
    out = args.out or Path(args.run_dir) / "annotations.csv"
    count = dump_for_annotation(report, out)
    print(f"Wrote {count} case(s) for annotation to {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Retrieval-augmented QA over statutes (SARA) and financial reports (FinQA)"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="No progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import-sara", help="Normalize a raw SARA directory")
    p.add_argument("raw_dir", type=Path, help="Directory with statutes/ and cases/")
    p.add_argument("--out", type=Path, required=True, help="Output directory")
    p.set_defaults(func=do_import_sara)

    p = sub.add_parser("import-finqa", help="Convert a FinQA JSON file to the corpus format")
    p.add_argument("path", type=Path, help="FinQA train/dev/test .json file")
    p.add_argument("--out", type=Path, required=True, help="Output corpus (.jsonl)")
    p.set_defaults(func=do_import_finqa)

    p = sub.add_parser("parse-statutes", help="Parse statute files and show their structure")
    p.add_argument("statute_dir", type=Path, nargs="?", default=STATUTE_DIR)
    p.add_argument("--out", type=Path, help="Write sentence records as JSON Lines")
    p.add_argument("--render", action="store_true", help="Print the parsed outline")
    p.set_defaults(func=do_parse_statutes)

    p = sub.add_parser("retrieve", help="Retrieve statute context for a path or question")
    p.add_argument("--statutes", type=Path, default=STATUTE_DIR, help="Statute directory")
    p.add_argument(
        "--strategy",
        choices=[s.value for s in RetrievalStrategy],
        default=RetrievalStrategy.REFERENCES.value,
    )
    query = p.add_mutually_exclusive_group(required=True)
    query.add_argument("--path", help='Section path, e.g. "s7703(a)(1)"')
    query.add_argument(
        "--question", help="Question text, or a file holding it, whose citations seed retrieval"
    )
    p.add_argument("--explain", action="store_true", help="Show citations and provenance")
    p.add_argument("--format", choices=["text", "jsonl"], default="text")
    p.set_defaults(func=do_retrieve)

    p = sub.add_parser("build-prompt", help="Print the prompt for one case")
    p.add_argument("--config", type=Path, required=True, help="Run config (.ini)")
    p.add_argument("--case", required=True, help="Case id")
    p.add_argument("--task", choices=[t.value for t in Task])
    p.add_argument("--mode", choices=[m.value for m in PromptMode])
    p.set_defaults(func=do_build_prompt)

    p = sub.add_parser("sample", help="Sample case ids reproducibly")
    p.add_argument("cases", type=Path, help="Cases or corpus file (.jsonl, or FinQA .json)")
    p.add_argument("-n", "--number", type=int, required=True, help="Sample size")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", type=Path, required=True, help="Ids file to write")
    p.set_defaults(func=do_sample)

    p = sub.add_parser("run", help="Run a configured experiment")
    p.add_argument("--config", type=Path, required=True, help="Run config (.ini)")
    p.set_defaults(func=do_run)

    p = sub.add_parser("eval", help="Re-score run directories, side by side")
    p.add_argument("run_dirs", type=Path, nargs="+", metavar="run_dir")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(func=do_eval)

    p = sub.add_parser("eval-program", help="Evaluate a FinQA program")
    p.add_argument("--program", required=True, help='e.g. "subtract(100, 60), divide(#0, 60)"')
    p.add_argument("--gold", help="Gold program to compare against")
    p.add_argument("--corpus", type=Path, help="Corpus holding the report table")
    p.add_argument("--case", help="Case id within --corpus")
    p.set_defaults(func=do_eval_program)

    p = sub.add_parser("dump-annotations", help="Write failed cases to CSV for error analysis")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--out", type=Path, help="CSV path (default: <run_dir>/annotations.csv)")
    p.set_defaults(func=do_dump_annotations)
    return parser


def main(argv: list[str] | None = None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        code = args.func(args)
    except SemiQAError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    if code:
        sys.exit(code)


if __name__ == "__main__":
    main()
