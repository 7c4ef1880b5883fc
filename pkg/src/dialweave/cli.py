"""Command-line interface.

Exit codes: 0 success, 1 validation or usage problems, 2 I/O failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backend import MockBackend, RemoteBackend
from .corpus import (
    anonymize_corpus,
    compute_stats,
    load_corpus,
    render_stats,
    save_corpus,
    split_corpus,
)
from .document import build_state_change_examples
from .errors import DialweaveError, ParameterError
from .metrics import evaluate_corpus, inter_annotator_agreement, load_predictions
from .ontology import builtin_ontology, load_ontology_file
from .scenario import sample_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _ontology_arg(path: str | None):
    return load_ontology_file(path) if path else builtin_ontology()


def _cmd_evaluate(args) -> int:
    gold = load_corpus(args.gold)
    predictions = load_predictions(Path(args.pred).read_text("utf-8"))
    ontology = _ontology_arg(args.ontology)
    report = evaluate_corpus(gold.documents, predictions, ontology=ontology)
    sys.stdout.write(report.render_table())
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def _cmd_iaa(args) -> int:
    corpus = load_corpus(args.corpus)
    ontology = _ontology_arg(args.ontology)
    result = inter_annotator_agreement(corpus.documents, seed=args.seed, ontology=ontology)
    sys.stdout.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_stats(args) -> int:
    corpus = load_corpus(args.corpus)
    sys.stdout.write(render_stats(compute_stats(corpus)))
    return EXIT_OK


def _parse_ratios(text: str) -> list[float]:
    try:
        ratios = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise ParameterError(f"ratios must be comma-separated numbers, got {text!r}") from exc
    if len(ratios) < 2:
        raise ParameterError("need at least two ratios")
    return ratios


def _cmd_split(args) -> int:
    corpus = load_corpus(args.corpus)
    parts = split_corpus(
        corpus, _parse_ratios(args.ratios), strategy=args.strategy, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in parts:
        save_corpus(part, out / f"{name}.json")
        sys.stdout.write(f"{name}: {len(part.documents)} dialogues -> {out / (name + '.json')}\n")
    return EXIT_OK


def _cmd_anonymize(args) -> int:
    corpus = load_corpus(args.corpus)
    save_corpus(anonymize_corpus(corpus, seed=args.seed), args.out)
    sys.stdout.write(f"anonymized {len(corpus.documents)} dialogues -> {args.out}\n")
    return EXIT_OK


def _cmd_sample_scenario(args) -> int:
    ontology = _ontology_arg(args.ontology)
    spec = sample_scenario(ontology, seed=args.seed, count=args.count)
    sys.stdout.write(json.dumps(spec.as_dict(), indent=2, ensure_ascii=False) + "\n")
    return EXIT_OK


def _cmd_build_sc_examples(args) -> int:
    corpus = load_corpus(args.corpus)
    n = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            for record in build_state_change_examples(doc, k=args.k, include_same=not args.skip_same):
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
                n += 1
    sys.stdout.write(f"wrote {n} examples -> {args.out}\n")
    return EXIT_OK


def make_backend(spec: str):
    kind, sep, rest = spec.partition(":")
    if kind == "mock" and sep:
        return MockBackend.from_file(rest)
    if kind == "remote" and sep:
        return RemoteBackend(rest)
    raise ParameterError(
        f"backend must look like mock:SCRIPT.json or remote:http://host, got {spec!r}"
    )


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        store_dir=args.store,
        backend=make_backend(args.backend),
        ontology=_ontology_arg(args.ontology),
        corpus_dir=args.corpus_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialweave",
        description="Dialogue collection with live belief-state tracking, plus scoring tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score predictions against an annotated corpus")
    p.add_argument("--gold", required=True, help="annotated corpus JSON")
    p.add_argument("--pred", required=True, help="predictions JSON")
    p.add_argument("--report", help="also write the full report JSON here")
    p.add_argument("--ontology", help="ontology JSON (default: bundled)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("iaa", help="agreement between annotators of the same dialogues")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--ontology")
    p.set_defaults(func=_cmd_iaa)

    p = sub.add_parser("stats", help="descriptive corpus statistics")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("split", help="partition a corpus into parts")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ratios", required=True, help="e.g. 80,10,10")
    p.add_argument("--strategy", default="random", choices=("random", "by_slot_count"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="directory for the part files")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("anonymize", help="swap speaker names, preserving span offsets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_anonymize)

    p = sub.add_parser("sample-scenario", help="draw a reproducible generation scenario")
    p.add_argument("--ontology")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=3)
    p.set_defaults(func=_cmd_sample_scenario)

    p = sub.add_parser("build-sc-examples", help="emit state-change training records")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=18, help="history window in turns")
    p.add_argument("--out", required=True, help="JSONL output path")
    p.add_argument("--skip-same", action="store_true", help="omit no-op commands")
    p.set_defaults(func=_cmd_build_sc_examples)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--store", required=True, help="session store directory")
    p.add_argument("--backend", required=True, help="mock:SCRIPT.json or remote:URL")
    p.add_argument("--ontology")
    p.add_argument("--corpus-dir", help="directory of corpus JSON files for /corpora routes")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DialweaveError as exc:
        sys.stderr.write(f"error: {exc}\n")
        for v in getattr(exc, "violations", None) or []:
            sys.stderr.write(f"  - {v}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
