"""Command-line entry points.

Each subcommand is a thin wrapper over the library: train, predict,
explain, identify, moderate, run (full pipeline), compare (ranking
overlap), and annotate-serve (the human-annotation HTTP service).
Exit codes: 0 success, 1 validation error, 2 runtime error. Diagnostics go
to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import classifier as clf
from . import explainer as xpl
from . import identifier as idf
from . import moderator as mod
from . import pipeline as pl
from .annotation_service import AnnotationService, load_word_list, make_server
from .corpus import load_corpus, save_corpus
from .lexical import load_embeddings, load_hypernyms


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unaware")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the reference classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model JSON output path")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--class-weighting", choices=clf.WEIGHTING_SCHEMES, default="none")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="write per-document class probabilities")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="predictions JSONL (stdout when omitted)")

    p = sub.add_parser("explain", help="rank globally important words for a class")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--target-class", required=True)
    p.add_argument("--method", choices=("linear-exact", "occlusion"), default="linear-exact")
    p.add_argument("--top-k", type=int)
    p.add_argument("--top-fraction", type=float)
    p.add_argument("--out", required=True, help="ranking CSV output path")
    p.add_argument("--render-doc", help="also render this document's attribution")
    p.add_argument("--render-format", choices=("ansi", "html"), default="ansi")

    p = sub.add_parser("identify", help="annotate words against protected categories")
    p.add_argument("--words", required=True, help="word list, one per line")
    p.add_argument("--backend", choices=("dictionary", "llm"), default="dictionary")
    p.add_argument("--dictionary", help="dictionary TSV (bundled lexicon when omitted)")
    p.add_argument("--endpoint", help="LLM chat endpoint URL (or $UNAWARE_LLM_ENDPOINT)")
    p.add_argument("--model", default="gpt-3.5-turbo")
    p.add_argument("--temperature", type=float, default=0.3)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--out", help="annotation TSV (stdout when omitted)")

    p = sub.add_parser("moderate", help="rewrite a training corpus with a mitigation strategy")
    p.add_argument("--corpus", required=True)
    p.add_argument("--strategy", choices=mod.STRATEGIES, required=True)
    p.add_argument("--words", help="protected words, one per line")
    p.add_argument("--annotations", help="annotation TSV (alternative to --words)")
    p.add_argument("--categories", help="comma-separated category scope for --annotations")
    p.add_argument("--class-scope")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drop-originals", action="store_true", help="MS4: do not keep source sentences")
    p.add_argument("--embeddings", help="embedding text file (MS3/MS4)")
    p.add_argument("--hypernyms", help="hypernym TSV (MS5)")
    p.add_argument("--out", required=True, help="mitigated corpus JSONL")
    p.add_argument("--delta-out", help="delta JSON path (default: <out>.delta.json)")

    p = sub.add_parser("run", help="full measure-moderate-retrain-report pipeline")
    p.add_argument("--config", required=True, help="pipeline config JSON")

    p = sub.add_parser("compare", help="overlap between two ranking CSVs or word lists")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--top", type=int, help="compare only the first N entries")

    p = sub.add_parser("annotate-serve", help="run the human-annotation HTTP service")
    p.add_argument("--words", required=True, help="word list, one per line")
    p.add_argument("--traps", help="trap TSV (bundled fixture when omitted)")
    p.add_argument("--votes", required=True, help="append-only votes JSONL store")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--trap-every", type=int, default=5, help="one trap after every N words (0 disables)")
    p.add_argument("--target-votes", type=int, default=5)
    p.add_argument("--static-dir", help="directory of UI assets to serve")
    p.add_argument("--source", action="append", default=[], metavar="NAME=TSV",
                   help="preload an annotation source for kappa comparison (repeatable)")

    return parser


def _cmd_train(args) -> int:
    config = clf.TrainConfig(
        epochs=args.epochs, learning_rate=args.learning_rate, l2=args.l2,
        class_weighting=args.class_weighting, seed=args.seed, batch_size=args.batch_size,
    )
    corpus = load_corpus(args.corpus)
    model = clf.train(corpus, config)
    clf.save_model(model, args.out)
    print(f"trained on {len(corpus)} documents, classes {list(model.classes)}", file=sys.stderr)
    return 0


def _cmd_predict(args) -> int:
    model = clf.load_model(args.model)
    corpus = load_corpus(args.corpus)
    lines = [
        json.dumps({"id": doc.id, "probabilities": clf.predict(model, doc)})
        for doc in corpus
    ]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_explain(args) -> int:
    model = clf.load_model(args.model)
    corpus = load_corpus(args.corpus)
    if args.method == "linear-exact":
        records = [xpl.attribute_linear(model, d, args.target_class) for d in corpus]
    else:
        fn = clf.as_predict_fn(model)
        records = [xpl.attribute_occlusion(fn, d, args.target_class) for d in corpus]
    scores = xpl.aggregate_global(records)
    config = xpl.ExplainerConfig(method=args.method, top_k=args.top_k, top_fraction=args.top_fraction)
    top = xpl.select_top(scores, config)
    xpl.write_ranking_csv(scores, args.out)
    print(f"ranked {len(scores)} words; top {len(top)} selected", file=sys.stderr)
    if args.render_doc:
        match = [r for r in records if r.document_id == args.render_doc]
        if not match:
            raise ValueError(f"no document with id {args.render_doc!r}")
        sys.stdout.write(xpl.render_attributions(match[0], format=args.render_format) + "\n")
    return 0


def _cmd_identify(args) -> int:
    words = load_word_list(args.words)
    if args.backend == "dictionary":
        dictionary = idf.load_dictionary(args.dictionary)
        annotations = idf.identify_dictionary(words, dictionary)
    else:
        import os

        endpoint = args.endpoint or os.environ.get(idf.ENDPOINT_ENV)
        if not endpoint:
            raise ValueError(f"llm backend needs --endpoint or ${idf.ENDPOINT_ENV}")
        config = idf.LlmConfig(
            endpoint=endpoint, model=args.model, temperature=args.temperature,
            max_retries=args.retries, timeout=args.timeout,
            concurrency=args.concurrency, batch_size=args.batch_size,
        )
        annotations = idf.identify_llm(words, config)
        failures = [a for a in annotations if idf.annotation_failed(a)]
        if failures and len(failures) == len(annotations):
            raise RuntimeError(f"all {len(failures)} annotation requests failed; endpoint unreachable?")
        for a in failures:
            print(f"warning: annotation failed for {a.word!r}", file=sys.stderr)
    if args.out:
        idf.save_annotations_tsv(annotations, args.out)
    else:
        for a in annotations:
            category = a.category.value if a.category else "none"
            sys.stdout.write(f"{a.word}\t{category}\t{a.reliability}\t{a.source}\n")
    protected = sum(1 for a in annotations if a.is_protected and not idf.annotation_failed(a))
    print(f"{protected}/{len(annotations)} words annotated as protected", file=sys.stderr)
    return 0


def _cmd_moderate(args) -> int:
    corpus = load_corpus(args.corpus)
    if bool(args.words) == bool(args.annotations):
        raise ValueError("provide exactly one of --words or --annotations")
    if args.words:
        protected = load_word_list(args.words)
    else:
        annotations = idf.load_annotations_tsv(args.annotations)
        scope = None
        if args.categories:
            scope = frozenset(idf.parse_category(c) for c in args.categories.split(","))
        protected = mod.scope_words(annotations, scope)
    if not protected:
        raise ValueError("no protected words to mitigate")
    plan = mod.MitigationPlan(
        strategy=args.strategy, protected_words=tuple(protected),
        class_scope=args.class_scope, k=args.k, seed=args.seed,
        keep_original=not args.drop_originals,
    )
    embeddings = load_embeddings(args.embeddings) if args.embeddings else None
    lexicon = load_hypernyms(args.hypernyms) if args.hypernyms else None
    mitigated, delta = mod.apply_plan(corpus, plan, embeddings=embeddings, lexicon=lexicon)
    save_corpus(mitigated, args.out)
    delta_path = args.delta_out or f"{args.out}.delta.json"
    with open(delta_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "strategy": delta.strategy,
                "documents_removed": delta.documents_removed,
                "documents_added": delta.documents_added,
                "tokens_removed": delta.tokens_removed,
                "tokens_replaced": delta.tokens_replaced,
            },
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    print(
        f"{plan.strategy}: {len(corpus)} -> {len(mitigated)} documents "
        f"(-{delta.documents_removed}/+{delta.documents_added} docs, "
        f"-{delta.tokens_removed}/~{delta.tokens_replaced} tokens)",
        file=sys.stderr,
    )
    return 0


def _cmd_run(args) -> int:
    config = pl.load_pipeline_config(args.config)
    report = pl.run_mitigation(config)
    sys.stdout.write(pl.render_report_table(report))
    if config.output_dir:
        print(f"artifacts written to {config.output_dir}", file=sys.stderr)
    return 0


def _read_words_or_ranking(path: str, top: int | None) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first == "word,total,frequency,score":
        words = [g.word for g in xpl.read_ranking_csv(path)]
    else:
        words = load_word_list(path)
    return words[:top] if top else words


def _cmd_compare(args) -> int:
    words_a = _read_words_or_ranking(args.a, args.top)
    words_b = _read_words_or_ranking(args.b, args.top)
    count, fraction = pl.compare_rankings(words_a, words_b)
    sys.stdout.write(json.dumps({"count": count, "fraction": fraction}) + "\n")
    return 0


def _cmd_annotate_serve(args) -> int:
    words = load_word_list(args.words)
    traps = idf.load_trap_words(args.traps)
    service = AnnotationService(
        words=words, traps=traps, votes_path=args.votes,
        trap_every=args.trap_every, target_votes=args.target_votes,
        static_dir=args.static_dir,
    )
    for spec in args.source:
        if "=" not in spec:
            raise ValueError(f"--source expects NAME=TSV, got {spec!r}")
        name, path = spec.split("=", 1)
        annotations = idf.load_annotations_tsv(path)
        service.add_source(name, {a.word: (a.category.value if a.category else None) for a in annotations})
    server = make_server(service, host=args.host, port=args.port)
    bound_host, bound_port = server.server_address[:2]
    print(f"annotation service on http://{bound_host}:{bound_port}/ "
          f"({len(words)} words, {len(traps)} traps)", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.close()
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "predict": _cmd_predict,
    "explain": _cmd_explain,
    "identify": _cmd_identify,
    "moderate": _cmd_moderate,
    "run": _cmd_run,
    "compare": _cmd_compare,
    "annotate-serve": _cmd_annotate_serve,
}


def dispatch(argv: list[str] | None = None) -> int:
    """Parse arguments and run a subcommand, mapping failures to exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary between library and shell
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
