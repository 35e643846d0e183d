"""End-to-end measurement and mitigation runs.

A run takes a labeled training corpus, an unlabeled corpus, and a target
class. Measurement trains (or ingests) the classifier, explains its
predictions on the documents it assigns to the target class, ranks the
words globally, annotates the top of the ranking, and summarizes how many
of those words are protected. Mitigation then rewrites the training corpus
with the configured strategy, retrains with the identical seed, repeats the
measurement, and reports before/after fairness and performance next to the
corpus delta and per-stage wall-clock timings.

Wall-clock timings are reported separately from the main report payload so
that identical configurations produce byte-identical report files.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import classifier as clf
from . import explainer as xpl
from . import identifier as idf
from . import moderator as mod
from .corpus import LabeledCorpus, load_corpus, save_corpus
from .lexical import load_embeddings, load_hypernyms

BACKENDS = ("dictionary", "llm", "tsv")


@dataclass(frozen=True)
class IdentifierSettings:
    """Which annotation backend a run uses and where its inputs live."""

    backend: str = "dictionary"
    dictionary_path: str | None = None
    annotations_path: str | None = None
    llm: idf.LlmConfig | None = None

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.backend == "llm" and self.llm is None:
            raise ValueError("llm backend requires an LlmConfig")
        if self.backend == "tsv" and not self.annotations_path:
            raise ValueError("tsv backend requires annotations_path")


@dataclass(frozen=True)
class PlanTemplate:
    """A mitigation plan minus the protected words, which measurement supplies."""

    strategy: str = "MS2"
    category_scope: frozenset[idf.ProtectedCategory] | None = None
    class_scope: str | None = None
    k: int = 5
    seed: int = 0
    keep_original: bool = True

    def with_words(self, words: Sequence[str]) -> mod.MitigationPlan:
        return mod.MitigationPlan(
            strategy=self.strategy,
            protected_words=tuple(words),
            category_scope=self.category_scope,
            class_scope=self.class_scope,
            k=self.k,
            seed=self.seed,
            keep_original=self.keep_original,
        )


@dataclass(frozen=True)
class PipelineConfig:
    training_corpus: str
    unlabeled_corpus: str
    target_class: str
    explainer: xpl.ExplainerConfig
    identifier: IdentifierSettings
    plan: PlanTemplate
    train: clf.TrainConfig = clf.TrainConfig()
    output_dir: str | None = None
    threshold: float = 0.5
    embeddings_path: str | None = None
    hypernyms_path: str | None = None
    external_predictions: str | None = None

    def __post_init__(self) -> None:
        if Path(self.training_corpus) == Path(self.unlabeled_corpus):
            raise ValueError("training and unlabeled corpora must be distinct files")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")


@dataclass(frozen=True)
class FairnessStats:
    """How much of the top ranking is protected."""

    protected_count: int
    top_n: int
    percent: float
    retained_from_original: int

    def __post_init__(self) -> None:
        if self.protected_count > self.top_n:
            raise ValueError("protected_count cannot exceed top_n")
        if self.retained_from_original > self.protected_count:
            raise ValueError("retained_from_original cannot exceed protected_count")
        if self.percent != 100.0 * self.protected_count / self.top_n:
            raise ValueError("percent inconsistent with counts")

    def ratio_text(self, show_retained: bool = False) -> str:
        text = f"{self.protected_count}/{self.top_n}"
        if show_retained:
            text += f" {{{self.retained_from_original}}}"
        return text


@dataclass
class MeasurementResult:
    metrics: clf.Metrics
    fairness: FairnessStats
    top_words: list[str]
    protected_words: list[str]
    annotations: list[idf.Annotation]
    global_scores: list[xpl.GlobalWordScore]
    model: clf.LinearModel | None
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class MitigationReport:
    target_class: str
    strategy: str
    original: MeasurementResult
    mitigated: MeasurementResult
    delta: mod.MitigationDelta
    timings: dict[str, float]

    def __post_init__(self) -> None:
        if self.original.fairness.top_n != self.mitigated.fairness.top_n:
            raise ValueError("original and mitigated fairness must use the same top_n")


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Build a config from a JSON or TOML file (see README for the schema)."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    explainer = xpl.ExplainerConfig(**raw.get("explainer", {"top_k": 100}))
    ident_raw = dict(raw.get("identifier", {"backend": "dictionary"}))
    llm = None
    if "llm" in ident_raw:
        llm = idf.LlmConfig(**ident_raw.pop("llm"))
    identifier = IdentifierSettings(llm=llm, **ident_raw)
    plan_raw = dict(raw.get("plan", {}))
    if plan_raw.get("category_scope"):
        plan_raw["category_scope"] = frozenset(
            idf.parse_category(c) for c in plan_raw["category_scope"]
        )
    else:
        plan_raw.pop("category_scope", None)
    plan = PlanTemplate(**plan_raw)
    train = clf.TrainConfig(**raw.get("train", {}))
    return PipelineConfig(
        training_corpus=raw["training_corpus"],
        unlabeled_corpus=raw["unlabeled_corpus"],
        target_class=raw["target_class"],
        explainer=explainer,
        identifier=identifier,
        plan=plan,
        train=train,
        output_dir=raw.get("output_dir"),
        threshold=raw.get("threshold", 0.5),
        embeddings_path=raw.get("embeddings"),
        hypernyms_path=raw.get("hypernyms"),
        external_predictions=raw.get("external_predictions"),
    )


def make_annotator(settings: IdentifierSettings) -> Callable[[Sequence[str]], list[idf.Annotation]]:
    if settings.backend == "dictionary":
        dictionary = idf.load_dictionary(settings.dictionary_path)
        return lambda words: idf.identify_dictionary(words, dictionary)
    if settings.backend == "llm":
        config = settings.llm
        return lambda words: idf.identify_llm(words, config)
    known = {a.word: a for a in idf.load_annotations_tsv(settings.annotations_path)}

    def from_tsv(words: Sequence[str]) -> list[idf.Annotation]:
        return [
            known.get(w, idf.Annotation(word=w, category=None, reliability=0, source="expert"))
            for w in words
        ]

    return from_tsv


def _target_documents(
    corpus: LabeledCorpus,
    predictions: dict[str, dict[str, float]],
    target_class: str,
    classes: Sequence[str],
    threshold: float,
) -> list:
    selected = []
    for doc in corpus:
        probs = predictions[doc.id]
        if len(classes) == 2:
            hit = probs[classes[1]] >= threshold if target_class == classes[1] else probs[classes[1]] < threshold
        else:
            hit = max(classes, key=lambda c: probs[c]) == target_class
        if hit:
            selected.append(doc)
    return selected


def _fully_labeled(corpus: LabeledCorpus) -> bool:
    return len(corpus) > 0 and all(d.label is not None for d in corpus)


def run_measurement(
    config: PipelineConfig,
    model: clf.LinearModel | None = None,
    training: LabeledCorpus | None = None,
    unlabeled: LabeledCorpus | None = None,
) -> MeasurementResult:
    """Measure one model's reliance on protected attributes.

    Trains the reference classifier unless a model (or external
    predictions) is supplied, predicts the target class over the unlabeled
    corpus, aggregates attributions over the documents predicted as the
    target class, annotates the top-ranked words, and returns metrics plus
    fairness statistics. Raises :class:`ValueError` when no document is
    predicted as the target class.
    """
    timings: dict[str, float] = {}
    training = training if training is not None else load_corpus(config.training_corpus)
    unlabeled = unlabeled if unlabeled is not None else load_corpus(config.unlabeled_corpus)

    external = None
    if model is None and config.external_predictions:
        external, unresolved = clf.load_external_predictions(config.external_predictions, unlabeled)
        if unresolved:
            raise ValueError(f"external predictions reference unknown ids: {unresolved[:5]}")
        classes = sorted({c for probs in external.values() for c in probs})
    elif model is None:
        t0 = time.perf_counter()
        model = clf.train(training, config.train)
        timings["train"] = time.perf_counter() - t0
        classes = list(model.classes)
    else:
        classes = list(model.classes)
    if config.target_class not in classes:
        raise ValueError(f"target class {config.target_class!r} not among classes {classes}")

    t0 = time.perf_counter()
    if external is not None:
        predictions = external
        missing = [d.id for d in unlabeled if d.id not in predictions]
        if missing:
            raise ValueError(f"external predictions missing for ids: {missing[:5]}")
    else:
        predictions = clf.predict_corpus(model, unlabeled)
    targets = _target_documents(unlabeled, predictions, config.target_class, classes, config.threshold)
    metrics_corpus = unlabeled if _fully_labeled(unlabeled) else training
    if external is not None:
        labels = [d.label for d in metrics_corpus]
        probs = [predictions[d.id] for d in metrics_corpus]
        metrics = clf.evaluate_predictions(labels, probs, classes, threshold=config.threshold)
    else:
        metrics = clf.evaluate(model, metrics_corpus, threshold=config.threshold)
    timings["predict"] = timings.get("predict", 0.0) + time.perf_counter() - t0

    if not targets:
        raise ValueError(f"no documents predicted as {config.target_class!r}; nothing to explain")

    t0 = time.perf_counter()
    method = config.explainer.method
    if method == "linear-exact":
        if model is None:
            raise ValueError("linear-exact attribution requires a trained model")
        records = [xpl.attribute_linear(model, d, config.target_class) for d in targets]
    elif method == "occlusion":
        if model is None:
            raise ValueError("occlusion attribution requires a model to query")
        fn = clf.as_predict_fn(model)
        records = [xpl.attribute_occlusion(fn, d, config.target_class) for d in targets]
    else:
        wanted = {d.id for d in targets}
        records = [
            r for r in xpl.load_external_attributions(config.explainer.attributions_path, unlabeled)
            if r.document_id in wanted
        ]
        if not records:
            raise ValueError("no external attribution records for target-predicted documents")
    global_scores = xpl.aggregate_global(records)
    top_words = xpl.select_top(global_scores, config.explainer)
    timings["explain"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    annotate = make_annotator(config.identifier)
    annotations = annotate(top_words)
    timings["identify"] = time.perf_counter() - t0

    protected_words = [
        a.word for a in annotations if a.is_protected and not idf.annotation_failed(a)
    ]
    fairness = FairnessStats(
        protected_count=len(protected_words),
        top_n=len(top_words),
        percent=100.0 * len(protected_words) / len(top_words),
        retained_from_original=len(protected_words),
    )
    return MeasurementResult(
        metrics=metrics,
        fairness=fairness,
        top_words=top_words,
        protected_words=protected_words,
        annotations=annotations,
        global_scores=global_scores,
        model=model,
        timings=timings,
    )


def run_mitigation(config: PipelineConfig) -> MitigationReport:
    """Full loop: measure, moderate the training corpus, retrain, re-measure.

    The retrained model uses the identical training configuration and seed.
    The mitigated fairness counts how many protected words survived from
    the original run's protected set. When measurement finds no protected
    words, moderation and retraining are skipped and the mitigated side
    equals the original.
    """
    training = load_corpus(config.training_corpus)
    unlabeled = load_corpus(config.unlabeled_corpus)
    original = run_measurement(config, training=training, unlabeled=unlabeled)
    timings = dict(original.timings)
    if original.model is None:
        raise ValueError("mitigation requires a trainable model, not external predictions")

    protected = mod.scope_words(original.annotations, config.plan.category_scope)
    if not protected:
        delta = mod.MitigationDelta(strategy=config.plan.strategy)
        mitigated = MeasurementResult(
            metrics=original.metrics,
            fairness=original.fairness,
            top_words=list(original.top_words),
            protected_words=list(original.protected_words),
            annotations=list(original.annotations),
            global_scores=list(original.global_scores),
            model=original.model,
            timings={},
        )
        timings["moderate"] = 0.0
        timings["retrain"] = 0.0
        report = MitigationReport(
            target_class=config.target_class,
            strategy=config.plan.strategy,
            original=original,
            mitigated=mitigated,
            delta=delta,
            timings=timings,
        )
        _write_artifacts(config, report, None)
        return report

    plan = config.plan.with_words(protected)
    embeddings = lexicon = None
    if plan.strategy in ("MS3", "MS4"):
        if not config.embeddings_path:
            raise ValueError(f"{plan.strategy} requires an embeddings file")
        embeddings = load_embeddings(config.embeddings_path)
    if plan.strategy == "MS5":
        if not config.hypernyms_path:
            raise ValueError("MS5 requires a hypernym lexicon file")
        lexicon = load_hypernyms(config.hypernyms_path)

    t0 = time.perf_counter()
    mitigated_corpus, delta = mod.apply_plan(training, plan, embeddings=embeddings, lexicon=lexicon)
    timings["moderate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    new_model = clf.train(mitigated_corpus, config.train)
    timings["retrain"] = time.perf_counter() - t0

    mitigated = run_measurement(config, model=new_model, training=mitigated_corpus, unlabeled=unlabeled)
    retained = len(set(mitigated.protected_words) & set(original.protected_words))
    mitigated.fairness = FairnessStats(
        protected_count=mitigated.fairness.protected_count,
        top_n=mitigated.fairness.top_n,
        percent=mitigated.fairness.percent,
        retained_from_original=retained,
    )
    for stage, seconds in mitigated.timings.items():
        timings[f"{stage}_mitigated"] = seconds

    report = MitigationReport(
        target_class=config.target_class,
        strategy=config.plan.strategy,
        original=original,
        mitigated=mitigated,
        delta=delta,
        timings=timings,
    )
    _write_artifacts(config, report, mitigated_corpus)
    return report


def compare_rankings(words_a: Sequence[str], words_b: Sequence[str]) -> tuple[int, float]:
    """Overlap between two runs' top-word lists."""
    return xpl.overlap(words_a, words_b)


# ---------------------------------------------------------------------------
# Serialization

def _metrics_payload(metrics: clf.Metrics) -> dict:
    return {
        "f1_macro": metrics.f1_macro,
        "f1_weighted": metrics.f1_weighted,
        "auc": metrics.auc,
        "per_class": {
            name: {"precision": m.precision, "recall": m.recall, "f1": m.f1}
            for name, m in sorted(metrics.per_class.items())
        },
    }


def _fairness_payload(fairness: FairnessStats) -> dict:
    return {
        "protected_count": fairness.protected_count,
        "top_n": fairness.top_n,
        "percent": fairness.percent,
        "retained_from_original": fairness.retained_from_original,
    }


def _annotations_payload(annotations: Sequence[idf.Annotation]) -> list[list]:
    return [
        [a.word, a.category.value if a.category else "none", a.reliability, a.source]
        for a in annotations
    ]


def report_payload(report: MitigationReport) -> dict:
    """The deterministic portion of a report (no timings)."""
    return {
        "target_class": report.target_class,
        "strategy": report.strategy,
        "original": {
            "metrics": _metrics_payload(report.original.metrics),
            "fairness": _fairness_payload(report.original.fairness),
            "top_words": report.original.top_words,
            "protected_words": report.original.protected_words,
            "annotations": _annotations_payload(report.original.annotations),
        },
        "mitigated": {
            "metrics": _metrics_payload(report.mitigated.metrics),
            "fairness": _fairness_payload(report.mitigated.fairness),
            "top_words": report.mitigated.top_words,
            "protected_words": report.mitigated.protected_words,
            "annotations": _annotations_payload(report.mitigated.annotations),
        },
        "delta": {
            "strategy": report.delta.strategy,
            "documents_removed": report.delta.documents_removed,
            "documents_added": report.delta.documents_added,
            "tokens_removed": report.delta.tokens_removed,
            "tokens_replaced": report.delta.tokens_replaced,
        },
    }


def render_report_table(report: MitigationReport) -> str:
    """Human-readable summary table plus stage timings."""
    def fmt_metrics(m: clf.Metrics) -> tuple[str, str, str]:
        auc = f"{m.auc:.3f}" if m.auc is not None else "-"
        return f"{m.f1_macro:.3f}", f"{m.f1_weighted:.3f}", auc

    delta_docs = report.delta.documents_added - report.delta.documents_removed
    delta_text = "-" if delta_docs == 0 else f"{delta_docs:+d}"
    rows = [
        ("model", "strategy", "d_train", "f1_macro", "f1_weight", "auc", "%pa", "ratio_pa"),
        (
            "original", "-", "-",
            *fmt_metrics(report.original.metrics),
            f"{report.original.fairness.percent:.0f}%",
            report.original.fairness.ratio_text(),
        ),
        (
            "mitigated", report.strategy, delta_text,
            *fmt_metrics(report.mitigated.metrics),
            f"{report.mitigated.fairness.percent:.0f}%",
            report.mitigated.fairness.ratio_text(show_retained=True),
        ),
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.append("")
    lines.append("stage timings (seconds):")
    for stage, seconds in sorted(report.timings.items()):
        lines.append(f"  {stage}: {seconds:.3f}")
    return "\n".join(lines) + "\n"


def _write_artifacts(
    config: PipelineConfig, report: MitigationReport, mitigated_corpus: LabeledCorpus | None
) -> None:
    if not config.output_dir:
        return
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report_payload(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "timings.json", "w", encoding="utf-8") as fh:
        json.dump(report.timings, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(render_report_table(report))
    xpl.write_ranking_csv(report.original.global_scores, out / "ranking_original.csv")
    xpl.write_ranking_csv(report.mitigated.global_scores, out / "ranking_mitigated.csv")
    idf.save_annotations_tsv(report.original.annotations, out / "annotations_original.tsv")
    idf.save_annotations_tsv(report.mitigated.annotations, out / "annotations_mitigated.tsv")
    if mitigated_corpus is not None:
        save_corpus(mitigated_corpus, out / "corpus_mitigated.jsonl")
    if report.original.model is not None:
        clf.save_model(report.original.model, out / "model_original.json")
    if report.mitigated.model is not None and report.mitigated.model is not report.original.model:
        clf.save_model(report.mitigated.model, out / "model_mitigated.json")
