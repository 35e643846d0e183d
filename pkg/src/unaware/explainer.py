"""Per-token attribution and its aggregation into a global word ranking.

Local attributions assign one score per token position of a document for a
chosen target class. Two built-in methods are provided: the exact linear
read-out of a :class:`~unaware.classifier.LinearModel`, and a model-agnostic
occlusion score (prediction change when a token is dropped). Attributions
computed elsewhere can be ingested from JSONL.

The global ranking sums each word's occurrence scores and divides by its
occurrence count, so rare but influential words surface alongside frequent
ones. Evaluation instruments for the ranking (ablation curve, top-k overlap)
and a shaded rendering of local scores live here too.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .classifier import LinearModel, Metrics, PredictFn, evaluate
from .corpus import Document, LabeledCorpus, make_corpus

METHODS = ("linear-exact", "occlusion", "external-file")


@dataclass(frozen=True)
class AttributionRecord:
    """Local explanation: one (position, token, score) triple per token."""

    document_id: str
    target_class: str
    token_scores: tuple[tuple[int, str, float], ...]

    def __post_init__(self) -> None:
        for pos, tok, score in self.token_scores:
            if not math.isfinite(score):
                raise ValueError(f"non-finite score for {tok!r} at position {pos} in {self.document_id!r}")


@dataclass(frozen=True)
class GlobalWordScore:
    """A word's aggregate rank entry: ``score == total / frequency``."""

    word: str
    total: float
    frequency: int
    score: float


@dataclass(frozen=True)
class ExplainerConfig:
    """Attribution method plus the size of the global-ranking cut.

    Exactly one of ``top_k`` (absolute count) or ``top_fraction`` (share of
    distinct scored words, in (0, 1]) must be set.
    """

    method: str = "linear-exact"
    top_k: int | None = None
    top_fraction: float | None = None
    attributions_path: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if (self.top_k is None) == (self.top_fraction is None):
            raise ValueError("exactly one of top_k/top_fraction must be set")
        if self.top_k is not None and self.top_k <= 0:
            raise ValueError("top_k must be positive")
        if self.top_fraction is not None and not 0.0 < self.top_fraction <= 1.0:
            raise ValueError("top_fraction must be in (0, 1]")
        if self.method == "external-file" and not self.attributions_path:
            raise ValueError("external-file method requires attributions_path")


def attribute_linear(model: LinearModel, doc: Document, target_class: str) -> AttributionRecord:
    """Exact attribution for a linear model: each occurrence scores its weight.

    Out-of-vocabulary tokens score 0. For the negative class of a binary
    model the scores are the negated positive-class weights.
    """
    scores = tuple(
        (pos, tok, model.weight_of(tok, target_class)) for pos, tok in enumerate(doc.tokens)
    )
    return AttributionRecord(document_id=doc.id, target_class=target_class, token_scores=scores)


def attribute_occlusion(predict_fn: PredictFn, doc: Document, target_class: str) -> AttributionRecord:
    """Leave-one-out attribution for any black-box scorer.

    Score at position i is ``p(target | doc) - p(target | doc without i)``.
    """
    tokens = list(doc.tokens)
    base = predict_fn(tokens)
    if target_class not in base:
        raise ValueError(f"unknown class: {target_class!r}")
    p_full = base[target_class]
    scores = []
    for i, tok in enumerate(tokens):
        reduced = tokens[:i] + tokens[i + 1 :]
        scores.append((i, tok, p_full - predict_fn(reduced)[target_class]))
    return AttributionRecord(document_id=doc.id, target_class=target_class, token_scores=tuple(scores))


def load_external_attributions(path: str | Path, corpus: LabeledCorpus) -> list[AttributionRecord]:
    """Read attribution records from JSONL and validate them against a corpus.

    Each line is ``{"id", "target_class", "scores": [[position, token, score], ...]}``.
    Scores must cover every token position in order, name the same token
    strings as the document, and be finite; violations raise
    :class:`ValueError` naming the record and position.
    """
    docs = corpus.by_id()
    records: list[AttributionRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            doc_id = rec.get("id")
            target = rec.get("target_class")
            scores = rec.get("scores")
            if not isinstance(doc_id, str) or not isinstance(target, str) or not isinstance(scores, list):
                raise ValueError(f"{path}: line {lineno}: expected {{'id', 'target_class', 'scores'}}")
            doc = docs.get(doc_id)
            if doc is None:
                raise ValueError(f"{path}: line {lineno}: unknown document id {doc_id!r}")
            if len(scores) != len(doc.tokens):
                raise ValueError(
                    f"{path}: record {doc_id!r}: {len(scores)} scores for {len(doc.tokens)} tokens"
                )
            triples = []
            for expected_pos, item in enumerate(scores):
                pos, tok, score = item
                if int(pos) != expected_pos:
                    raise ValueError(f"{path}: record {doc_id!r}: positions must be 0..n-1 in order")
                if tok != doc.tokens[expected_pos]:
                    raise ValueError(
                        f"{path}: record {doc_id!r}: token mismatch at position {expected_pos}: "
                        f"{tok!r} != {doc.tokens[expected_pos]!r}"
                    )
                if not isinstance(score, (int, float)) or not math.isfinite(score):
                    raise ValueError(f"{path}: record {doc_id!r}: non-finite score at position {expected_pos}")
                triples.append((expected_pos, tok, float(score)))
            records.append(AttributionRecord(document_id=doc_id, target_class=target, token_scores=tuple(triples)))
    return records


def aggregate_global(records: Sequence[AttributionRecord]) -> list[GlobalWordScore]:
    """Rank all scored words by mean occurrence score, descending.

    Per-word totals are summed in a canonical (document id, position) order,
    so the result is exactly invariant to the order records arrive in. Ties
    break lexicographically.
    """
    if records:
        targets = {r.target_class for r in records}
        if len(targets) > 1:
            raise ValueError(f"records mix target classes: {sorted(targets)}")
    occurrences: dict[str, list[tuple[str, int, float]]] = {}
    for rec in records:
        for pos, tok, score in rec.token_scores:
            occurrences.setdefault(tok, []).append((rec.document_id, pos, score))
    results = []
    for word in sorted(occurrences):
        occ = sorted(occurrences[word], key=lambda t: (t[0], t[1]))
        total = 0.0
        for _, _, score in occ:
            total += score
        freq = len(occ)
        results.append(GlobalWordScore(word=word, total=total, frequency=freq, score=total / freq))
    results.sort(key=lambda g: (-g.score, g.word))
    return results


def select_top(scores: Sequence[GlobalWordScore], config: ExplainerConfig) -> list[str]:
    """First k ranking entries; k from ``top_k`` or ``ceil(top_fraction * len)``."""
    if not scores:
        raise ValueError("cannot select from an empty ranking")
    if config.top_k is not None:
        k = config.top_k
    else:
        k = math.ceil(config.top_fraction * len(scores))
    return [g.word for g in scores[: min(k, len(scores))]]


def overlap(list_a: Sequence[str], list_b: Sequence[str]) -> tuple[int, float]:
    """Shared-word count and its fraction of the longer list."""
    count = len(set(list_a) & set(list_b))
    denom = max(len(list_a), len(list_b))
    return count, (count / denom if denom else 0.0)


def ablation_curve(
    model: LinearModel,
    corpus: LabeledCorpus,
    ranked_words: Sequence[str],
    steps: Sequence[int],
) -> list[tuple[int, float]]:
    """Macro-F1 after deleting the top-s ranked words from every document.

    ``steps`` must be ascending and non-negative; step 0 reproduces the
    baseline evaluation exactly.
    """
    if any(s < 0 for s in steps):
        raise ValueError("steps must be non-negative")
    if list(steps) != sorted(steps):
        raise ValueError("steps must be ascending")
    curve = []
    for s in steps:
        removed = set(ranked_words[:s])
        if removed:
            docs = [doc.with_tokens(t for t in doc.tokens if t not in removed) for doc in corpus]
            ablated = make_corpus(docs, classes=corpus.classes)
        else:
            ablated = corpus
        metrics: Metrics = evaluate(model, ablated)
        curve.append((s, metrics.f1_macro))
    return curve


def _intensities(record: AttributionRecord) -> list[float]:
    peak = max((abs(s) for _, _, s in record.token_scores), default=0.0)
    if peak == 0.0:
        return [0.0 for _ in record.token_scores]
    return [s / peak for _, _, s in record.token_scores]


def render_attributions(record: AttributionRecord, format: str = "ansi") -> str:
    """Render a local explanation with per-token shading.

    Positive scores shade red, negative shade blue, intensity proportional
    to |score| normalized by the record's peak magnitude. ``format`` is
    ``"ansi"`` (truecolor background escapes) or ``"html"`` (span elements).
    """
    if format not in ("ansi", "html"):
        raise ValueError("format must be 'ansi' or 'html'")
    intensities = _intensities(record)
    parts = []
    for (_, tok, _), value in zip(record.token_scores, intensities):
        if value == 0.0:
            parts.append(tok)
            continue
        alpha = abs(value)
        if format == "ansi":
            fade = int(round(255 * (1.0 - alpha)))
            r, g, b = (255, fade, fade) if value > 0 else (fade, fade, 255)
            parts.append(f"\x1b[48;2;{r};{g};{b}m{tok}\x1b[0m")
        else:
            color = "255,0,0" if value > 0 else "0,0,255"
            parts.append(f'<span style="background-color: rgba({color},{alpha:.2f})">{tok}</span>')
    return " ".join(parts)


def write_ranking_csv(scores: Iterable[GlobalWordScore], path: str | Path) -> None:
    """Write a global ranking as ``word,total,frequency,score`` CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("word,total,frequency,score\n")
        for g in scores:
            fh.write(f"{g.word},{g.total!r},{g.frequency},{g.score!r}\n")


def read_ranking_csv(path: str | Path) -> list[GlobalWordScore]:
    scores = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "word,total,frequency,score":
            raise ValueError(f"{path}: not a ranking CSV")
        for line in fh:
            if not line.strip():
                continue
            word, total, freq, score = line.rstrip("\n").split(",")
            scores.append(GlobalWordScore(word=word, total=float(total), frequency=int(freq), score=float(score)))
    return scores
