"""Rewriting a training corpus to remove or dilute protected words.

Five strategies, all pure functions of (corpus, plan, resources):

* MS1 drops every in-scope document containing a protected word.
* MS2 deletes the protected words themselves, keeping every document.
* MS3 replaces each protected occurrence with one of its k nearest
  embedding neighbors, drawn independently per occurrence from a stream
  seeded by (seed, document id, position), so parallel and sequential
  application agree.
* MS4 appends, per document and per distinct protected word in it, k
  variants that substitute one neighbor each.
* MS5 swaps each occurrence for its hypernym from a flat lexicon.

A plan can be scoped to documents of one class label and, upstream of the
plan, to annotations of chosen protected categories.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import Document, LabeledCorpus, make_corpus
from .identifier import Annotation, ProtectedCategory
from .lexical import EmbeddingTable, HypernymLexicon, hypernym, k_nearest

logger = logging.getLogger(__name__)

STRATEGIES = ("MS1", "MS2", "MS3", "MS4", "MS5")


@dataclass(frozen=True)
class MitigationPlan:
    strategy: str
    protected_words: tuple[str, ...]
    category_scope: frozenset[ProtectedCategory] | None = None
    class_scope: str | None = None
    k: int = 5
    seed: int = 0
    keep_original: bool = True

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if not self.protected_words:
            raise ValueError("protected_words may not be empty")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def word_set(self) -> frozenset[str]:
        return frozenset(w.lower() for w in self.protected_words)

    def in_scope(self, doc: Document) -> bool:
        return self.class_scope is None or doc.label == self.class_scope


@dataclass(frozen=True)
class MitigationDelta:
    """Size accounting for one strategy application."""

    strategy: str
    documents_removed: int = 0
    documents_added: int = 0
    tokens_removed: int = 0
    tokens_replaced: int = 0


def scope_words(
    annotations: Iterable[Annotation],
    category_scope: Iterable[ProtectedCategory] | None = None,
) -> list[str]:
    """Protected words from annotations, optionally restricted to categories.

    Preserves first-seen order and drops duplicates.
    """
    scope = frozenset(category_scope) if category_scope is not None else None
    seen = set()
    words = []
    for ann in annotations:
        if ann.category is None:
            continue
        if scope is not None and ann.category not in scope:
            continue
        if ann.word not in seen:
            seen.add(ann.word)
            words.append(ann.word)
    return words


def ms1_sentence_removal(corpus: LabeledCorpus, plan: MitigationPlan) -> tuple[LabeledCorpus, MitigationDelta]:
    """Drop every in-scope document whose tokens intersect the protected words."""
    _require(plan, "MS1")
    protected = plan.word_set()
    survivors = [
        doc for doc in corpus
        if not (plan.in_scope(doc) and protected & set(doc.tokens))
    ]
    removed = len(corpus) - len(survivors)
    before = {d.label for d in corpus if d.label is not None}
    after = {d.label for d in survivors if d.label is not None}
    lost = sorted(before - after)
    if lost:
        raise ValueError(f"sentence removal would eliminate entire class(es): {lost}")
    delta = MitigationDelta(strategy="MS1", documents_removed=removed)
    return make_corpus(survivors, classes=corpus.classes), delta


def ms2_word_removal(corpus: LabeledCorpus, plan: MitigationPlan) -> tuple[LabeledCorpus, MitigationDelta]:
    """Delete all protected-word occurrences from in-scope documents."""
    _require(plan, "MS2")
    protected = plan.word_set()
    docs = []
    removed_tokens = 0
    for doc in corpus:
        if plan.in_scope(doc) and protected & set(doc.tokens):
            kept = [t for t in doc.tokens if t not in protected]
            removed_tokens += len(doc.tokens) - len(kept)
            docs.append(doc.with_tokens(kept))
        else:
            docs.append(doc)
    delta = MitigationDelta(strategy="MS2", tokens_removed=removed_tokens)
    return make_corpus(docs, classes=corpus.classes), delta


def _occurrence_rng(seed: int, doc_id: str, position: int) -> np.random.Generator:
    # Stream derived per occurrence: parallel application equals sequential.
    return np.random.default_rng((seed & 0xFFFFFFFF, zlib.crc32(doc_id.encode("utf-8")), position))


def ms3_replace_random_synonym(
    corpus: LabeledCorpus, plan: MitigationPlan, embeddings: EmbeddingTable
) -> tuple[LabeledCorpus, MitigationDelta]:
    """Replace each protected occurrence with a random one of its k nearest neighbors.

    Protected words absent from the embedding table fall back to removal,
    with a warning per word.
    """
    _require(plan, "MS3")
    protected = plan.word_set()
    neighbors = _neighbor_cache(protected, embeddings, plan.k)
    docs = []
    replaced = 0
    removed = 0
    for doc in corpus:
        if not (plan.in_scope(doc) and protected & set(doc.tokens)):
            docs.append(doc)
            continue
        new_tokens = []
        for pos, tok in enumerate(doc.tokens):
            if tok not in protected:
                new_tokens.append(tok)
                continue
            pool = neighbors.get(tok)
            if not pool:
                removed += 1
                continue
            rng = _occurrence_rng(plan.seed, doc.id, pos)
            new_tokens.append(pool[int(rng.integers(len(pool)))])
            replaced += 1
        docs.append(doc.with_tokens(new_tokens))
    delta = MitigationDelta(strategy="MS3", tokens_removed=removed, tokens_replaced=replaced)
    return make_corpus(docs, classes=corpus.classes), delta


def ms4_expand_k_synonyms(
    corpus: LabeledCorpus, plan: MitigationPlan, embeddings: EmbeddingTable
) -> tuple[LabeledCorpus, MitigationDelta]:
    """Append k neighbor-substituted variants per distinct protected word per document.

    Variant j of word w replaces every occurrence of w with w's j-th nearest
    neighbor; variant ids derive from the parent id. Originals are kept when
    the plan says so. Protected words without embeddings yield no variants.
    """
    _require(plan, "MS4")
    protected = plan.word_set()
    neighbors = _neighbor_cache(protected, embeddings, plan.k)
    docs = []
    added = 0
    dropped = 0
    replaced = 0
    for doc in corpus:
        present = sorted(protected & set(doc.tokens)) if plan.in_scope(doc) else []
        expandable = [w for w in present if neighbors.get(w)]
        if plan.keep_original or not expandable:
            docs.append(doc)
        else:
            dropped += 1
        for word in expandable:
            for j, neighbor in enumerate(neighbors[word], start=1):
                variant = [neighbor if t == word else t for t in doc.tokens]
                replaced += sum(1 for t in doc.tokens if t == word)
                docs.append(
                    Document(
                        id=f"{doc.id}.{word}.{j}",
                        text=" ".join(variant),
                        tokens=tuple(variant),
                        label=doc.label,
                    )
                )
                added += 1
    delta = MitigationDelta(
        strategy="MS4", documents_added=added, documents_removed=dropped, tokens_replaced=replaced
    )
    return make_corpus(docs, classes=corpus.classes), delta


def ms5_replace_hypernym(
    corpus: LabeledCorpus, plan: MitigationPlan, lexicon: HypernymLexicon
) -> tuple[LabeledCorpus, MitigationDelta]:
    """Replace each protected occurrence with its hypernym; unmapped words stay."""
    _require(plan, "MS5")
    protected = plan.word_set()
    unmapped: set[str] = set()
    docs = []
    replaced = 0
    for doc in corpus:
        if not (plan.in_scope(doc) and protected & set(doc.tokens)):
            docs.append(doc)
            continue
        new_tokens = []
        changed = False
        for tok in doc.tokens:
            if tok in protected:
                target = hypernym(lexicon, tok)
                if target is None:
                    unmapped.add(tok)
                    new_tokens.append(tok)
                else:
                    new_tokens.append(target)
                    replaced += 1
                    changed = True
            else:
                new_tokens.append(tok)
        docs.append(doc.with_tokens(new_tokens) if changed else doc)
    for word in sorted(unmapped):
        logger.warning("no hypernym for protected word %r; occurrences left unchanged", word)
    delta = MitigationDelta(strategy="MS5", tokens_replaced=replaced)
    return make_corpus(docs, classes=corpus.classes), delta


def apply_plan(
    corpus: LabeledCorpus,
    plan: MitigationPlan,
    embeddings: EmbeddingTable | None = None,
    lexicon: HypernymLexicon | None = None,
) -> tuple[LabeledCorpus, MitigationDelta]:
    """Dispatch to the plan's strategy, checking required resources."""
    if plan.strategy == "MS1":
        return ms1_sentence_removal(corpus, plan)
    if plan.strategy == "MS2":
        return ms2_word_removal(corpus, plan)
    if plan.strategy == "MS3":
        if embeddings is None:
            raise ValueError("MS3 requires an embedding table")
        return ms3_replace_random_synonym(corpus, plan, embeddings)
    if plan.strategy == "MS4":
        if embeddings is None:
            raise ValueError("MS4 requires an embedding table")
        return ms4_expand_k_synonyms(corpus, plan, embeddings)
    if lexicon is None:
        raise ValueError("MS5 requires a hypernym lexicon")
    return ms5_replace_hypernym(corpus, plan, lexicon)


def _require(plan: MitigationPlan, strategy: str) -> None:
    if plan.strategy != strategy:
        raise ValueError(f"plan strategy is {plan.strategy}, expected {strategy}")


def _neighbor_cache(
    protected: Sequence[str] | frozenset[str], embeddings: EmbeddingTable, k: int
) -> dict[str, list[str]]:
    cache: dict[str, list[str]] = {}
    missing = []
    for word in sorted(protected):
        if word in embeddings:
            cache[word] = k_nearest(embeddings, word, k)
        else:
            cache[word] = []
            missing.append(word)
    for word in missing:
        logger.warning("protected word %r missing from embeddings; falling back", word)
    return cache
