"""Seeded synthetic corpora with planted protected-word bias.

The generator produces a binary classification corpus where a set of
"planted" protected tokens co-occurs with the positive class at a
controlled rate without carrying the real signal, alongside genuinely
predictive tokens and a large neutral filler vocabulary. Training a
classifier on it reproduces, at desk scale, the failure mode the toolkit
exists to measure: the model picks up the protected tokens as shortcuts.

Planted tokens are attached round-robin to a fixed share of positive and
negative documents, so each token's positive co-occurrence rate is pinned
near ``p_pos / (p_pos + p_neg)`` by construction instead of drifting with
sampling noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Document, LabeledCorpus, make_corpus
from .identifier import ProtectedCategory

NEGATIVE = "benign"
POSITIVE = "flagged"


@dataclass(frozen=True)
class PlantedBiasSpec:
    """Knobs for the generator; defaults give a clear planted-bias signal."""

    n_documents: int = 4000
    n_filler: int = 1500
    n_protected: int = 20
    n_predictive: int = 20
    positive_rate: float = 0.5
    # Share of positive/negative documents that carry one planted token.
    protected_doc_rate_positive: float = 0.18
    protected_doc_rate_negative: float = 0.02
    # Positive documents carry 2-3 predictive tokens; negatives pick up
    # each predictive token only at this noise rate.
    predictive_noise_rate: float = 0.004
    doc_length_range: tuple[int, int] = (8, 18)

    @property
    def protected_words(self) -> list[str]:
        return [f"planted{i:02d}" for i in range(self.n_protected)]

    @property
    def predictive_words(self) -> list[str]:
        return [f"signal{i:02d}" for i in range(self.n_predictive)]

    @property
    def filler_words(self) -> list[str]:
        return [f"filler{i:04d}" for i in range(self.n_filler)]

    def protected_dictionary(self) -> dict[str, ProtectedCategory]:
        categories = list(ProtectedCategory)
        return {
            word: categories[i % len(categories)]
            for i, word in enumerate(self.protected_words)
        }


def make_planted_bias_corpus(spec: PlantedBiasSpec = PlantedBiasSpec(), seed: int = 0) -> LabeledCorpus:
    """Generate one corpus realization for ``spec``, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    protected = spec.protected_words
    predictive = spec.predictive_words
    filler = spec.filler_words

    labels = rng.random(spec.n_documents) < spec.positive_rate
    token_lists: list[list[str]] = []
    for i in range(spec.n_documents):
        length = int(rng.integers(spec.doc_length_range[0], spec.doc_length_range[1] + 1))
        tokens = [filler[int(j)] for j in rng.integers(0, len(filler), size=length)]
        if labels[i]:
            for _ in range(int(rng.integers(2, 4))):
                tokens.append(predictive[int(rng.integers(len(predictive)))])
        else:
            for word in predictive:
                if rng.random() < spec.predictive_noise_rate:
                    tokens.append(word)
        token_lists.append(tokens)

    for positive, rate in ((True, spec.protected_doc_rate_positive),
                           (False, spec.protected_doc_rate_negative)):
        indices = np.flatnonzero(labels == positive)
        n_attach = int(round(rate * len(indices)))
        chosen = rng.choice(indices, size=min(n_attach, len(indices)), replace=False)
        for t, idx in enumerate(chosen):
            token_lists[int(idx)].append(protected[t % len(protected)])

    documents = []
    for i, tokens in enumerate(token_lists):
        rng.shuffle(tokens)
        documents.append(
            Document(
                id=f"doc{i:05d}",
                text=" ".join(tokens),
                tokens=tuple(tokens),
                label=POSITIVE if labels[i] else NEGATIVE,
            )
        )
    return make_corpus(documents, classes={NEGATIVE, POSITIVE})


def positive_cooccurrence_rates(corpus: LabeledCorpus, words: list[str]) -> dict[str, float]:
    """Share of each word's carrying documents that are labeled positive."""
    rates = {}
    for word in words:
        carrying = [d for d in corpus if word in d.tokens]
        if carrying:
            rates[word] = sum(1 for d in carrying if d.label == POSITIVE) / len(carrying)
    return rates


def make_embeddings_for(words: list[str], neighbors_per_word: int = 6, seed: int = 0) -> dict[str, np.ndarray]:
    """Synthetic embedding map giving every word a tight cluster of neighbors.

    Each input word gets ``neighbors_per_word`` nearby companion words
    (named ``<word>_altN``), so k-nearest lookups up to that k always
    succeed with in-cluster results.
    """
    rng = np.random.default_rng(seed)
    vectors: dict[str, np.ndarray] = {}
    for word in words:
        center = rng.normal(size=16)
        center /= np.linalg.norm(center)
        vectors[word] = center
        for j in range(neighbors_per_word):
            offset = rng.normal(scale=0.05, size=16)
            vectors[f"{word}_alt{j}"] = center + offset
    return vectors
