"""Reference bag-of-words logistic classifier.

A deliberately simple, fully deterministic stand-in for whatever production
model is being audited: token-count features, mini-batch gradient descent,
and a JSON on-disk format. Linear weights make token attributions exact,
which is what the explainer's oracle checks lean on. Predictions from an
external black-box model can be ingested instead via
:func:`load_external_predictions`.

Binary tasks train a single weight vector for the positive class (the
lexicographically greater of the two class names); tasks with three or more
classes train one-vs-rest vectors combined through a softmax.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse

from .corpus import Document, LabeledCorpus

WEIGHTING_SCHEMES = ("none", "inverse-frequency")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for :func:`train`. Deterministic given ``seed``."""

    epochs: int = 30
    learning_rate: float = 0.5
    l2: float = 1e-4
    class_weighting: str = "none"
    seed: int = 0
    batch_size: int = 64

    def __post_init__(self) -> None:
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.class_weighting not in WEIGHTING_SCHEMES:
            raise ValueError(f"class_weighting must be one of {WEIGHTING_SCHEMES}")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class Metrics:
    """Evaluation summary: macro/weighted F1, per-class breakdown, binary AUC."""

    f1_macro: float
    f1_weighted: float
    auc: float | None
    per_class: dict[str, ClassMetrics] = field(default_factory=dict)


@dataclass
class LinearModel:
    """Trained linear classifier over a token-count vocabulary.

    ``weights`` maps class name to a weight vector over the vocabulary.
    Binary models carry exactly one entry, for the positive class.
    """

    vocabulary: dict[str, int]
    weights: dict[str, np.ndarray]
    bias: dict[str, float]
    classes: tuple[str, ...]
    training_config: TrainConfig
    loss_history: tuple[float, ...] = ()

    @property
    def is_binary(self) -> bool:
        return len(self.classes) == 2

    @property
    def positive_class(self) -> str:
        if not self.is_binary:
            raise ValueError("positive_class is only defined for binary models")
        return self.classes[1]

    def weight_of(self, token: str, target_class: str) -> float:
        """Per-occurrence contribution of ``token`` to ``target_class``; 0 when out of vocabulary."""
        idx = self.vocabulary.get(token)
        if idx is None:
            return 0.0
        if self.is_binary:
            w = float(self.weights[self.positive_class][idx])
            if target_class == self.positive_class:
                return w
            if target_class == self.classes[0]:
                return -w
            raise ValueError(f"unknown class: {target_class!r}")
        if target_class not in self.weights:
            raise ValueError(f"unknown class: {target_class!r}")
        return float(self.weights[target_class][idx])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _count_matrix(docs: Sequence[Document], vocabulary: dict[str, int]) -> sparse.csr_matrix:
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    for doc in docs:
        counts: dict[int, int] = {}
        for tok in doc.tokens:
            idx = vocabulary.get(tok)
            if idx is not None:
                counts[idx] = counts.get(idx, 0) + 1
        for idx in sorted(counts):
            indices.append(idx)
            data.append(float(counts[idx]))
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(docs), len(vocabulary)),
    )


def logistic_loss(
    X: sparse.csr_matrix,
    y: np.ndarray,
    w: np.ndarray,
    b: float,
    l2: float,
    sample_weight: np.ndarray,
) -> float:
    """Weighted-mean cross-entropy plus (l2/2)*||w||^2."""
    z = X @ w + b
    # log(1 + exp(-z*s)) computed stably, s in {-1, +1}
    s = np.where(y > 0.5, 1.0, -1.0)
    m = -z * s
    ce = np.logaddexp(0.0, m)
    return float(np.mean(sample_weight * ce) + 0.5 * l2 * float(w @ w))


def logistic_gradient(
    X: sparse.csr_matrix,
    y: np.ndarray,
    w: np.ndarray,
    b: float,
    l2: float,
    sample_weight: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`logistic_loss` in (w, b)."""
    n = X.shape[0]
    p = _sigmoid(X @ w + b)
    r = sample_weight * (p - y) / n
    grad_w = X.T @ r + l2 * w
    grad_b = float(np.sum(r))
    return np.asarray(grad_w).ravel(), grad_b


def _sample_weights(y: np.ndarray, scheme: str) -> np.ndarray:
    if scheme == "none":
        return np.ones_like(y, dtype=float)
    n = len(y)
    n_pos = int(np.sum(y))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("inverse-frequency weighting needs both classes present")
    weights = np.where(y > 0.5, n / (2.0 * n_pos), n / (2.0 * n_neg))
    return weights


def _fit_binary(
    X: sparse.csr_matrix,
    y: np.ndarray,
    config: TrainConfig,
    rng_seed: Sequence[int],
) -> tuple[np.ndarray, float, list[float]]:
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    sw = _sample_weights(y, config.class_weighting)
    rng = np.random.default_rng(rng_seed)
    history = [logistic_loss(X, y, w, b, config.l2, sw)]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            gw, gb = logistic_gradient(X[batch], y[batch], w, b, config.l2, sw[batch])
            w -= config.learning_rate * gw
            b -= config.learning_rate * gb
        history.append(logistic_loss(X, y, w, b, config.l2, sw))
    return w, b, history


def train(corpus: LabeledCorpus, config: TrainConfig = TrainConfig()) -> LinearModel:
    """Train a linear classifier on a fully labeled corpus.

    Raises :class:`ValueError` if any document is unlabeled or fewer than
    two classes occur. The same corpus, config, and seed always produce
    bit-identical weights.
    """
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    for doc in corpus:
        if doc.label is None:
            raise ValueError(f"unlabeled document in training corpus: {doc.id!r}")
    classes = corpus.labeled_classes()
    if len(classes) < 2:
        raise ValueError(f"training needs at least 2 classes, found {classes}")

    vocabulary = {tok: i for i, tok in enumerate(sorted({t for d in corpus for t in d.tokens}))}
    X = _count_matrix(corpus.documents, vocabulary)
    labels = np.array([classes.index(d.label) for d in corpus])

    weights: dict[str, np.ndarray] = {}
    bias: dict[str, float] = {}
    if len(classes) == 2:
        y = (labels == 1).astype(float)
        w, b, history = _fit_binary(X, y, config, (config.seed & 0xFFFFFFFF, 1))
        weights[classes[1]] = w
        bias[classes[1]] = b
        loss_history = history
    else:
        # one-vs-rest; reported loss is the mean across the binary subproblems
        histories = []
        for k, name in enumerate(classes):
            y = (labels == k).astype(float)
            w, b, history = _fit_binary(X, y, config, (config.seed & 0xFFFFFFFF, k))
            weights[name] = w
            bias[name] = b
            histories.append(history)
        loss_history = [float(np.mean(col)) for col in zip(*histories)]

    return LinearModel(
        vocabulary=vocabulary,
        weights=weights,
        bias=bias,
        classes=tuple(classes),
        training_config=config,
        loss_history=tuple(loss_history),
    )


def predict_tokens(model: LinearModel, tokens: Iterable[str]) -> dict[str, float]:
    """Class probabilities for a bare token sequence (out-of-vocabulary tokens ignored)."""
    counts: dict[int, int] = {}
    for tok in tokens:
        idx = model.vocabulary.get(tok)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1

    def logit(name: str) -> float:
        w = model.weights[name]
        return float(sum(w[i] * c for i, c in counts.items()) + model.bias[name])

    if model.is_binary:
        p = float(_sigmoid(np.array([logit(model.positive_class)]))[0])
        return {model.classes[0]: 1.0 - p, model.positive_class: p}
    logits = np.array([logit(name) for name in model.classes])
    logits -= logits.max()
    expz = np.exp(logits)
    probs = expz / expz.sum()
    return {name: float(p) for name, p in zip(model.classes, probs)}


def predict(model: LinearModel, doc: Document) -> dict[str, float]:
    """Class probabilities for a document."""
    return predict_tokens(model, doc.tokens)


def predict_corpus(model: LinearModel, corpus: LabeledCorpus) -> dict[str, dict[str, float]]:
    """Probabilities for every document, keyed by document id."""
    return {doc.id: predict(model, doc) for doc in corpus}


def _rank_auc(scores: np.ndarray, is_positive: np.ndarray) -> float:
    """AUC as the Mann-Whitney rank statistic; ties count one half."""
    n_pos = int(np.sum(is_positive))
    n_neg = len(is_positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: corpus lacks a positive or negative instance")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=float)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[is_positive]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _f1_from_counts(tp: int, fp: int, fn: int) -> ClassMetrics:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return ClassMetrics(precision=precision, recall=recall, f1=f1)


def evaluate_predictions(
    labels: Sequence[str],
    probabilities: Sequence[dict[str, float]],
    classes: Sequence[str],
    threshold: float = 0.5,
) -> Metrics:
    """Metrics from gold labels and per-document class probabilities.

    Binary tasks threshold the positive-class probability and report a
    rank-based AUC; larger tasks take the argmax and report no AUC.
    """
    classes = list(classes)
    for lab in labels:
        if lab not in classes:
            raise ValueError(f"label {lab!r} is not a model class")
    if len(classes) == 2:
        positive = classes[1]
        scores = np.array([p[positive] for p in probabilities])
        is_pos = np.array([lab == positive for lab in labels])
        predicted = [positive if s >= threshold else classes[0] for s in scores]
        auc = _rank_auc(scores, is_pos)
    else:
        predicted = [max(classes, key=lambda c: p[c]) for p in probabilities]
        auc = None

    per_class: dict[str, ClassMetrics] = {}
    support: dict[str, int] = {}
    for name in classes:
        tp = sum(1 for t, p in zip(labels, predicted) if t == name and p == name)
        fp = sum(1 for t, p in zip(labels, predicted) if t != name and p == name)
        fn = sum(1 for t, p in zip(labels, predicted) if t == name and p != name)
        per_class[name] = _f1_from_counts(tp, fp, fn)
        support[name] = sum(1 for t in labels if t == name)

    total = sum(support.values())
    f1_macro = float(np.mean([per_class[c].f1 for c in classes]))
    f1_weighted = float(sum(per_class[c].f1 * support[c] for c in classes) / total) if total else 0.0
    return Metrics(f1_macro=f1_macro, f1_weighted=f1_weighted, auc=auc, per_class=per_class)


def evaluate(model: LinearModel, corpus: LabeledCorpus, threshold: float = 0.5) -> Metrics:
    """Evaluate a model on a fully labeled corpus. Invariant to document order."""
    labels = []
    probs = []
    for doc in corpus:
        if doc.label is None:
            raise ValueError(f"cannot evaluate on unlabeled document {doc.id!r}")
        labels.append(doc.label)
        probs.append(predict(model, doc))
    if not labels:
        raise ValueError("cannot evaluate on an empty corpus")
    return evaluate_predictions(labels, probs, model.classes, threshold=threshold)


def save_model(model: LinearModel, path: str | Path) -> None:
    """Serialize a model to JSON (vocabulary, weights, bias, classes, config)."""
    payload = {
        "classes": list(model.classes),
        "vocabulary": model.vocabulary,
        "weights": {name: w.tolist() for name, w in model.weights.items()},
        "bias": model.bias,
        "training_config": asdict(model.training_config),
        "loss_history": list(model.loss_history),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path: str | Path) -> LinearModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return LinearModel(
        vocabulary={str(k): int(v) for k, v in payload["vocabulary"].items()},
        weights={name: np.asarray(w, dtype=float) for name, w in payload["weights"].items()},
        bias={name: float(b) for name, b in payload["bias"].items()},
        classes=tuple(payload["classes"]),
        training_config=TrainConfig(**payload["training_config"]),
        loss_history=tuple(payload.get("loss_history", ())),
    )


def load_external_predictions(
    path: str | Path, corpus: LabeledCorpus
) -> tuple[dict[str, dict[str, float]], list[str]]:
    """Read black-box predictions from JSONL and resolve them against a corpus.

    Each line is ``{"id": ..., "probabilities": {class: p, ...}}``. Returns
    the resolved id-to-probabilities map plus the list of ids that did not
    match any corpus document. Duplicate ids and out-of-range probabilities
    are errors.
    """
    known = {doc.id for doc in corpus}
    resolved: dict[str, dict[str, float]] = {}
    unresolved: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            doc_id = record.get("id")
            probs = record.get("probabilities")
            if not isinstance(doc_id, str) or not isinstance(probs, dict):
                raise ValueError(f"{path}: line {lineno}: expected {{'id', 'probabilities'}}")
            for name, p in probs.items():
                if not isinstance(p, (int, float)) or math.isnan(p) or not 0.0 <= p <= 1.0:
                    raise ValueError(f"{path}: line {lineno}: probability for {name!r} outside [0, 1]")
            if doc_id in resolved or (doc_id in unresolved):
                raise ValueError(f"{path}: line {lineno}: duplicate id {doc_id!r}")
            if doc_id in known:
                resolved[doc_id] = {str(k): float(v) for k, v in probs.items()}
            else:
                unresolved.append(doc_id)
    return resolved, unresolved


PredictFn = Callable[[Sequence[str]], dict[str, float]]


def as_predict_fn(model: LinearModel) -> PredictFn:
    """Adapter exposing a model as a black-box token-list scorer."""
    return lambda tokens: predict_tokens(model, tokens)
