"""Word-embedding tables and hypernym lexicons for replacement strategies.

Embeddings use the standard space-separated text layout (word followed by a
fixed number of float components per line). Nearest-neighbor queries are an
exact brute-force cosine scan, which keeps them trivially verifiable.
Hypernym lexicons are flat two-column TSV maps from a word to its one
chosen more-general term.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    words: tuple[str, ...]
    matrix: np.ndarray  # len(words) x dimension
    index: dict[str, int]

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.index

    def vector(self, word: str) -> np.ndarray:
        idx = self.index.get(word.lower())
        if idx is None:
            raise KeyError(word)
        return self.matrix[idx]


def make_embedding_table(vectors: dict[str, "np.ndarray | list[float]"]) -> EmbeddingTable:
    """Build a table from an in-memory word-to-vector map."""
    if not vectors:
        raise ValueError("embedding table may not be empty")
    words = tuple(vectors)
    matrix = np.array([np.asarray(vectors[w], dtype=float) for w in words])
    if matrix.ndim != 2:
        raise ValueError("all vectors must share one dimension")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("embedding components must be finite")
    index = {w.lower(): i for i, w in enumerate(words)}
    return EmbeddingTable(dimension=matrix.shape[1], words=words, matrix=matrix, index=index)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse a text embedding file: ``word c1 c2 ... cd`` per line, constant d.

    Duplicate words keep their first row (logged); dimension mismatches and
    non-numeric components raise :class:`ValueError` naming the line.
    """
    words: list[str] = []
    rows: list[np.ndarray] = []
    index: dict[str, int] = {}
    dimension = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                if not line.strip():
                    continue
                raise ValueError(f"{path}: line {lineno}: expected word followed by components")
            word, components = parts[0], parts[1:]
            if dimension is None:
                dimension = len(components)
            elif len(components) != dimension:
                raise ValueError(
                    f"{path}: line {lineno}: {len(components)} components, expected {dimension}"
                )
            try:
                vec = np.array([float(c) for c in components])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric component") from None
            key = word.lower()
            if key in index:
                logger.warning("%s: line %d: duplicate word %r, keeping first", path, lineno, word)
                continue
            index[key] = len(words)
            words.append(word)
            rows.append(vec)
    if dimension is None:
        raise ValueError(f"{path}: empty embedding file, dimension indeterminable")
    return EmbeddingTable(dimension=dimension, words=tuple(words), matrix=np.array(rows), index=index)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two equal-length non-zero vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"vector lengths differ: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine is undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def k_nearest(table: EmbeddingTable, word: str, k: int) -> list[str]:
    """The k words most cosine-similar to ``word``, excluding the word itself.

    Descending similarity, ties broken lexicographically; fewer than k are
    returned when the vocabulary is small. Unknown words raise
    :class:`KeyError`.
    """
    if k < 1:
        raise ValueError("k must be positive")
    key = word.lower()
    idx = table.index.get(key)
    if idx is None:
        raise KeyError(f"word not in embedding table: {word!r}")
    norms = np.linalg.norm(table.matrix, axis=1)
    query = table.matrix[idx]
    qnorm = norms[idx]
    if qnorm == 0.0:
        raise ValueError(f"zero vector for query word {word!r}")
    safe = np.where(norms == 0.0, 1.0, norms)
    sims = (table.matrix @ query) / (safe * qnorm)
    sims[norms == 0.0] = -np.inf
    candidates = [
        (-sims[i], table.words[i].lower(), table.words[i])
        for i in range(len(table.words))
        if i != idx
    ]
    candidates.sort()
    return [orig for _, _, orig in candidates[:k]]


@dataclass(frozen=True)
class HypernymLexicon:
    entries: dict[str, str]


def make_hypernym_lexicon(entries: dict[str, str]) -> HypernymLexicon:
    table = {}
    for word, hyper in entries.items():
        w, h = word.lower(), hyper.lower()
        if w == h:
            raise ValueError(f"hypernym entry maps {word!r} to itself")
        table[w] = h
    return HypernymLexicon(entries=table)


def load_hypernyms(path: str | Path) -> HypernymLexicon:
    """Load a word<TAB>hypernym lexicon; self-mappings are rejected."""
    entries: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected word<TAB>hypernym")
            word, hyper = parts[0].strip().lower(), parts[1].strip().lower()
            if word == hyper:
                raise ValueError(f"{path}: line {lineno}: {word!r} maps to itself")
            entries[word] = hyper
    return HypernymLexicon(entries=entries)


def hypernym(lexicon: HypernymLexicon, word: str) -> str | None:
    """The word's hypernym, or None when the lexicon has no entry."""
    return lexicon.entries.get(word.lower())
