"""Sentence segmentation and sentence-embedding backends."""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

MEAN_STATIC = "mean_static_word_vectors"
CONTEXTUAL = "contextual_sentence_encoder"

# Lowercased tokens (without the final period) that never end a sentence.
ABBREVIATIONS = frozenset(
    """
    dr mr mrs ms prof st vs approx etc e.g i.e b.i.d t.i.d q.i.d q.d p.o p.r
    i.v i.m s.c o.d prn no nos fig ref
    """.split()
)

_CANDIDATE = re.compile(r"[.!?]+[\"')\]]*(?=\s)")
_TOKEN = re.compile(r"\w+")


@dataclass
class SentenceRecord:
    admission_id: str
    doc_id: str
    position: int
    text: str
    embedding: np.ndarray | None = None


def _ends_with_abbreviation(text: str, dot_index: int) -> bool:
    if text[dot_index] != ".":
        return False
    start = dot_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start:dot_index].lower().lstrip("(\"'[")
    return word in ABBREVIATIONS or (len(word) == 1 and word.isalpha())


def segment(text: str) -> list[str]:
    """Split on terminal punctuation followed by whitespace and a capital or digit.

    Blank lines always separate sentences. Periods after known clinical
    abbreviations (``Dr.``, ``b.i.d.``) or single-letter initials do not.
    """
    sentences = []
    for block in re.split(r"\n\s*\n", text):
        start = 0
        for m in _CANDIDATE.finditer(block):
            nxt = m.end()
            while nxt < len(block) and block[nxt].isspace():
                nxt += 1
            if nxt >= len(block):
                continue
            if not (block[nxt].isupper() or block[nxt].isdigit()):
                continue
            if _ends_with_abbreviation(block, m.start()):
                continue
            piece = block[start : m.end()].strip()
            if piece:
                sentences.append(" ".join(piece.split()))
            start = nxt
        piece = block[start:].strip()
        if piece:
            sentences.append(" ".join(piece.split()))
    return sentences


def word_tokens(sentence: str) -> list[str]:
    return [t.lower() for t in _TOKEN.findall(sentence)]


@dataclass
class EmbeddingResult:
    vectors: np.ndarray
    all_oov: list[bool]


class EmbeddingBackend:
    name: str = "backend"
    kind: str = MEAN_STATIC
    dimension: int = 0

    def embed(self, sentence: str) -> tuple[np.ndarray, bool]:
        raise NotImplementedError


class MeanWordVectors(EmbeddingBackend):
    """Arithmetic mean of in-vocabulary static word vectors."""

    kind = MEAN_STATIC

    def __init__(self, vectors: dict[str, np.ndarray], name: str = "mean-word-vectors"):
        if not vectors:
            raise ValueError("empty word-vector table")
        dims = {v.shape[0] for v in vectors.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent word-vector dimensions: {sorted(dims)}")
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in vectors.items()}
        self.dimension = dims.pop()
        self.name = name

    def embed(self, sentence):
        hits = [self.vectors[t] for t in word_tokens(sentence) if t in self.vectors]
        if not hits:
            return np.zeros(self.dimension), True
        return np.mean(hits, axis=0), False

    @classmethod
    def from_file(cls, path: str | Path) -> "MeanWordVectors":
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                try:
                    vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad vector entry") from exc
        return cls(vectors, name=Path(path).stem)

    def to_file(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for token in sorted(self.vectors):
                fh.write(token + " " + " ".join(repr(float(x)) for x in self.vectors[token]) + "\n")


def hashed_word_vectors(vocabulary: Iterable[str], dimension: int = 50, seed: int = 0) -> dict[str, np.ndarray]:
    """Deterministic pseudo-random unit vectors, one per token (desk-scale fixtures)."""
    table = {}
    for token in sorted(set(vocabulary)):
        digest = hashlib.sha256(f"{seed}:{token}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        v = rng.standard_normal(dimension)
        table[token] = np.round(v / np.linalg.norm(v), 8)
    return table


STOPWORDS = frozenset(
    "a an and as at be by for from had has in is of on over that the this to under was with".split()
)


def corpus_word_vectors(
    texts: Iterable[str], dimension: int = 50, seed: int = 0, stopwords: Iterable[str] = STOPWORDS
) -> MeanWordVectors:
    """Hashed vectors for every non-stopword token seen in ``texts``."""
    stop = set(stopwords)
    vocab = {t for text in texts for t in word_tokens(text)} - stop
    if not vocab:
        raise ValueError("no tokens to build word vectors from")
    return MeanWordVectors(hashed_word_vectors(vocab, dimension, seed), name=f"hashed-{dimension}")


class HashSentenceEncoder(EmbeddingBackend):
    """Stand-in for a contextual sentence encoder.

    Maps a sentence to a fixed vector from hashed word uni- and bigrams, so
    word order has some effect. Any callable ``str -> vector`` can be wrapped
    with :class:`CallableEncoder` instead.
    """

    kind = CONTEXTUAL

    def __init__(self, dimension: int = 50, seed: int = 0):
        self.dimension = dimension
        self.seed = seed
        self.name = f"hash-encoder-{dimension}"

    def _feature(self, key: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{key}".encode()).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "little")).standard_normal(self.dimension)

    def embed(self, sentence):
        toks = word_tokens(sentence)
        if not toks:
            return np.zeros(self.dimension), True
        feats = [self._feature(t) for t in toks]
        feats += [0.5 * self._feature(a + " " + b) for a, b in zip(toks, toks[1:])]
        v = np.sum(feats, axis=0)
        return np.tanh(v / np.sqrt(len(feats))), False


class CallableEncoder(EmbeddingBackend):
    kind = CONTEXTUAL

    def __init__(self, fn: Callable[[str], Sequence[float]], dimension: int, name: str = "callable-encoder"):
        self.fn = fn
        self.dimension = dimension
        self.name = name

    def embed(self, sentence):
        v = np.asarray(self.fn(sentence), dtype=np.float64)
        if v.shape != (self.dimension,):
            raise ValueError(f"encoder returned shape {v.shape}, expected ({self.dimension},)")
        return v, False


def embed_sentences(sentences: Sequence[str], backend: EmbeddingBackend) -> EmbeddingResult:
    if not sentences:
        return EmbeddingResult(np.zeros((0, backend.dimension)), [])
    rows, flags = [], []
    for s in sentences:
        v, oov = backend.embed(s)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite embedding for sentence {s[:40]!r}")
        rows.append(v)
        flags.append(oov)
    if any(flags):
        log.warning("%d of %d sentences had no in-vocabulary tokens", sum(flags), len(flags))
    return EmbeddingResult(np.vstack(rows), flags)


def attach_embeddings(records: list[SentenceRecord], backend: EmbeddingBackend) -> list[SentenceRecord]:
    result = embed_sentences([r.text for r in records], backend)
    for rec, vec in zip(records, result.vectors):
        rec.embedding = vec
    return records
