"""Sentence ranking and top-k extractive summaries.

Three rankers share one output shape (:class:`RankedSentence`): TextRank over
the sentence-similarity graph, a reference-aware Oracle using Gestalt
pattern matching, and the trained recurrent ranker in :mod:`bhcsum.ranker`.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sentences import SentenceRecord, segment

log = logging.getLogger(__name__)


@dataclass
class RankedSentence:
    record: SentenceRecord
    score: float
    rank: int


@dataclass
class ExtractiveSummary:
    admission_id: str
    k: int
    sentences: list[SentenceRecord]

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


def rank_by_scores(records: Sequence[SentenceRecord], scores: Sequence[float]) -> list[RankedSentence]:
    """Descending score; equal scores keep the earlier position first."""
    if len(records) != len(scores):
        raise ValueError("one score per sentence required")
    order = sorted(range(len(records)), key=lambda i: (-float(scores[i]), records[i].position))
    return [RankedSentence(records[i], float(scores[i]), r + 1) for r, i in enumerate(order)]


def select_top_k(ranked: Sequence[RankedSentence], k: int) -> ExtractiveSummary:
    if k < 1:
        raise ValueError("k must be >= 1")
    best = sorted(ranked, key=lambda r: r.rank)[:k]
    chosen = sorted((r.record for r in best), key=lambda rec: rec.position)
    adm = chosen[0].admission_id if chosen else ""
    return ExtractiveSummary(adm, k, chosen)


# -- Gestalt pattern matching -------------------------------------------------


def _longest_match(a, b, alo, ahi, blo, bhi):
    """Longest common block in a[alo:ahi], b[blo:bhi].

    Among equally long blocks the one starting earliest in ``a`` wins, then
    earliest in ``b``.
    """
    best_i, best_j, best_k = alo, blo, 0
    prev: dict[int, int] = {}
    for i in range(alo, ahi):
        cur: dict[int, int] = {}
        ai = a[i]
        for j in range(blo, bhi):
            if b[j] != ai:
                continue
            k = prev.get(j - 1, 0) + 1
            cur[j] = k
            if k > best_k:
                best_i, best_j, best_k = i - k + 1, j - k + 1, k
        prev = cur
    return best_i, best_j, best_k


def matched_tokens(a: Sequence[str], b: Sequence[str]) -> int:
    """Tokens covered by the recursive longest-matching-block decomposition."""
    total = 0
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        i, j, k = _longest_match(a, b, alo, ahi, blo, bhi)
        if k:
            total += k
            if alo < i and blo < j:
                stack.append((alo, i, blo, j))
            if i + k < ahi and j + k < bhi:
                stack.append((i + k, ahi, j + k, bhi))
    return total


def gestalt_ratio(a: Sequence[str], b: Sequence[str]) -> float:
    """2M / (|a| + |b|); two empty sequences count as identical."""
    if not a and not b:
        return 1.0
    return 2.0 * matched_tokens(a, b) / (len(a) + len(b))


def oracle_scores(source: Sequence[SentenceRecord], reference: str) -> list[float]:
    ref_sents = [s.split() for s in segment(reference)]
    if not ref_sents:
        raise ValueError("reference has no sentences")
    return [max(gestalt_ratio(rec.text.split(), r) for r in ref_sents) for rec in source]


def oracle_rank(source: Sequence[SentenceRecord], reference: str) -> list[RankedSentence]:
    return rank_by_scores(source, oracle_scores(source, reference))


def oracle_labels(source: Sequence[SentenceRecord], reference: str, k: int = 15) -> np.ndarray:
    """Binary relevance: top-k Oracle membership with a non-zero score."""
    index = {id(rec): i for i, rec in enumerate(source)}
    labels = np.zeros(len(source), dtype=np.float32)
    for r in oracle_rank(source, reference)[:k]:
        if r.score > 0:
            labels[index[id(r.record)]] = 1.0
    return labels


# -- TextRank ----------------------------------------------------------------


@dataclass
class TextRankResult:
    scores: np.ndarray
    converged: bool
    iterations: int


def cosine_similarity(embeddings: np.ndarray) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = x / safe[:, None]
    sim = unit @ unit.T
    sim[norms == 0, :] = 0.0
    sim[:, norms == 0] = 0.0
    return sim


def transition_matrix(similarity: np.ndarray) -> np.ndarray:
    """Row-stochastic matrix: negatives clamped, self-loops dropped, empty rows uniform."""
    w = np.clip(np.asarray(similarity, dtype=np.float64), 0.0, None)
    np.fill_diagonal(w, 0.0)
    n = w.shape[0]
    sums = w.sum(axis=1)
    out = np.empty_like(w)
    for i in range(n):
        out[i] = w[i] / sums[i] if sums[i] > 0 else 1.0 / n
    return out


def textrank_from_similarity(
    similarity: np.ndarray, damping: float = 0.85, tol: float = 1e-6, max_iter: int = 200
) -> TextRankResult:
    sim = np.asarray(similarity, dtype=np.float64)
    n = sim.shape[0]
    if n == 0:
        raise ValueError("need at least one sentence")
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    m_t = transition_matrix(sim).T
    p = np.full(n, 1.0 / n)
    for it in range(1, max_iter + 1):
        nxt = (1.0 - damping) / n + damping * (m_t @ p)
        nxt /= nxt.sum()
        delta = np.max(np.abs(nxt - p))
        p = nxt
        if delta < tol:
            return TextRankResult(p, True, it)
    log.warning("TextRank did not converge in %d iterations", max_iter)
    return TextRankResult(p, False, max_iter)


def textrank_scores(
    embeddings: np.ndarray, damping: float = 0.85, tol: float = 1e-6, max_iter: int = 200
) -> TextRankResult:
    return textrank_from_similarity(cosine_similarity(np.atleast_2d(embeddings)), damping, tol, max_iter)


def textrank_rank(records: Sequence[SentenceRecord], **kwargs) -> list[RankedSentence]:
    emb = np.vstack([r.embedding for r in records])
    return rank_by_scores(records, textrank_scores(emb, **kwargs).scores)


def random_rank(records: Sequence[SentenceRecord], seed: int) -> list[RankedSentence]:
    rng = random.Random(seed)
    scores = [rng.random() for _ in records]
    return rank_by_scores(records, scores)
