"""ROUGE-N, ROUGE-L and summary-level ROUGE-LSum.

Tokenisation lowercases and splits on runs of non-alphanumeric characters.
Stemming is off by default; ``stem=True`` applies the Porter stemmer to
tokens longer than three characters (needs ``nltk``).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

from ..sentences import segment

METRICS = ("rouge1", "rouge2", "rougeL", "rougeLsum")

_TOKEN = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class RougeScore:
    metric: str
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, metric: str, precision: float, recall: float) -> "RougeScore":
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(metric, precision, recall, f1)


@lru_cache(maxsize=1)
def _stemmer():
    from nltk.stem import porter

    return porter.PorterStemmer()


def tokenize(text: str, stem: bool = False) -> list[str]:
    toks = _TOKEN.findall(text.lower())
    if stem:
        st = _stemmer()
        toks = [st.stem(t) if len(t) > 3 else t for t in toks]
    return toks


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(generated: str, reference: str, n: int = 1, stem: bool = False) -> RougeScore:
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = _ngrams(tokenize(generated, stem), n)
    ref = _ngrams(tokenize(reference, stem), n)
    overlap = sum((gen & ref).values())
    n_gen, n_ref = sum(gen.values()), sum(ref.values())
    return RougeScore.from_pr(
        f"rouge{n}",
        overlap / n_gen if n_gen else 0.0,
        overlap / n_ref if n_ref else 0.0,
    )


def lcs_table(a: list[str], b: list[str]) -> list[list[int]]:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        ai = a[i - 1]
        row, prev = table[i], table[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
    return table


def lcs_indices(ref: list[str], gen: list[str]) -> list[int]:
    """Indices into ``ref`` of one LCS.

    Traceback from the end; on a length tie the step goes back in ``ref``.
    """
    t = lcs_table(ref, gen)
    i, j = len(ref), len(gen)
    hits = []
    while i > 0 and j > 0:
        if ref[i - 1] == gen[j - 1]:
            hits.append(i - 1)
            i -= 1
            j -= 1
        elif t[i][j - 1] > t[i - 1][j]:
            j -= 1
        else:
            i -= 1
    hits.reverse()
    return hits


def rouge_l(generated: str, reference: str, stem: bool = False) -> RougeScore:
    gen, ref = tokenize(generated, stem), tokenize(reference, stem)
    if not gen or not ref:
        return RougeScore("rougeL", 0.0, 0.0, 0.0)
    lcs = lcs_table(ref, gen)[-1][-1]
    return RougeScore.from_pr("rougeL", lcs / len(gen), lcs / len(ref))


def _sentences(text: str, stem: bool) -> list[list[str]]:
    return [t for t in (tokenize(s, stem) for s in segment(text)) if t]


def rouge_lsum(generated: str, reference: str, stem: bool = False) -> RougeScore:
    """Union-LCS per reference sentence, with hits clipped by token counts."""
    gen_sents, ref_sents = _sentences(generated, stem), _sentences(reference, stem)
    n_gen = sum(map(len, gen_sents))
    n_ref = sum(map(len, ref_sents))
    if not n_gen or not n_ref:
        return RougeScore("rougeLsum", 0.0, 0.0, 0.0)
    gen_left = Counter(t for s in gen_sents for t in s)
    ref_left = Counter(t for s in ref_sents for t in s)
    hits = 0
    for ref in ref_sents:
        union = sorted(set().union(*(lcs_indices(ref, g) for g in gen_sents)))
        for idx in union:
            tok = ref[idx]
            if gen_left[tok] > 0 and ref_left[tok] > 0:
                hits += 1
                gen_left[tok] -= 1
                ref_left[tok] -= 1
    return RougeScore.from_pr("rougeLsum", hits / n_gen, hits / n_ref)


def score_all(generated: str, reference: str, stem: bool = False) -> dict[str, RougeScore]:
    return {
        "rouge1": rouge_n(generated, reference, 1, stem),
        "rouge2": rouge_n(generated, reference, 2, stem),
        "rougeL": rouge_l(generated, reference, stem),
        "rougeLsum": rouge_lsum(generated, reference, stem),
    }
