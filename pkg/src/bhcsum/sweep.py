"""Top-k sentence-limit sweeps for extractive rankers."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .evaluation.rouge import rouge_lsum, rouge_n
from .extractive import RankedSentence, select_top_k
from .sentences import SentenceRecord

DEFAULT_KS = (1, 2, 3, 5, 10, 15)
SWEEP_METRICS = ("rouge1", "rouge2", "rougeLsum")

RankFn = Callable[[Sequence[SentenceRecord], str], list[RankedSentence]]


@dataclass(frozen=True)
class SweepRow:
    k: int
    metric: str
    precision: float
    recall: float
    f1: float


@dataclass
class SweepTable:
    system: str
    rows: list[SweepRow]

    def get(self, k: int, metric: str = "rougeLsum") -> SweepRow:
        for r in self.rows:
            if r.k == k and r.metric == metric:
                return r
        raise KeyError((k, metric))

    @property
    def ks(self) -> list[int]:
        return sorted({r.k for r in self.rows})

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "metric", "precision", "recall", "f1"])
            for r in self.rows:
                w.writerow([r.k, r.metric, f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.f1:.6f}"])

    def to_json(self) -> dict:
        return {
            "system": self.system,
            "rows": [
                {"k": r.k, "metric": r.metric, "precision": r.precision, "recall": r.recall, "f1": r.f1}
                for r in self.rows
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sweep_sentence_limits(
    rank: RankFn,
    admissions: Iterable[tuple[Sequence[SentenceRecord], str]],
    ks: Sequence[int] = DEFAULT_KS,
    system: str = "system",
) -> SweepTable:
    """Mean ROUGE-1/2/LSum of the top-k selection for each k.

    ``rank`` gets the source sentences and the reference (only the Oracle
    looks at the latter), and the ranking is computed once per admission.
    """
    ks = sorted(set(ks))
    if not ks or ks[0] < 1:
        raise ValueError("k values must be >= 1")
    sums = {(k, m): [0.0, 0.0, 0.0] for k in ks for m in SWEEP_METRICS}
    n = 0
    for records, reference in admissions:
        ranked = rank(records, reference)
        n += 1
        for k in ks:
            text = select_top_k(ranked, k).text
            scores = {
                "rouge1": rouge_n(text, reference, 1),
                "rouge2": rouge_n(text, reference, 2),
                "rougeLsum": rouge_lsum(text, reference),
            }
            for m, s in scores.items():
                acc = sums[(k, m)]
                acc[0] += s.precision
                acc[1] += s.recall
                acc[2] += s.f1
    if n == 0:
        raise ValueError("no admissions to sweep")
    rows = [SweepRow(k, m, *(v / n for v in sums[(k, m)])) for k in ks for m in SWEEP_METRICS]
    return SweepTable(system, rows)
