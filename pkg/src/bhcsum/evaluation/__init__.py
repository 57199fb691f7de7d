from .coverage import ConceptCoverage, concept_coverage
from .report import REPORT_SCHEMA, EvalReport, evaluate_run
from .rouge import METRICS, RougeScore, rouge_l, rouge_lsum, rouge_n, score_all, tokenize

__all__ = [
    "ConceptCoverage",
    "concept_coverage",
    "REPORT_SCHEMA",
    "EvalReport",
    "evaluate_run",
    "METRICS",
    "RougeScore",
    "rouge_l",
    "rouge_lsum",
    "rouge_n",
    "score_all",
    "tokenize",
]
