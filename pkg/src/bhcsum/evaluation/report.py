"""Run-level evaluation: corpus means, per-admission rows, JSON/CSV output."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

from ..concepts import ConceptDictionary, extract, term_stats
from ..errors import MissingReference
from .coverage import concept_coverage
from .rouge import METRICS, score_all

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["run_id", "metrics", "per_admission"],
    "properties": {
        "run_id": {"type": "string"},
        "metrics": {
            "type": "object",
            "required": ["rouge", "concept_coverage", "term_stats", "n_admissions"],
            "properties": {
                "n_admissions": {"type": "integer", "minimum": 0},
                "rouge": {
                    "type": "object",
                    "required": list(METRICS),
                    "additionalProperties": {
                        "type": "object",
                        "required": ["precision", "recall", "f1"],
                        "properties": {
                            k: {"type": "number", "minimum": 0, "maximum": 1}
                            for k in ("precision", "recall", "f1")
                        },
                    },
                },
                "concept_coverage": {
                    "type": "object",
                    "properties": {
                        k: {"type": ["number", "null"], "minimum": 0, "maximum": 100}
                        for k in ("pct_problem", "pct_intervention", "pct_total")
                    },
                },
                "term_stats": {"type": "object"},
            },
        },
        "per_admission": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["admission_id", "rouge", "concept_coverage"],
            },
        },
    },
}


@dataclass
class EvalReport:
    run_id: str
    rouge: dict[str, dict[str, float]]
    concept_coverage: dict[str, float | None]
    term_stats: dict[str, float | None]
    per_admission: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "metrics": {
                "n_admissions": len(self.per_admission),
                "rouge": self.rouge,
                "concept_coverage": self.concept_coverage,
                "term_stats": self.term_stats,
            },
            "per_admission": self.per_admission,
        }

    def write(self, out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path = out_dir / f"{stem}.json"
        csv_path = out_dir / f"{stem}.csv"
        json_path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "precision", "recall", "f1"])
            for metric in METRICS:
                s = self.rouge[metric]
                writer.writerow([metric, _fmt(s["precision"]), _fmt(s["recall"]), _fmt(s["f1"])])
        return json_path, csv_path


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _mean(values):
    vals = [v for v in values if v is not None]
    return sum(vals) / len(vals) if vals else None


def evaluate_run(
    outputs: Mapping[str, str],
    references: Mapping[str, str],
    dictionary: ConceptDictionary | None = None,
    run_id: str = "run",
    stem: bool = False,
) -> EvalReport:
    """Score every output against its reference and average per admission."""
    missing = sorted(set(outputs) - set(references))
    if missing:
        raise MissingReference(f"no reference for admissions: {missing[:5]}{'...' if len(missing) > 5 else ''}")
    rows = []
    for adm_id in sorted(outputs):
        gen, ref = outputs[adm_id], references[adm_id]
        scores = score_all(gen, ref, stem)
        row = {
            "admission_id": adm_id,
            "rouge": {m: {"precision": s.precision, "recall": s.recall, "f1": s.f1} for m, s in scores.items()},
            "concept_coverage": {},
            "term_stats": {},
        }
        if dictionary is not None:
            row["concept_coverage"] = asdict(concept_coverage(gen, ref, dictionary))
            ts = term_stats(gen, extract(gen, dictionary))
            row["term_stats"] = asdict(ts)
        rows.append(row)

    rouge = {
        m: {k: _mean(r["rouge"][m][k] for r in rows) or 0.0 for k in ("precision", "recall", "f1")}
        for m in METRICS
    }
    cov_keys = ("pct_problem", "pct_intervention", "pct_total")
    coverage = {k: _mean(r["concept_coverage"].get(k) for r in rows) for k in cov_keys}
    ts_keys = ("n_terms", "n_unique_terms", "term_density", "unique_term_density")
    stats = {f"mean_{k}": _mean(r["term_stats"].get(k) for r in rows) for k in ts_keys}
    return EvalReport(run_id, rouge, coverage, stats, rows)
