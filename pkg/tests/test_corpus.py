from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhcsum.corpus import (
    Admission,
    Document,
    IngestStats,
    assemble_source,
    clean_note,
    extract_bhc_section,
    ingest_record,
    load_corpus,
    make_splits,
    save_corpus,
)
from bhcsum.errors import EmptyAdmission, TooFewAdmissions

T0 = datetime(2021, 3, 1, tzinfo=timezone.utc)


def doc(doc_id, text, minutes=0, category="nursing"):
    return Document(doc_id, category, "A1", T0 + timedelta(minutes=minutes), text)


class TestBHCExtraction:
    def test_body_between_headers(self):
        text = "Admission Date: x\n\nBrief Hospital Course:\nPt admitted with...\n\nMedications on Discharge:\n1. aspirin"
        assert extract_bhc_section(text) == "Pt admitted with..."

    def test_no_header(self):
        assert extract_bhc_section("Discharge Medications:\n1. aspirin") is None

    def test_empty_body_is_absent(self):
        assert extract_bhc_section("Brief Hospital Course:\n\nDischarge Medications:\nnone") is None

    def test_runs_to_end_of_note(self):
        assert extract_bhc_section("hospital course: Stable throughout.") == "Stable throughout."

    def test_case_insensitive_and_custom_patterns(self):
        text = "COURSE IN HOSPITAL\nImproved.\n"
        assert extract_bhc_section(text) is None
        assert extract_bhc_section(text, [r"course in hospital"]) == "Improved."

    def test_colon_lines_inside_body_do_not_end_it(self):
        text = "Brief Hospital Course:\n# Hypoxia: resolved with oxygen.\nStable.\n\nDischarge Disposition:\nHome"
        assert extract_bhc_section(text) == "# Hypoxia: resolved with oxygen.\nStable."


class TestCleanNote:
    def test_confidential_banner(self):
        assert clean_note("*** CONFIDENTIAL ***\nPt stable.") == "Pt stable."

    def test_identity_without_boilerplate(self):
        assert clean_note("Pt stable.") == "Pt stable."

    def test_all_boilerplate(self):
        assert clean_note("*** CONFIDENTIAL ***\nPage 1 of 2") == ""

    def test_whitespace_collapsed_paragraphs_kept(self):
        assert clean_note("a   b\n c\n\n\nd\te") == "a b c\n\nd e"

    @given(st.text(alphabet="ab .*\n\t[]", max_size=60))
    def test_idempotent(self, text):
        once = clean_note(text)
        assert clean_note(once) == once


class TestAssembleSource:
    def test_head_tail_truncation(self):
        body = " ".join(f"Sentence number {i}." for i in range(1200))
        recs = assemble_source(Admission("A", [doc("d1", body)]))
        assert len(recs) == 1000
        texts = [r.text for r in recs]
        assert texts[:500] == [f"Sentence number {i}." for i in range(500)]
        assert texts[500:] == [f"Sentence number {i}." for i in range(700, 1200)]
        assert [r.position for r in recs] == list(range(500)) + list(range(700, 1200))

    def test_exactly_at_limit_is_not_truncated(self):
        body = " ".join(f"Item {i}." for i in range(10))
        recs = assemble_source(Admission("A", [doc("d1", body)]), max_sentences=10)
        assert [r.position for r in recs] == list(range(10))

    def test_under_limit_keeps_order(self):
        recs = assemble_source(Admission("A", [doc("d1", "One. Two."), doc("d2", "Three.", 5)]))
        assert [(r.doc_id, r.text) for r in recs] == [("d1", "One."), ("d1", "Two."), ("d2", "Three.")]

    def test_ingestion_order_does_not_matter(self):
        a = Admission("A", [doc("d1", "First.", 0), doc("d2", "Second.", 10)])
        b = Admission("A", [doc("d2", "Second.", 10), doc("d1", "First.", 0)])
        assert [r.text for r in assemble_source(a)] == [r.text for r in assemble_source(b)]

    def test_timestamp_tie_broken_by_doc_id(self):
        adm = Admission("A", [doc("z", "Later id."), doc("a", "Earlier id.")])
        assert [r.doc_id for r in assemble_source(adm)] == ["a", "z"]

    def test_empty_admission(self):
        with pytest.raises(EmptyAdmission):
            assemble_source(Admission("A", [doc("d1", "   ")]))

    @pytest.mark.parametrize("limit", [0, 3, -2])
    def test_bad_limit(self, limit):
        with pytest.raises(ValueError):
            assemble_source(Admission("A", [doc("d1", "x.")]), max_sentences=limit)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 40), st.sampled_from([2, 4, 10, 20]))
    def test_length_bound(self, n, limit):
        body = " ".join(f"S{i} here." for i in range(n))
        recs = assemble_source(Admission("A", [doc("d1", body)]), max_sentences=limit)
        assert len(recs) == min(n, limit)


class TestSplits:
    @pytest.mark.parametrize("n,counts", [(100, (80, 10, 10)), (10, (8, 1, 1)), (37, (31, 3, 3))])
    def test_proportions(self, n, counts):
        s = make_splits([f"id{i}" for i in range(n)], seed=1)
        assert (len(s.train), len(s.validation), len(s.test)) == counts

    def test_partition_and_determinism(self):
        ids = [f"id{i}" for i in range(53)]
        a, b = make_splits(ids, 4), make_splits(list(reversed(ids)), 4)
        assert a == b
        everything = a.train + a.validation + a.test
        assert sorted(everything) == sorted(ids) and len(set(everything)) == len(ids)

    def test_too_few(self):
        with pytest.raises(TooFewAdmissions):
            make_splits([f"id{i}" for i in range(9)], 0)


def raw_record(adm_id="A1", discharge="Brief Hospital Course:\nDid well.\n\nDischarge Medications:\nnone"):
    return {
        "admission_id": adm_id,
        "documents": [
            {"doc_id": "n2", "category": "nursing", "author_id": "x", "timestamp": "2021-01-02T00:00:00Z", "text": "Later note."},
            {"doc_id": "n1", "category": "physician", "author_id": "y", "timestamp": "2021-01-01T00:00:00Z", "text": "*** CONFIDENTIAL ***\nFirst note."},
            {"doc_id": "ds", "category": "discharge", "author_id": "y", "timestamp": "2021-01-03T00:00:00Z", "text": discharge},
            {"doc_id": "e", "category": "nursing", "author_id": "y", "timestamp": "2021-01-01T06:00:00Z", "text": "Page 1 of 1"},
        ],
        "discharge_summary": discharge,
    }


class TestIngest:
    def test_record_to_admission(self):
        stats = IngestStats()
        adm = ingest_record(raw_record(), stats=stats)
        assert adm.reference_bhc == "Did well."
        assert [d.doc_id for d in adm.documents] == ["n1", "n2"]
        assert adm.documents[0].text == "First note."
        assert stats.kept == 1 and stats.dropped_documents == 2

    def test_discharge_summary_never_in_sources(self):
        adm = ingest_record(raw_record())
        assert all(d.category != "discharge" for d in adm.documents)
        assert all("Did well" not in d.text for d in adm.documents)

    def test_missing_bhc_dropped(self):
        stats = IngestStats()
        assert ingest_record(raw_record(discharge="Discharge Medications: none"), stats=stats) is None
        assert stats.no_bhc == 1 and stats.dropped_ids == ["A1"]

    def test_jsonl_round_trip(self, tmp_path):
        adm = ingest_record(raw_record())
        save_corpus(tmp_path / "c.jsonl", [adm])
        back = load_corpus(tmp_path / "c.jsonl")
        assert back[0].to_json() == adm.to_json()
        assert "discharge_summary" not in (tmp_path / "c.jsonl").read_text()
