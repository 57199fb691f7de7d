"""Acceptance criteria, one test per criterion.

Each test carries ``@pytest.mark.criterion(n, title)``; the terminal summary
prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import random
import time
from dataclasses import replace

import numpy as np
import pytest
import torch

from bhcsum.abstractive import (
    ModelConfig,
    Seq2Seq,
    TrainConfig,
    TrainingExample,
    build_examples,
    corpus_texts,
    decode_batch,
    encode_source,
    generate,
    train,
)
from bhcsum.abstractive.generate import GREEDY
from bhcsum.abstractive.train import batch_loss
from bhcsum.concepts import extract, term_stats
from bhcsum.corpus import assemble_source, make_splits
from bhcsum.ensemble import EnsembleConfig, summarise
from bhcsum.errors import MisalignedGuidance
from bhcsum.evaluation import concept_coverage, rouge_l, rouge_lsum, rouge_n
from bhcsum.extractive import (
    gestalt_ratio,
    oracle_labels,
    oracle_rank,
    oracle_scores,
    random_rank,
    select_top_k,
    textrank_from_similarity,
    textrank_rank,
)
from bhcsum.guidance import PROBLEM_AND_INTERVENTION, PROBLEM_ONLY, build_guidance, shuffled_guidance
from bhcsum.ranker import RankerConfig, train_ranker
from bhcsum.seeding import derive_seed
from bhcsum.sentences import SentenceRecord, attach_embeddings, corpus_word_vectors, segment
from bhcsum.synthetic import generate_synthetic_corpus
from bhcsum.tokenizer import BPETokenizer

import oracles
from pipeline import run_pipeline

KS = (1, 2, 3, 5, 10, 15)
SEED = 7


# -- 1 ---------------------------------------------------------------------------


def random_text(rng: random.Random, max_tokens: int = 30) -> str:
    vocab = ["fever", "cough", "pt", "stable", "iv", "fluids", "improved", "the", "on", "with", "."]
    n = rng.randint(0, max_tokens)
    words = [rng.choice(vocab) for _ in range(n)]
    return " ".join(words)


@pytest.mark.criterion(1, "ROUGE-1/2/L/LSum equal brute-force oracles on 200 pairs within 1e-9, under 10 s")
def test_rouge_oracle_equivalence():
    rng = random.Random(SEED)
    pairs = [(random_text(rng), random_text(rng)) for _ in range(200)]
    start = time.perf_counter()
    ours = [
        [rouge_n(g, r, 1), rouge_n(g, r, 2), rouge_l(g, r), rouge_lsum(g, r)]
        for g, r in pairs
    ]
    elapsed = time.perf_counter() - start
    worst = 0.0
    for (g, r), scores in zip(pairs, ours):
        expected = [
            oracles.brute_rouge_n(g, r, 1),
            oracles.brute_rouge_n(g, r, 2),
            oracles.brute_rouge_l(g, r),
            oracles.brute_rouge_lsum(segment(g), segment(r)),
        ]
        for s, e in zip(scores, expected):
            worst = max(worst, *(abs(a - b) for a, b in zip((s.precision, s.recall, s.f1), e)))
    assert worst <= 1e-9
    assert elapsed < 10.0


# -- 2 ---------------------------------------------------------------------------


@pytest.mark.criterion(2, "Gestalt ratio equals recursive longest-block reference exactly on 500 pairs")
def test_gestalt_oracle_equivalence():
    assert round(gestalt_ratio(["a", "b", "c"], ["a", "b", "d"]), 4) == 0.6667
    rng = random.Random(SEED)
    for _ in range(500):
        a = [rng.choice("abcde") for _ in range(rng.randint(0, 20))]
        b = [rng.choice("abcde") for _ in range(rng.randint(1, 20))]
        expected = oracles.gestalt_ratio(a, b)
        assert gestalt_ratio(a, b) == expected
        # the same ratio through the Oracle scorer
        record = SentenceRecord("A", "d", 0, " ".join(a))
        assert oracle_scores([record], " ".join(b)) == [expected]


# -- 3 ---------------------------------------------------------------------------


@pytest.mark.criterion(3, "TextRank matches dense power-iteration oracle within 1e-6, sums to 1")
def test_textrank_oracle():
    rng = np.random.default_rng(SEED)
    for _ in range(50):
        n = int(rng.integers(1, 13))
        x = rng.normal(size=(n, 6))
        sim = x @ x.T
        if rng.random() < 0.3:
            sim[:, 0] = sim[0, :] = 0.0  # an isolated sentence
        res = textrank_from_similarity(sim)
        assert res.converged
        assert abs(res.scores.sum() - 1.0) <= 1e-9
        np.testing.assert_allclose(res.scores, oracles.dense_power_iteration(sim), rtol=0, atol=1e-6)
        tight = textrank_from_similarity(sim, tol=1e-13, max_iter=5000)
        np.testing.assert_allclose(tight.scores, oracles.exact_stationary(sim), rtol=0, atol=1e-9)


# -- 4 ---------------------------------------------------------------------------


def max_relative_gradient_error(guided: bool) -> float:
    cfg = ModelConfig(50, d_model=8, n_heads=1, n_encoder_blocks=2, n_decoder_blocks=2, n_shared_encoder_blocks=1,
                      max_src_len=16, max_tgt_len=8, guided=guided, seed=3)
    model = Seq2Seq(cfg).double()
    gen = torch.Generator().manual_seed(0)
    with torch.no_grad():
        # move away from the symmetric initialisation so every path carries gradient
        for p in model.parameters():
            p.add_(torch.randn(p.shape, generator=gen, dtype=torch.float64) * 0.3)
    examples = [
        TrainingExample("a", [5, 6, 7, 8, 9, 10], [1, 11, 12, 13, 2], [0, 0, 7, 8, 0, 0] if guided else None),
        TrainingExample("b", [14, 15, 16, 17], [1, 18, 19, 2], [0, 15, 0, 0] if guided else None),
    ]

    def loss():
        with torch.no_grad():
            return float(batch_loss(model, examples)[0])

    model.zero_grad()
    batch_loss(model, examples)[0].backward()
    worst = 0.0
    for _, p in model.named_parameters():
        numeric = oracles.central_difference(loss, p)
        analytic = p.grad.numpy()
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        if scale > 0:
            worst = max(worst, np.linalg.norm(analytic - numeric) / scale)
    return worst


@pytest.mark.slow
@pytest.mark.criterion(4, "Analytic gradients match central differences (rel. error < 1e-3), plain and guided")
@pytest.mark.parametrize("guided", [False, True], ids=["plain", "guided"])
def test_gradient_check(guided):
    assert max_relative_gradient_error(guided) < 1e-3


# -- 5 ---------------------------------------------------------------------------


@pytest.mark.criterion(5, "Guidance length equals source length over the synthetic corpus; off-by-one rejected")
def test_alignment_invariant(dictionary):
    admissions = generate_synthetic_corpus(100, SEED, dictionary)
    tok = BPETokenizer.train(corpus_texts(admissions), vocab_size=1500)
    for adm in admissions:
        text = " ".join(r.text for r in assemble_source(adm))
        tokens = tok.encode(text)
        mentions = extract(text, dictionary)
        for kind in (PROBLEM_ONLY, PROBLEM_AND_INTERVENTION):
            assert len(build_guidance(tokens, mentions, kind, tok.pad_id)) == len(tokens)
            src, guide = encode_source(adm, tok, 512, dictionary, kind)
            assert len(src) == len(guide)

    model = Seq2Seq(ModelConfig(tok.vocab_size, d_model=16, n_heads=2, max_src_len=64, max_tgt_len=16, guided=True))
    src = torch.randint(4, tok.vocab_size, (1, 20))
    with pytest.raises(MisalignedGuidance):
        model(src, torch.ones(1, 3, dtype=torch.long), torch.zeros(1, 21, dtype=torch.long))
    with pytest.raises(MisalignedGuidance):
        generate(model, src[0].tolist(), [0] * 19)
    with pytest.raises(MisalignedGuidance):
        TrainingExample("x", src[0].tolist(), [1, 2], [0] * 21)


# -- 6 ---------------------------------------------------------------------------


@pytest.mark.criterion(6, "Encoder blocks 1-3 of both streams stay bitwise identical after 100 steps")
def test_shared_blocks_after_training():
    rng = random.Random(SEED)
    tok = BPETokenizer.train(["alpha bravo charlie delta echo foxtrot"], vocab_size=60)

    def example(i):
        ids = [rng.randrange(4, tok.vocab_size) for _ in range(10)]
        guide = [t if rng.random() < 0.3 else tok.pad_id for t in ids]
        return TrainingExample(f"E{i}", ids, [tok.bos_id] + ids[:4] + [tok.eos_id], guide)

    train_set = [example(i) for i in range(100)]
    cfg = ModelConfig(tok.vocab_size, d_model=16, n_heads=2, n_encoder_blocks=4, n_decoder_blocks=1,
                      n_shared_encoder_blocks=3, max_src_len=16, max_tgt_len=8, guided=True, seed=SEED)
    initial = Seq2Seq(cfg)
    model, state = train(cfg, train_set, train_set[:4], tok, TrainConfig(epochs=1, batch_size=1, warmup_steps=1))
    assert state.step == 100
    text, guide = model.encoder_stack("text"), model.encoder_stack("guidance")
    for depth in range(3):
        assert text[depth] is guide[depth]
        for (name, a), (_, b) in zip(text[depth].named_parameters(), guide[depth].named_parameters()):
            assert a.data_ptr() == b.data_ptr(), name
            assert torch.equal(a, b), name
    # training actually moved the shared parameters
    moved = [not torch.equal(a, b) for a, b in zip(text[0].parameters(), initial.encoder_stack("text")[0].parameters())]
    assert any(moved)
    assert text[3] is not guide[3]


# -- 7 ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def extractive_setup(dictionary):
    """200 admissions, a trained ranker, and held-out admissions with embeddings."""
    admissions = generate_synthetic_corpus(200, SEED, dictionary)
    splits = make_splits([a.admission_id for a in admissions], SEED)
    by_id = {a.admission_id: a for a in admissions}
    train_ids = set(splits.train)
    backend = corpus_word_vectors(
        [d.text for a in admissions if a.admission_id in train_ids for d in a.documents], 50, seed=SEED
    )
    records = {a.admission_id: attach_embeddings(assemble_source(a), backend) for a in admissions}
    refs = {i: by_id[i].reference_bhc for i in by_id}
    labelled = [(np.vstack([r.embedding for r in records[i]]), oracle_labels(records[i], refs[i])) for i in splits.train]
    ranker, _ = train_ranker(labelled, RankerConfig(input_dim=50, seed=SEED))
    return by_id, splits, records, refs, ranker


@pytest.mark.slow
@pytest.mark.criterion(7, "Oracle >= ranker >= TextRank >= random at every k; Oracle recall monotone; under 5 min")
def test_oracle_ceiling_ordering(extractive_setup):
    start = time.perf_counter()
    _, splits, records, refs, ranker = extractive_setup
    held_out = splits.validation + splits.test
    systems = {
        "oracle": lambda i: oracle_rank(records[i], refs[i]),
        "ranker": lambda i: ranker.rank(records[i]),
        "textrank": lambda i: textrank_rank(records[i]),
        "random": lambda i: random_rank(records[i], derive_seed(SEED, i)),
    }
    f1 = {name: [] for name in systems}
    oracle_recall = []
    for name, rank in systems.items():
        ranked = {i: rank(i) for i in held_out}
        for k in KS:
            scores = [rouge_lsum(select_top_k(ranked[i], k).text, refs[i]) for i in held_out]
            f1[name].append(np.mean([s.f1 for s in scores]))
            if name == "oracle":
                oracle_recall.append(np.mean([s.recall for s in scores]))
    for j, k in enumerate(KS):
        assert f1["oracle"][j] >= f1["ranker"][j] >= f1["textrank"][j] >= f1["random"][j], (k, {n: v[j] for n, v in f1.items()})
    assert all(b >= a for a, b in zip(oracle_recall, oracle_recall[1:])), oracle_recall
    assert time.perf_counter() - start < 300


# -- 8 ---------------------------------------------------------------------------


def guided_effect_systems(dictionary):
    """Test-set ROUGE-LSum F1 (x100) for plain, guided and shuffled-guidance models."""
    admissions = generate_synthetic_corpus(400, SEED, dictionary, max_documents=10, verbatim_range=(0, 1))
    by_id = {a.admission_id: a for a in admissions}
    splits = make_splits(list(by_id), SEED)
    parts = [[by_id[i] for i in ids] for ids in (splits.train, splits.validation, splits.test)]
    tok = BPETokenizer.train(corpus_texts(parts[0]), vocab_size=2000)
    scores = {}
    for system in ("plain", "guided", "shuffled"):
        kind = None if system == "plain" else PROBLEM_ONLY
        sets = [build_examples(p, tok, 512, 128, dictionary, kind) for p in parts]
        if system == "shuffled":
            sets = [
                [replace(e, guidance=g) for e, g in zip(s, shuffled_guidance([e.guidance for e in s], derive_seed(SEED, n)))]
                for n, s in enumerate(sets)
            ]
        cfg = ModelConfig(tok.vocab_size, guided=system != "plain", seed=SEED)
        model, _ = train(cfg, sets[0], sets[1], tok, TrainConfig(epochs=20, lr=3e-3))
        outputs = decode_batch(model, sets[2], tok)
        refs = [by_id[e.admission_id].reference_bhc for e in sets[2]]
        scores[system] = 100 * float(np.mean([rouge_lsum(o, r).f1 for o, r in zip(outputs, refs)]))
    return scores


@pytest.mark.slow
@pytest.mark.criterion(8, "Guided beats plain by >= 3 LSum points; shuffled guidance erases >= half; under 30 min")
def test_guidance_direction_of_effect(dictionary):
    torch.set_num_threads(1)
    start = time.perf_counter()
    s = guided_effect_systems(dictionary)
    elapsed = time.perf_counter() - start
    print(f"LSum F1 plain {s['plain']:.2f} guided {s['guided']:.2f} shuffled {s['shuffled']:.2f} in {elapsed:.0f}s")
    gain = s["guided"] - s["plain"]
    assert gain >= 3.0
    assert s["guided"] - s["shuffled"] >= 0.5 * gain
    assert elapsed < 1800


# -- 9 ---------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(9, "Ensemble output starts with the extractive selection; n=3 LSum >= abstractive only")
def test_ensemble_prefix_and_direction(extractive_setup, dictionary):
    by_id, splits, records, refs, ranker = extractive_setup
    parts = [[by_id[i] for i in ids] for ids in (splits.train, splits.validation, splits.test)]
    tok = BPETokenizer.train(corpus_texts(parts[0]), vocab_size=2000)
    sets = [build_examples(p, tok, 256, 128, dictionary, PROBLEM_ONLY) for p in parts]
    cfg = ModelConfig(tok.vocab_size, max_src_len=256, guided=True, seed=SEED)
    model, _ = train(cfg, sets[0], sets[1], tok, TrainConfig(epochs=20, lr=3e-3))

    def with_embeddings(recs):
        # same sentences as the cached records, which already carry vectors
        return records[recs[0].admission_id]

    def config(n):
        return EnsembleConfig(n, ranker.rank if n else None, model, tok, dictionary, PROBLEM_ONLY, GREEDY,
                              embed=with_embeddings)

    ensemble, abstractive = [], []
    for adm in parts[2]:
        expected_prefix = select_top_k(ranker.rank(records[adm.admission_id]), 3).text
        out = summarise(adm, config(3))
        assert out.encode("utf-8").startswith(expected_prefix.encode("utf-8"))
        ensemble.append(rouge_lsum(out, refs[adm.admission_id]).f1)
        abstractive.append(rouge_lsum(summarise(adm, config(0)), refs[adm.admission_id]).f1)
    print(f"LSum F1 ensemble {100 * np.mean(ensemble):.2f} abstractive {100 * np.mean(abstractive):.2f}")
    assert np.mean(ensemble) >= np.mean(abstractive)


# -- 10 ----------------------------------------------------------------------------


@pytest.mark.criterion(10, "20 words, 5 mentions, 2 unique concepts give densities 4.0 and 10.0")
def test_term_density_worked_example(af_dictionary):
    text = (
        "Stroke was treated with heparin and the stroke improved while heparin "
        "continued until stroke care ended on day three today"
    )
    stats = term_stats(text, extract(text, af_dictionary))
    assert (stats.n_words, stats.n_terms, stats.n_unique_terms) == (20, 5, 2)
    assert stats.term_density == 4.0
    assert stats.unique_term_density == 10.0


# -- 11 ----------------------------------------------------------------------------

COVERAGE_FIXTURES = [
    # generated, reference, (problem %, intervention %, total %)
    ("stroke treated with heparin", "stroke treated with heparin", (100.0, 100.0, 100.0)),
    ("stroke", "stroke and pneumonia", (50.0, None, 50.0)),
    ("heparin", "stroke on heparin and warfarin", (0.0, 50.0, 100 * 1 / 3)),
    ("no stroke", "stroke", (0.0, None, 0.0)),
    ("pneumonia", "no pneumonia. sepsis.", (0.0, None, 0.0)),
    ("atrial fibrillation ablation", "atrial fibrillation", (0.0, None, 0.0)),
    ("sepsis sepsis sepsis", "sepsis, pneumonia, stroke and atrial fibrillation", (25.0, None, 25.0)),
    ("chest x-ray and warfarin", "Chest X-Ray. Warfarin. Heparin. Pneumonia.", (0.0, 100 * 2 / 3, 50.0)),
    ("stroke", "mother had stroke", (None, None, None)),
    ("family history of sepsis. pneumonia", "sepsis and pneumonia", (50.0, None, 50.0)),
]


@pytest.mark.criterion(11, "Concept coverage reproduces hand-computed percentages on 10 fixtures")
def test_concept_coverage_fixtures(af_dictionary):
    for generated, reference, expected in COVERAGE_FIXTURES:
        cov = concept_coverage(generated, reference, af_dictionary)
        assert (cov.pct_problem, cov.pct_intervention, cov.pct_total) == expected, (generated, reference)


# -- 12 ----------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.criterion(12, "Full CLI pipeline run twice yields byte-identical reports")
def test_end_to_end_determinism(tmp_path):
    first = run_pipeline(tmp_path / "one")
    second = run_pipeline(tmp_path / "two")
    for name in ("report.json", "report.csv", "report.png"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    summaries = [d.parent / "summ" / "summaries.jsonl" for d in (first, second)]
    assert summaries[0].read_bytes() == summaries[1].read_bytes()
