from hypothesis import given, settings
from hypothesis import strategies as st

from bhcsum.tokenizer import BPETokenizer, pretokenize

CORPUS = [
    "Pneumonia was treated with amoxicillin.",
    "Continues on amoxicillin for pneumonia.",
    "Pneumonia improving with amoxicillin.",
]


def test_specials_first():
    tok = BPETokenizer.train(CORPUS, vocab_size=100)
    assert tok.vocab[:4] == ["<pad>", "<s>", "</s>", "<unk>"]
    assert (tok.pad_id, tok.bos_id, tok.eos_id, tok.unk_id) == (0, 1, 2, 3)


def test_training_deterministic():
    a = BPETokenizer.train(CORPUS, vocab_size=80)
    b = BPETokenizer.train(list(CORPUS), vocab_size=80)
    assert a.vocab == b.vocab and a.merges == b.merges


def test_round_trip_and_offsets():
    tok = BPETokenizer.train(CORPUS, vocab_size=120)
    text = "Pneumonia improving with amoxicillin."
    toks = tok.encode(text)
    assert tok.decode([t.id for t in toks]) == text
    # offsets tile the non-space characters in order
    assert "".join(text[t.start : t.end] for t in toks) == text.replace(" ", "")


def test_unknown_characters_map_to_unk():
    tok = BPETokenizer.train(CORPUS, vocab_size=60)
    ids = tok.encode_ids("Pneumonia ☃")
    assert tok.unk_id in ids


def test_decode_stops_at_eos():
    tok = BPETokenizer.train(CORPUS, vocab_size=120)
    ids = [tok.bos_id] + tok.encode_ids("pneumonia") + [tok.eos_id] + tok.encode_ids("amoxicillin")
    assert tok.decode(ids) == "pneumonia"


def test_save_load(tmp_path):
    tok = BPETokenizer.train(CORPUS, vocab_size=90)
    tok.save(tmp_path / "t.json")
    back = BPETokenizer.load(tmp_path / "t.json")
    assert back.encode_ids("Pneumonia treated.") == tok.encode_ids("Pneumonia treated.")


def test_pretokenize_marks_leading_space():
    assert [p[0] for p in pretokenize("a b.c")] == ["a", "▁b", ".", "c"]


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet="abc .,xyz", min_size=1, max_size=40))
def test_round_trip_up_to_whitespace(text):
    tok = BPETokenizer.train([text, "abc xyz"], vocab_size=50, min_frequency=1)
    decoded = tok.decode(tok.encode_ids(text))
    assert decoded.split() == " ".join(text.split()).split() or decoded.replace(" ", "") == text.replace(" ", "")
