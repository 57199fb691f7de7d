"""Autoregressive decoding: greedy and length-normalised beam search."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch

from ..errors import MisalignedGuidance
from .model import Seq2Seq


@dataclass(frozen=True)
class Decoding:
    strategy: str = "beam"
    beam_width: int = 4
    length_penalty: float = 1.0

    def __post_init__(self):
        if self.strategy not in ("greedy", "beam"):
            raise ValueError(f"unknown decoding strategy {self.strategy!r}")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


GREEDY = Decoding("greedy", 1)


def _as_batch(ids: Sequence[int], dtype=torch.long) -> torch.Tensor:
    return torch.tensor([list(ids)], dtype=dtype)


@torch.no_grad()
def generate(
    model: Seq2Seq,
    source: Sequence[int],
    guidance: Sequence[int] | None = None,
    decoding: Decoding = Decoding(),
    max_len: int | None = None,
    forced_prefix: Sequence[int] = (),
) -> list[int]:
    """Token ids of the summary, without BOS/EOS.

    The output starts with ``forced_prefix`` verbatim; decoding continues from
    there until EOS or ``max_len`` tokens.
    """
    cfg = model.config
    max_len = cfg.max_tgt_len if max_len is None else min(max_len, cfg.max_tgt_len)
    prefix = list(forced_prefix)
    if len(prefix) > max_len:
        raise ValueError(f"forced prefix of {len(prefix)} tokens exceeds max_len {max_len}")
    if guidance is not None and len(guidance) != len(source):
        raise MisalignedGuidance(f"guidance length {len(guidance)} != source length {len(source)}")
    if len(prefix) == max_len:
        return prefix
    model.eval()
    src = _as_batch(source)
    guide = _as_batch(guidance) if guidance is not None else None
    memory = model.encode(src, guide)
    start = [cfg.bos_id] + prefix
    if decoding.strategy == "greedy" or decoding.beam_width == 1:
        return _greedy(model, memory, start, max_len)[1:]
    return _beam(model, memory, start, max_len, decoding)[1:]


def _greedy(model, memory, start, max_len):
    seq = list(start)
    while len(seq) - 1 < max_len:
        logits = model.decode(_as_batch(seq), memory)[0, -1]
        nxt = int(torch.argmax(logits))
        if nxt == model.config.eos_id:
            break
        seq.append(nxt)
    return seq


def _beam(model, memory, start, max_len, decoding: Decoding):
    width = decoding.beam_width
    eos = model.config.eos_id
    n_fixed = len(start)
    beams: list[tuple[float, list[int]]] = [(0.0, list(start))]
    finished: list[tuple[float, list[int]]] = []

    def norm(score, seq):
        n = max(1, len(seq) - n_fixed + 1)
        return score / n**decoding.length_penalty

    while beams and len(beams[0][1]) - 1 < max_len:
        batch = torch.tensor([s for _, s in beams], dtype=torch.long)
        logits = model.decode(batch, memory.expand(batch.shape[0]))[:, -1]
        logp = logits.double().log_softmax(-1)
        candidates = []
        for b, (score, seq) in enumerate(beams):
            top = torch.topk(logp[b], min(width + 1, logp.shape[-1]))
            for lp, tok in zip(top.values.tolist(), top.indices.tolist()):
                candidates.append((score + lp, seq, tok))
        # stable order: score, then token sequence, keeps ties deterministic
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        beams = []
        for score, seq, tok in candidates:
            if tok == eos:
                finished.append((norm(score, seq + [tok]), seq))
            else:
                beams.append((score, seq + [tok]))
            if len(beams) == width:
                break
        if len(finished) >= width:
            break
    for score, seq in beams:
        finished.append((norm(score, seq), seq))
    finished.sort(key=lambda f: (-f[0], len(f[1]), f[1]))
    return finished[0][1]


def decode_batch(model, examples, tokenizer, decoding: Decoding = GREEDY, max_len=None) -> list[str]:
    return [
        tokenizer.decode(generate(model, ex.source, ex.guidance, decoding, max_len))
        for ex in examples
    ]
