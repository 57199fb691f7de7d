"""Encoder-decoder transformer, plain or guided.

The guided variant runs two encoder streams, one over the source tokens and
one over the position-aligned guidance tokens. The first
``n_shared_encoder_blocks`` blocks are the same module objects in both
streams; later blocks are separate. Each decoder block attends to its own
prefix, then to the source encoding, then to the guidance encoding. The
guidance cross-attention output projection starts at zero, so an untrained
guided model behaves like the plain one. Pad positions of the guidance stream
are masked as keys, so guidance attention only ever sees concept tokens.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from ..checkpoint import read_checkpoint, write_checkpoint
from ..errors import ConfigError, MisalignedGuidance
from ..seeding import derive_seed

CHECKPOINT_KIND = "seq2seq"


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_encoder_blocks: int = 4
    n_decoder_blocks: int = 2
    n_shared_encoder_blocks: int = 3
    max_src_len: int = 512
    max_tgt_len: int = 128
    guided: bool = False
    seed: int = 0
    d_ff: int = 0
    pad_id: int = 0
    bos_id: int = 1
    eos_id: int = 2

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ConfigError("d_model must be divisible by n_heads")
        if not 0 <= self.n_shared_encoder_blocks <= self.n_encoder_blocks:
            raise ConfigError("n_shared_encoder_blocks must lie in [0, n_encoder_blocks]")
        if min(self.vocab_size, self.d_model, self.n_heads, self.max_src_len, self.max_tgt_len) < 1:
            raise ConfigError("sizes must be positive")

    @property
    def ff_dim(self) -> int:
        return self.d_ff or 4 * self.d_model


class Memory(NamedTuple):
    """Encoder output for one batch, with the key masks each stream needs."""

    text: torch.Tensor
    padding: torch.Tensor
    guide: torch.Tensor | None = None
    guide_padding: torch.Tensor | None = None

    def expand(self, k: int) -> "Memory":
        def ex(t):
            return None if t is None else t.expand(k, *t.shape[1:])

        return Memory(*(ex(t) for t in self))


class Attention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.q = nn.Linear(d_model, d_model)
        # a key bias shifts every score in a row equally, so softmax ignores it
        self.k = nn.Linear(d_model, d_model, bias=False)
        self.v = nn.Linear(d_model, d_model)
        self.o = nn.Linear(d_model, d_model)
        self.last_weights: torch.Tensor | None = None
        self.keep_weights = False

    def forward(self, x, memory, key_padding=None, causal=False):
        b, tq, d = x.shape
        tk = memory.shape[1]
        h = self.n_heads

        def split(t, n):
            return t.view(b, n, h, d // h).transpose(1, 2)

        q, k, v = split(self.q(x), tq), split(self.k(memory), tk), split(self.v(memory), tk)
        scores = q @ k.transpose(-1, -2) / math.sqrt(d // h)
        neg = torch.finfo(scores.dtype).min
        if key_padding is not None:
            scores = scores.masked_fill(key_padding[:, None, None, :], neg)
        if causal:
            future = torch.ones(tq, tk, dtype=torch.bool, device=x.device).triu(1)
            scores = scores.masked_fill(future, neg)
        weights = scores.softmax(-1)
        if self.keep_weights:
            self.last_weights = weights.detach()
        out = (weights @ v).transpose(1, 2).reshape(b, tq, d)
        return self.o(out)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ff: int):
        super().__init__()
        self.fc1 = nn.Linear(d_model, d_ff)
        self.fc2 = nn.Linear(d_ff, d_model)

    def forward(self, x):
        return self.fc2(nn.functional.gelu(self.fc1(x)))


class EncoderBlock(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn = Attention(cfg.d_model, cfg.n_heads)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.ff_dim)

    def forward(self, x, padding):
        y = self.ln1(x)
        x = x + self.attn(y, y, padding)
        return x + self.ff(self.ln2(x))


class DecoderBlock(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln_self = nn.LayerNorm(cfg.d_model)
        self.self_attn = Attention(cfg.d_model, cfg.n_heads)
        self.ln_src = nn.LayerNorm(cfg.d_model)
        self.src_attn = Attention(cfg.d_model, cfg.n_heads)
        if cfg.guided:
            self.ln_guide = nn.LayerNorm(cfg.d_model)
            self.guide_attn = Attention(cfg.d_model, cfg.n_heads)
        self.ln_ff = nn.LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.ff_dim)
        self.guided = cfg.guided

    def forward(self, x, memory: Memory):
        y = self.ln_self(x)
        x = x + self.self_attn(y, y, causal=True)
        x = x + self.src_attn(self.ln_src(x), memory.text, memory.padding)
        if self.guided:
            x = x + self.guide_attn(self.ln_guide(x), memory.guide, memory.guide_padding)
        return x + self.ff(self.ln_ff(x))


class Seq2Seq(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.config = cfg
        d = cfg.d_model
        self.embed = nn.Embedding(cfg.vocab_size, d)
        self.src_pos = nn.Embedding(cfg.max_src_len, d)
        self.tgt_pos = nn.Embedding(cfg.max_tgt_len, d)
        n_shared = cfg.n_shared_encoder_blocks if cfg.guided else cfg.n_encoder_blocks
        self.shared_blocks = nn.ModuleList(EncoderBlock(cfg) for _ in range(n_shared))
        self.text_blocks = nn.ModuleList(EncoderBlock(cfg) for _ in range(cfg.n_encoder_blocks - n_shared))
        self.text_ln = nn.LayerNorm(d)
        if cfg.guided:
            self.guide_blocks = nn.ModuleList(EncoderBlock(cfg) for _ in range(cfg.n_encoder_blocks - n_shared))
            self.guide_ln = nn.LayerNorm(d)
        self.decoder = nn.ModuleList(DecoderBlock(cfg) for _ in range(cfg.n_decoder_blocks))
        self.dec_ln = nn.LayerNorm(d)
        self.reset_parameters()

    def _init_name(self, name: str) -> str:
        # encoder blocks are keyed by stream and depth, not by container, so
        # the plain model's block 3 and the guided text stream's block 3 match
        head, _, rest = name.partition(".")
        if head not in ("shared_blocks", "text_blocks", "guide_blocks"):
            return name
        index, _, rest = rest.partition(".")
        depth = int(index) + (0 if head == "shared_blocks" else len(self.shared_blocks))
        stream = "guide" if head == "guide_blocks" else "text"
        return f"encoder.{stream}.{depth}.{rest}"

    def reset_parameters(self):
        """Initialise each tensor from a seed derived from its name.

        Parameters common to the plain and guided variants therefore start
        identical under the same seed.
        """
        with torch.no_grad():
            for name, p in self.named_parameters():
                leaf = name.rsplit(".", 1)[-1]
                owner = name.rsplit(".", 2)[-2] if name.count(".") else name
                if owner.startswith("ln") or owner.endswith("_ln"):
                    p.fill_(1.0 if leaf == "weight" else 0.0)
                elif leaf == "bias":
                    p.zero_()
                elif "guide_attn.o." in name:
                    p.zero_()
                else:
                    gen = torch.Generator().manual_seed(derive_seed(self.config.seed, self._init_name(name)))
                    p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64).to(p.dtype) * 0.02)

    def encoder_stack(self, stream: str = "text") -> list[EncoderBlock]:
        """Blocks applied to one stream, in order; shared blocks come first."""
        tail = self.text_blocks if stream == "text" else self.guide_blocks
        return list(self.shared_blocks) + list(tail)

    def _check(self, source, guidance):
        cfg = self.config
        if source.dim() != 2:
            raise ValueError("source must be (batch, length)")
        if source.shape[1] > cfg.max_src_len:
            raise ValueError(f"source length {source.shape[1]} exceeds max_src_len {cfg.max_src_len}")
        if cfg.guided:
            if guidance is None:
                raise MisalignedGuidance("guided model called without guidance")
            if guidance.shape != source.shape:
                raise MisalignedGuidance(
                    f"guidance shape {tuple(guidance.shape)} does not match source shape {tuple(source.shape)}"
                )
        elif guidance is not None:
            raise ValueError("plain model takes no guidance")

    def encode(self, source: torch.Tensor, guidance: torch.Tensor | None = None) -> Memory:
        self._check(source, guidance)
        padding = source.eq(self.config.pad_id)
        pos = self.src_pos(torch.arange(source.shape[1], device=source.device))
        x = self.embed(source) + pos
        for block in self.encoder_stack("text"):
            x = block(x, padding)
        if not self.config.guided:
            return Memory(self.text_ln(x), padding)
        # all-pad rows fall back to uniform weights; the zero-initialised
        # output projection keeps that harmless until guidance is learned
        guide_padding = guidance.eq(self.config.pad_id)
        g = self.embed(guidance) + pos
        for block in self.encoder_stack("guidance"):
            g = block(g, guide_padding)
        return Memory(self.text_ln(x), padding, self.guide_ln(g), guide_padding)

    def decode(self, target_in: torch.Tensor, memory: Memory) -> torch.Tensor:
        if target_in.shape[1] > self.config.max_tgt_len:
            raise ValueError(f"target length {target_in.shape[1]} exceeds max_tgt_len {self.config.max_tgt_len}")
        pos = self.tgt_pos(torch.arange(target_in.shape[1], device=target_in.device))
        x = self.embed(target_in) + pos
        for block in self.decoder:
            x = block(x, memory)
        return self.dec_ln(x) @ self.embed.weight.T

    def forward(self, source, target_in, guidance=None):
        """Teacher-forced logits of shape (batch, target length, vocab)."""
        return self.decode(target_in, self.encode(source, guidance))

    def attention_modules(self) -> list[Attention]:
        return [m for m in self.modules() if isinstance(m, Attention)]

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        tensors = {k: v.detach().cpu().numpy() for k, v in self.state_dict().items()}
        write_checkpoint(path, CHECKPOINT_KIND, asdict(self.config), tensors, meta)

    @classmethod
    def load(cls, path: str | Path) -> tuple["Seq2Seq", dict]:
        config, tensors, meta = read_checkpoint(path, kind=CHECKPOINT_KIND)
        model = cls(ModelConfig(**config))
        first = next(iter(tensors.values())) if tensors else np.zeros(0, np.float32)
        if first.dtype == np.float64:
            model.double()
        model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
        model.eval()
        return model, meta
