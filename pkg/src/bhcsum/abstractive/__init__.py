"""Encoder-decoder summariser: plain and concept-guided variants."""

from .data import TrainingExample, build_examples, corpus_texts, encode_source, encode_target, head_tail
from .generate import GREEDY, Decoding, decode_batch, generate
from .model import ModelConfig, Seq2Seq
from .train import TrainConfig, TrainState, evaluate_loss, train

__all__ = [
    "Decoding",
    "GREEDY",
    "ModelConfig",
    "Seq2Seq",
    "TrainConfig",
    "TrainState",
    "TrainingExample",
    "build_examples",
    "corpus_texts",
    "decode_batch",
    "encode_source",
    "encode_target",
    "evaluate_loss",
    "generate",
    "head_tail",
    "train",
]
