"""Command-line entry point: ``bhcsum <command> [options]``.

Options come from three layers: built-in defaults, then the ``[command]``
section of an INI file given with ``--config``, then command-line flags.
Unknown keys or sections are rejected. Every command writes the resolved
configuration to ``run_config.json`` in its output directory.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training
divergence.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import torch

from . import __version__
from .concepts import ConceptDictionary
from .corpus import (
    Admission,
    IngestStats,
    assemble_source,
    ingest_record,
    load_corpus,
    load_splits,
    make_splits,
    read_jsonl,
    save_corpus,
    save_splits,
    source_text,
    write_jsonl,
)
from .errors import BHCError, ConfigError, DataError
from .seeding import derive_seed

log = logging.getLogger("bhcsum")

# -- configuration schema -----------------------------------------------------

REQUIRED = object()


def _bool(value: str | bool) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _int_list(value: str | list) -> list[int]:
    if isinstance(value, list):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v.strip()]


def _str_list(value: str | list) -> list[str]:
    if isinstance(value, list):
        return list(value)
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _opt_str(value):
    return None if value in (None, "", "none", "None") else str(value)


COMMON = {
    "out_dir": (str, REQUIRED, "output directory"),
    "seed": (int, 0, "top-level seed"),
    "threads": (int, 1, "torch intra-op threads"),
}

SCHEMA: dict[str, dict[str, tuple[Callable, Any, str]]] = {
    "synth": {
        "n_admissions": (int, 100, "number of synthetic admissions"),
        "min_documents": (int, 3, "fewest notes per admission"),
        "max_documents": (int, 30, "most notes per admission"),
        "dictionary": (_opt_str, None, "concept dictionary TSV (default: bundled)"),
    },
    "ingest": {
        "input": (str, REQUIRED, "raw admissions JSONL"),
    },
    "train-extractive": {
        "corpus": (str, REQUIRED, "corpus JSONL"),
        "splits": (str, REQUIRED, "splits JSON"),
        "embedding_dim": (int, 50, "hashed word-vector width"),
        "word_vectors": (_opt_str, None, "word-vector file (default: hashed vectors from training text)"),
        "hidden_dim": (int, 64, "LSTM hidden size"),
        "epochs": (int, 30, "training epochs"),
        "batch_size": (int, 8, "admissions per batch"),
        "lr": (float, 3e-3, "learning rate"),
        "label_k": (int, 15, "Oracle top-k used as positive labels"),
    },
    "train-abstractive": {
        "corpus": (str, REQUIRED, "corpus JSONL"),
        "splits": (str, REQUIRED, "splits JSON"),
        "dictionary": (_opt_str, None, "concept dictionary TSV (default: bundled)"),
        "guided": (_bool, False, "train the guided dual-encoder variant"),
        "guidance_kind": (str, "problem_only", "problem_only or problem_and_intervention"),
        "shuffle_guidance": (_bool, False, "ablation: pair each source with another admission's guidance"),
        "vocab_size": (int, 8000, "BPE vocabulary size"),
        "d_model": (int, 64, "model width"),
        "n_heads": (int, 4, "attention heads"),
        "n_encoder_blocks": (int, 4, "encoder blocks per stream"),
        "n_decoder_blocks": (int, 2, "decoder blocks"),
        "n_shared_encoder_blocks": (int, 3, "leading encoder blocks shared by both streams"),
        "max_src_len": (int, 512, "source token limit (head/tail truncation)"),
        "max_tgt_len": (int, 128, "target token limit"),
        "epochs": (int, 20, "training epochs"),
        "batch_size": (int, 8, "examples per batch"),
        "lr": (float, 2e-3, "peak learning rate"),
        "warmup_steps": (int, 50, "linear warmup steps"),
        "weight_decay": (float, 0.01, "AdamW weight decay"),
    },
    "summarise": {
        "corpus": (str, REQUIRED, "corpus JSONL"),
        "splits": (_opt_str, None, "splits JSON (omit to summarise every admission)"),
        "split": (str, "test", "train, validation or test"),
        "system": (str, "ensemble", "ensemble, abstractive, extractive, textrank or oracle"),
        "ranker_dir": (_opt_str, None, "train-extractive output directory"),
        "model_dir": (_opt_str, None, "train-abstractive output directory"),
        "n_extractive": (int, 3, "extractive sentences (ensemble prefix or extractive k)"),
        "embedding_dim": (int, 50, "hashed word-vector width for textrank without a ranker"),
        "decoding": (str, "beam", "greedy or beam"),
        "beam_width": (int, 4, "beam width"),
        "dictionary": (_opt_str, None, "concept dictionary TSV (default: bundled)"),
    },
    "sweep-extractive": {
        "corpus": (str, REQUIRED, "corpus JSONL"),
        "splits": (str, REQUIRED, "splits JSON"),
        "split": (str, "test", "train, validation or test"),
        "systems": (_str_list, ["oracle", "ranker", "textrank", "random"], "comma-separated systems"),
        "ks": (_int_list, [1, 2, 3, 5, 10, 15], "comma-separated k values"),
        "ranker_dir": (_opt_str, None, "train-extractive output directory (needed for ranker)"),
        "embedding_dim": (int, 50, "hashed word-vector width when no ranker is given"),
    },
    "evaluate": {
        "summaries": (str, REQUIRED, "summaries JSONL"),
        "corpus": (str, REQUIRED, "corpus JSONL holding the references"),
        "dictionary": (_opt_str, None, "concept dictionary TSV (default: bundled)"),
        "run_id": (str, "run", "report identifier"),
        "stem": (_bool, False, "Porter-stem ROUGE tokens"),
    },
    "oracle": {
        "corpus": (str, REQUIRED, "corpus JSONL"),
        "splits": (_opt_str, None, "splits JSON (omit for every admission)"),
        "split": (str, "test", "train, validation or test"),
        "k": (int, 5, "sentences to select"),
    },
}


ALIASES = {"n_admissions": ["--n"]}


def resolve_config(command: str, ini_path: str | None, overrides: dict[str, Any]) -> dict[str, Any]:
    schema = {**COMMON, **SCHEMA[command]}
    values: dict[str, Any] = {k: d for k, (_, d, _) in schema.items()}
    if ini_path:
        parser = configparser.ConfigParser(default_section="__none__", interpolation=None)
        try:
            with open(ini_path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {ini_path}: {exc}") from exc
        unknown_sections = [s for s in parser.sections() if s not in SCHEMA]
        if unknown_sections:
            raise ConfigError(f"unknown config sections: {unknown_sections}")
        if parser.has_section(command):
            for key, raw in parser.items(command):
                if key not in schema:
                    raise ConfigError(f"unknown key {key!r} in [{command}]")
                values[key] = raw
    for key, raw in overrides.items():
        if key not in schema:
            raise ConfigError(f"unknown option {key!r} for {command}")
        if raw is not None:
            values[key] = raw
    resolved = {}
    for key, (conv, default, _) in schema.items():
        raw = values[key]
        if raw is REQUIRED:
            raise ConfigError(f"{command}: missing required option {key!r}")
        try:
            resolved[key] = conv(raw) if raw is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{command}: bad value for {key!r}: {exc}") from exc
    return resolved


def _write_run_config(out_dir: Path, command: str, cfg: dict) -> None:
    body = {"command": command, "version": __version__, "config": cfg}
    (out_dir / "run_config.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _dictionary(path: str | None) -> ConceptDictionary:
    return ConceptDictionary.from_tsv(path) if path else ConceptDictionary.default()


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise DataError(f"{what} not found: {p}")
    return p


def _select(cfg, admissions: list[Admission]) -> list[Admission]:
    if not cfg.get("splits"):
        return admissions
    split = load_splits(_require_file(cfg["splits"], "splits file"))
    if cfg["split"] not in ("train", "validation", "test"):
        raise ConfigError(f"unknown split {cfg['split']!r}")
    wanted = set(getattr(split, cfg["split"]))
    return [a for a in admissions if a.admission_id in wanted]


def _by_split(admissions, split_path):
    split = load_splits(_require_file(split_path, "splits file"))
    by_id = {a.admission_id: a for a in admissions}
    missing = [i for i in split.train + split.validation + split.test if i not in by_id]
    if missing:
        raise DataError(f"splits reference unknown admissions: {missing[:5]}")
    return {name: [by_id[i] for i in getattr(split, name)] for name in ("train", "validation", "test")}


# -- commands -----------------------------------------------------------------


def cmd_synth(cfg, out: Path):
    from .synthetic import generate_synthetic_corpus

    admissions = generate_synthetic_corpus(
        cfg["n_admissions"],
        derive_seed(cfg["seed"], "synth"),
        _dictionary(cfg["dictionary"]),
        cfg["min_documents"],
        cfg["max_documents"],
    )
    save_corpus(out / "corpus.jsonl", admissions)
    save_splits(out / "splits.json", make_splits([a.admission_id for a in admissions], derive_seed(cfg["seed"], "splits")))
    log.info("wrote %d synthetic admissions to %s", len(admissions), out)


def cmd_ingest(cfg, out: Path):
    stats = IngestStats()
    admissions = []
    for rec in read_jsonl(_require_file(cfg["input"], "input file")):
        adm = ingest_record(rec, stats=stats)
        if adm is not None:
            admissions.append(adm)
    if not admissions:
        raise DataError("no admission had a usable reference summary")
    save_corpus(out / "corpus.jsonl", admissions)
    save_splits(out / "splits.json", make_splits([a.admission_id for a in admissions], derive_seed(cfg["seed"], "splits")))
    (out / "ingest_stats.json").write_text(json.dumps(asdict(stats), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("ingested %d admissions", len(admissions))


def _embedder(cfg, texts_for_vocab=None, ranker_dir=None):
    from .sentences import MeanWordVectors, corpus_word_vectors

    if ranker_dir:
        return MeanWordVectors.from_file(_require_file(str(Path(ranker_dir) / "word_vectors.txt"), "word vectors"))
    if cfg.get("word_vectors"):
        return MeanWordVectors.from_file(_require_file(cfg["word_vectors"], "word-vector file"))
    return corpus_word_vectors(texts_for_vocab, cfg["embedding_dim"], derive_seed(cfg["seed"], "word-vectors"))


def _embedded_sources(admissions, backend):
    from .sentences import attach_embeddings

    return [attach_embeddings(assemble_source(a), backend) for a in admissions]


def cmd_train_extractive(cfg, out: Path):
    from .extractive import oracle_labels
    from .ranker import RankerConfig, train_ranker

    parts = _by_split(load_corpus(_require_file(cfg["corpus"], "corpus")), cfg["splits"])
    train_adms = parts["train"]
    backend = _embedder(cfg, [source_text(assemble_source(a)) for a in train_adms])
    sources = _embedded_sources(train_adms, backend)
    data = [
        (np.vstack([r.embedding for r in recs]), oracle_labels(recs, a.reference_bhc, cfg["label_k"]))
        for recs, a in zip(sources, train_adms)
    ]
    rcfg = RankerConfig(
        input_dim=backend.dimension,
        hidden_dim=cfg["hidden_dim"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        lr=cfg["lr"],
        seed=derive_seed(cfg["seed"], "ranker") % 2**31,
        label_k=cfg["label_k"],
    )
    model, history = train_ranker(data, rcfg)
    model.save(out / "ranker.ckpt")
    backend.to_file(out / "word_vectors.txt")
    write_jsonl(out / "train_log.jsonl", [{"epoch": i + 1, "train_loss": h} for i, h in enumerate(history)])


def _load_abstractive(model_dir: str):
    from .abstractive import Seq2Seq
    from .tokenizer import BPETokenizer

    d = Path(model_dir)
    model, meta = Seq2Seq.load(_require_file(str(d / "model.ckpt"), "model checkpoint"))
    tok = BPETokenizer.load(_require_file(str(d / "tokenizer.json"), "tokenizer"))
    return model, tok, meta


def cmd_train_abstractive(cfg, out: Path):
    from .abstractive import ModelConfig, TrainConfig, build_examples, corpus_texts, train
    from .abstractive.train import state_meta
    from .guidance import SIGNAL_KINDS, shuffled_guidance
    from .plotting import plot_training
    from .tokenizer import BPETokenizer

    if cfg["guided"] and cfg["guidance_kind"] not in SIGNAL_KINDS:
        raise ConfigError(f"guidance_kind must be one of {SIGNAL_KINDS}")
    if cfg["shuffle_guidance"] and not cfg["guided"]:
        raise ConfigError("shuffle_guidance needs guided = true")
    parts = _by_split(load_corpus(_require_file(cfg["corpus"], "corpus")), cfg["splits"])
    dictionary = _dictionary(cfg["dictionary"])
    tok = BPETokenizer.train(corpus_texts(parts["train"]), vocab_size=cfg["vocab_size"])
    kind = cfg["guidance_kind"] if cfg["guided"] else None
    sets = {
        name: build_examples(parts[name], tok, cfg["max_src_len"], cfg["max_tgt_len"], dictionary, kind)
        for name in ("train", "validation")
    }
    if cfg["shuffle_guidance"]:
        for i, name in enumerate(("train", "validation")):
            borrowed = shuffled_guidance([e.guidance for e in sets[name]], derive_seed(cfg["seed"], f"shuffle-{name}"))
            sets[name] = [replace(e, guidance=g) for e, g in zip(sets[name], borrowed)]
    mcfg = ModelConfig(
        vocab_size=tok.vocab_size,
        d_model=cfg["d_model"],
        n_heads=cfg["n_heads"],
        n_encoder_blocks=cfg["n_encoder_blocks"],
        n_decoder_blocks=cfg["n_decoder_blocks"],
        n_shared_encoder_blocks=min(cfg["n_shared_encoder_blocks"], cfg["n_encoder_blocks"]),
        max_src_len=cfg["max_src_len"],
        max_tgt_len=cfg["max_tgt_len"],
        guided=cfg["guided"],
        seed=derive_seed(cfg["seed"], "seq2seq-init"),
    )
    tcfg = TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        lr=cfg["lr"],
        warmup_steps=cfg["warmup_steps"],
        weight_decay=cfg["weight_decay"],
    )
    model, state = train(mcfg, sets["train"], sets["validation"], tok, tcfg, out / "train_log.jsonl")
    meta = state_meta(state)
    meta["guidance_kind"] = kind
    meta["shuffle_guidance"] = cfg["shuffle_guidance"]
    model.save(out / "model.ckpt", meta)
    tok.save(out / "tokenizer.json")
    if state.history:
        plot_training(state.history, out / "training.png")


def _ranker_fn(cfg):
    from .ranker import RankerModel

    if not cfg.get("ranker_dir"):
        raise ConfigError("ranker_dir is required for the trained ranker")
    model = RankerModel.load(_require_file(str(Path(cfg["ranker_dir"]) / "ranker.ckpt"), "ranker checkpoint"))
    return model.rank


def cmd_summarise(cfg, out: Path):
    from .abstractive import Decoding
    from .ensemble import EnsembleConfig, summarise
    from .extractive import oracle_rank, select_top_k, textrank_rank
    from .sentences import attach_embeddings

    admissions = _select(cfg, load_corpus(_require_file(cfg["corpus"], "corpus")))
    system = cfg["system"]
    rows = []
    if system in ("extractive", "textrank", "oracle"):
        if cfg["n_extractive"] < 1:
            raise ConfigError("n_extractive must be >= 1 for extractive systems")
        if system == "extractive":
            rank = _ranker_fn(cfg)
            backend = _embedder(cfg, ranker_dir=cfg["ranker_dir"])
        elif system == "textrank":
            rank = textrank_rank
            backend = _embedder(cfg, [source_text(assemble_source(a)) for a in admissions], cfg["ranker_dir"])
        for adm in admissions:
            if system == "oracle":
                ranked = oracle_rank(assemble_source(adm), adm.reference_bhc)
            else:
                ranked = rank(_embedded_sources([adm], backend)[0])
            rows.append({"admission_id": adm.admission_id, "summary": select_top_k(ranked, cfg["n_extractive"]).text, "system": system})
    elif system in ("abstractive", "ensemble"):
        if not cfg["model_dir"]:
            raise ConfigError("model_dir is required for abstractive systems")
        model, tok, meta = _load_abstractive(cfg["model_dir"])
        n = cfg["n_extractive"] if system == "ensemble" else 0
        extractive = embed = None
        if n > 0:
            extractive = _ranker_fn(cfg)
            backend = _embedder(cfg, ranker_dir=cfg["ranker_dir"])

            def embed(records, _b=backend):
                return attach_embeddings(records, _b)

        ecfg = EnsembleConfig(
            n_extractive_sentences=n,
            extractive_model=extractive,
            abstractive_model=model,
            tokenizer=tok,
            dictionary=_dictionary(cfg["dictionary"]),
            guidance_kind=meta.get("guidance_kind") if model.config.guided else None,
            decoding=Decoding(cfg["decoding"], cfg["beam_width"]),
            embed=embed,
        )
        for adm in admissions:
            rows.append({"admission_id": adm.admission_id, "summary": summarise(adm, ecfg), "system": system})
    else:
        raise ConfigError(f"unknown system {system!r}")
    write_jsonl(out / "summaries.jsonl", rows)
    log.info("wrote %d %s summaries", len(rows), system)


def cmd_sweep_extractive(cfg, out: Path):
    from .extractive import oracle_rank, random_rank, textrank_rank
    from .plotting import plot_sweep
    from .sweep import sweep_sentence_limits

    admissions = _select(cfg, load_corpus(_require_file(cfg["corpus"], "corpus")))
    if not admissions:
        raise DataError("no admissions in the selected split")
    if cfg["ranker_dir"]:
        backend = _embedder(cfg, ranker_dir=cfg["ranker_dir"])
    else:
        backend = _embedder(cfg, [source_text(assemble_source(a)) for a in admissions])
    sources = _embedded_sources(admissions, backend)
    pairs = [(recs, a.reference_bhc) for recs, a in zip(sources, admissions)]
    random_seed = derive_seed(cfg["seed"], "random-baseline")
    known = {
        "oracle": lambda: (lambda recs, ref: oracle_rank(recs, ref)),
        "textrank": lambda: (lambda recs, ref: textrank_rank(recs)),
        "random": lambda: (lambda recs, ref: random_rank(recs, derive_seed(random_seed, recs[0].admission_id))),
        "ranker": lambda: (lambda recs, ref, _r=_ranker_fn(cfg): _r(recs)),
    }
    tables = []
    for system in cfg["systems"]:
        if system not in known:
            raise ConfigError(f"unknown sweep system {system!r}")
        table = sweep_sentence_limits(known[system](), pairs, cfg["ks"], system)
        table.write_csv(out / f"sweep_{system}.csv")
        table.write_json(out / f"sweep_{system}.json")
        tables.append(table)
    plot_sweep(tables, out / "sweep.png")


def cmd_evaluate(cfg, out: Path):
    from .evaluation import evaluate_run
    from .plotting import plot_report

    summaries = {}
    for row in read_jsonl(_require_file(cfg["summaries"], "summaries file")):
        try:
            summaries[row["admission_id"]] = row["summary"]
        except KeyError as exc:
            raise DataError(f"summary row missing field {exc}") from exc
    refs = {a.admission_id: a.reference_bhc for a in load_corpus(_require_file(cfg["corpus"], "corpus"))}
    report = evaluate_run(summaries, refs, _dictionary(cfg["dictionary"]), cfg["run_id"], cfg["stem"])
    report.write(out, "report")
    plot_report(report.to_json(), out / "report.png")
    rouge = report.rouge["rougeLsum"]
    log.info("rougeLsum P %.4f R %.4f F1 %.4f", rouge["precision"], rouge["recall"], rouge["f1"])


def cmd_oracle(cfg, out: Path):
    from .extractive import oracle_rank, select_top_k

    if cfg["k"] < 1:
        raise ConfigError("k must be >= 1")
    admissions = _select(cfg, load_corpus(_require_file(cfg["corpus"], "corpus")))
    rows = []
    for adm in admissions:
        ranked = oracle_rank(assemble_source(adm), adm.reference_bhc)
        rows.append({"admission_id": adm.admission_id, "summary": select_top_k(ranked, cfg["k"]).text, "system": "oracle"})
    write_jsonl(out / "summaries.jsonl", rows)


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "train-extractive": cmd_train_extractive,
    "train-abstractive": cmd_train_abstractive,
    "summarise": cmd_summarise,
    "sweep-extractive": cmd_sweep_extractive,
    "evaluate": cmd_evaluate,
    "oracle": cmd_oracle,
}

# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bhcsum", description="Clinical multi-document summarisation pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, schema in SCHEMA.items():
        p = sub.add_parser(name, help=COMMANDS[name].__name__.replace("cmd_", "").replace("_", " "))
        p.add_argument("--config", help="INI file; options are read from the [%s] section" % name)
        for key, (_, default, help_text) in {**COMMON, **schema}.items():
            shown = "required" if default is REQUIRED else f"default: {default}"
            flags = ["--" + key.replace("_", "-")] + ALIASES.get(key, [])
            p.add_argument(*flags, dest=key, default=None, help=f"{help_text} ({shown})")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    command = args.command
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    cfg = resolve_config(command, args.config, overrides)
    torch.set_num_threads(cfg["threads"])
    torch.manual_seed(derive_seed(cfg["seed"], "torch-global"))
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    _write_run_config(out, command, cfg)
    COMMANDS[command](cfg, out)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        code = run(argv)
    except BHCError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}), file=sys.stderr)
        code = exc.exit_code
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 3}), file=sys.stderr)
        code = 3
    return code


if __name__ == "__main__":
    sys.exit(main())
