"""Model checkpoints: one .npz holding every weight plus a JSON header.

Saving the same model twice produces identical bytes (sorted JSON keys,
fixed zip metadata), which the determinism tests rely on. Checkpoints carry
weights and vocabularies only, not optimizer state, so training resumes are
out of scope: load for parsing, evaluation, and export.
"""

from __future__ import annotations

import json

import numpy as np

from .conll import Vocabulary
from .errors import CheckpointError
from .model import LhrModel, ModelConfig
from .tokens import EncoderConfig

FORMAT_VERSION = 1


def _vocab_meta(vocab: Vocabulary) -> dict:
    return {
        "symbols": list(vocab.symbols),
        "counts": vocab.counts,
        "min_count": vocab.min_count,
        "unknown": vocab.unknown,
    }


def _vocab_from_meta(meta: dict) -> Vocabulary:
    return Vocabulary(meta["symbols"], counts=meta["counts"],
                      min_count=meta["min_count"], unknown=meta["unknown"])


def save_model(model: LhrModel, path: str) -> None:
    cfg = model.config
    meta = {
        "format_version": FORMAT_VERSION,
        "config": {
            "context_hidden": cfg.context_hidden,
            "heads_hidden": cfg.heads_hidden,
            "labeler_hidden": cfg.labeler_hidden,
            "labeler_softmax": cfg.labeler_softmax,
            "encoder": {
                "word_dim": cfg.encoder.word_dim,
                "pos_dim": cfg.encoder.pos_dim,
                "alpha_word_dropout": cfg.encoder.alpha_word_dropout,
                "mode": cfg.encoder.mode,
                "char_dim": cfg.encoder.char_dim,
                "char_hidden": cfg.encoder.char_hidden,
            },
        },
        "word_vocab": _vocab_meta(model.word_vocab),
        "pos_vocab": _vocab_meta(model.pos_vocab),
        "label_vocab": _vocab_meta(model.label_vocab),
        "seen_pairs": [list(p) for p in model.seen_pairs],
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    arrays = {"meta": np.frombuffer(meta_bytes, dtype=np.uint8)}
    for name, p in model.named_parameters():
        arrays[f"param/{name}"] = p.data
    np.savez(path, **arrays)


def load_model(path: str) -> LhrModel:
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with archive:
        if "meta" not in archive.files:
            raise CheckpointError(f"{path} has no meta entry; not a model checkpoint")
        try:
            meta = json.loads(bytes(archive["meta"]).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path} has a corrupt meta entry: {exc}") from exc
        version = meta.get("format_version")
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"{path} is format version {version!r}, this build reads {FORMAT_VERSION}")
        try:
            enc_cfg = EncoderConfig(**meta["config"]["encoder"])
            cfg = ModelConfig(
                encoder=enc_cfg,
                context_hidden=meta["config"]["context_hidden"],
                heads_hidden=meta["config"]["heads_hidden"],
                labeler_hidden=meta["config"]["labeler_hidden"],
                labeler_softmax=meta["config"]["labeler_softmax"],
            )
            word_vocab = _vocab_from_meta(meta["word_vocab"])
            pos_vocab = _vocab_from_meta(meta["pos_vocab"])
            label_vocab = _vocab_from_meta(meta["label_vocab"])
            seen_pairs = [tuple(p) for p in meta["seen_pairs"]]
        except (KeyError, TypeError) as exc:
            raise CheckpointError(f"{path} meta is missing fields: {exc}") from exc
        model = LhrModel(word_vocab, pos_vocab, label_vocab, seen_pairs, cfg)
        saved = {name[len("param/"):]: archive[name]
                 for name in archive.files if name.startswith("param/")}
        current = dict(model.named_parameters())
        if set(saved) != set(current):
            missing = sorted(set(current) - set(saved))
            extra = sorted(set(saved) - set(current))
            raise CheckpointError(
                f"{path} parameters do not match the configuration "
                f"(missing {missing[:3]}, unexpected {extra[:3]})")
        for name, p in current.items():
            if saved[name].shape != p.data.shape:
                raise CheckpointError(
                    f"{path}: parameter {name!r} has shape {saved[name].shape}, "
                    f"expected {p.data.shape}")
            p.data[...] = saved[name]
    return model
