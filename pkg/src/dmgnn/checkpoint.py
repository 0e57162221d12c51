"""Versioned binary checkpoint of named parameter tensors.

Layout (little-endian):
  magic   6 bytes  b"DMGNN\\x00"
  version u32      currently 1
  meta    u64 length + UTF-8 JSON (config dict, config hash, vocabulary
                   tokens, answer tokens, optimizer constants)
  count   u64
  entries name (u16 length + UTF-8), rows u32, cols u32,
          rows*cols float64 row-major values
"""

import json
import struct

import numpy as np

from . import autodiff as ad
from .config import ModelConfig
from .fusion import AnswerSpace
from .model import Model
from .text import Vocabulary

MAGIC = b"DMGNN\x00"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, metadata, tensors):
    """Write name->array tensors with a JSON metadata header."""
    meta_bytes = json.dumps(metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<Q", len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype=np.float64)
            if arr.ndim != 2:
                raise CheckpointError(f"{name}: only 2-D tensors are stored")
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: bad magic, not a checkpoint")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (meta_len,) = struct.unpack("<Q", fh.read(8))
        metadata = json.loads(fh.read(meta_len).decode("utf-8"))
        (count,) = struct.unpack("<Q", fh.read(8))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            rows, cols = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(rows * cols * 8), dtype=np.float64)
            tensors[name] = data.reshape(rows, cols).copy()
    return metadata, tensors


def save_model(path, model, cfg_hash, extra_meta=None):
    metadata = {
        "config_hash": cfg_hash,
        "model_config": vars(model.cfg).copy(),
        "vocab_tokens": [t for t in model.vocab.index if t != "<unk>"],
        "answer_tokens": model.answer_space.tokens,
        "adam": {"beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
    }
    if extra_meta:
        metadata.update(extra_meta)
    tensors = {name: p.data for name, p in model.params.items()}
    tensors["vocab.table"] = model.vocab.table
    save_checkpoint(path, metadata, tensors)


def load_model(path):
    metadata, tensors = load_checkpoint(path)
    cfg = ModelConfig(**metadata["model_config"]).validate()
    table = tensors.pop("vocab.table")
    vocab = Vocabulary(metadata["vocab_tokens"], table, cfg.d_emb)
    space = AnswerSpace(metadata["answer_tokens"])
    params = {
        name: ad.Tensor(arr, requires_grad=True) for name, arr in tensors.items()
    }
    return Model(cfg, vocab, space, params=params), metadata
