"""Versioned binary checkpoint container.

Layout (all little-endian):

    magic "SFTB" | u32 version | config block | u32 n_params |
    repeat: u16 name_len | name utf-8 | u8 ndim | u32 dims... | f64 data...

Config block: u32 src_vocab, u32 tgt_vocab, u32 embed_dim, u32 hidden_dim,
u8 encoder_mode, u8 attention_mode, u8 normalization_mode, u8 reserved.
Parameter matrices are written in the model's declared order; round-trips
are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import (ATTENTION_MODES, ENCODER_MODES, NORMALIZATION_MODES,
                    ModelConfig, ModelParams, init_params)

MAGIC = b"SFTB"
VERSION = 1


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    cfg = params.config
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<IIII", cfg.src_vocab, cfg.tgt_vocab,
                       cfg.embed_dim, cfg.hidden_dim)
    out += struct.pack("<BBBB",
                       ENCODER_MODES.index(cfg.encoder_mode),
                       ATTENTION_MODES.index(cfg.attention_mode),
                       NORMALIZATION_MODES.index(cfg.normalization_mode), 0)
    items = params.items()
    out += struct.pack("<I", len(items))
    for name, tensor in items:
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw))
        out += raw
        shape = tensor.values.shape
        out += struct.pack("<B", len(shape))
        out += struct.pack(f"<{len(shape)}I", *shape)
        out += np.ascontiguousarray(tensor.values, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise DataError(f"truncated checkpoint {self.path}")
        vals = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return vals

    def take_bytes(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise DataError(f"truncated checkpoint {self.path}")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk


def load_checkpoint(path: str | Path) -> ModelParams:
    r = _Reader(Path(path).read_bytes(), path)
    if r.take_bytes(4) != MAGIC:
        raise DataError(f"{path}: not a checkpoint (bad magic)")
    (version,) = r.take("<I")
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    src_vocab, tgt_vocab, embed_dim, hidden_dim = r.take("<IIII")
    enc_i, att_i, norm_i, _ = r.take("<BBBB")
    try:
        cfg = ModelConfig(
            src_vocab=src_vocab, tgt_vocab=tgt_vocab,
            embed_dim=embed_dim, hidden_dim=hidden_dim,
            encoder_mode=ENCODER_MODES[enc_i],
            attention_mode=ATTENTION_MODES[att_i],
            normalization_mode=NORMALIZATION_MODES[norm_i])
    except IndexError:
        raise DataError(f"{path}: corrupt config block") from None

    (n_params,) = r.take("<I")
    loaded: dict[str, np.ndarray] = {}
    order: list[str] = []
    for _ in range(n_params):
        (name_len,) = r.take("<H")
        name = r.take_bytes(name_len).decode("utf-8")
        (ndim,) = r.take("<B")
        shape = r.take(f"<{ndim}I") if ndim else ()
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = r.take_bytes(count * 8)
        loaded[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        order.append(name)
    if r.offset != len(r.data):
        raise DataError(f"{path}: trailing bytes after parameters")

    # template gives the declared order and shapes for this config
    template = init_params(cfg, seed=0)
    expected = [name for name, _ in template.items()]
    if order != expected:
        raise DataError(f"{path}: parameter list does not match config "
                        f"(got {order[:3]}..., expected {expected[:3]}...)")
    for name, tensor in template.items():
        arr = loaded[name]
        if arr.shape != tensor.values.shape:
            raise DataError(f"{path}: parameter {name} has shape {arr.shape}, "
                            f"expected {tensor.values.shape}")
        tensor.values = arr
        tensor.grad = None
    return template


def clone_params(params: ModelParams) -> ModelParams:
    """Deep copy of the parameter set (fresh Tensors, same values)."""
    fresh = init_params(params.config, seed=0)
    for (_, dst), (_, src) in zip(fresh.items(), params.items()):
        dst.values = src.values.copy()
        dst.grad = None
    return fresh


def with_mode(params: ModelParams, normalization_mode: str) -> ModelParams:
    """Same tensors, reinterpreted under a different normalization mode."""
    cfg = params.config
    new_cfg = ModelConfig(
        src_vocab=cfg.src_vocab, tgt_vocab=cfg.tgt_vocab,
        embed_dim=cfg.embed_dim, hidden_dim=cfg.hidden_dim,
        encoder_mode=cfg.encoder_mode, attention_mode=cfg.attention_mode,
        normalization_mode=normalization_mode)
    return ModelParams(
        config=new_cfg, src_embed=params.src_embed, tgt_embed=params.tgt_embed,
        enc_fwd=params.enc_fwd, enc_bwd=params.enc_bwd, dec=params.dec,
        attn=params.attn, init_h_w=params.init_h_w, init_h_b=params.init_h_b,
        init_c_w=params.init_c_w, init_c_b=params.init_c_b,
        out_w=params.out_w, out_b=params.out_b)
