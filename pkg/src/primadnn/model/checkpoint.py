"""Binary checkpoint serialization.

Layout: magic "PDNC", version u32, metadata-length u32, UTF-8 JSON
metadata (model config, feature standardization stats, named block
index), then the parameter/buffer blocks as little-endian float64 in
index order. Round-trips are exact.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .network import ModelParams
from ..frontend import ChannelStats

CHECKPOINT_MAGIC = b"PDNC"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    model: ModelParams
    stats: ChannelStats | None = None
    extra: dict | None = None


def _stats_to_dict(stats: ChannelStats | None):
    if stats is None:
        return None
    return {
        "mean": list(map(float, stats.mean)),
        "std": list(map(float, stats.std)),
        "channel_names": list(stats.channel_names),
    }


def _stats_from_dict(d):
    if d is None:
        return None
    return ChannelStats(
        mean=np.array(d["mean"]), std=np.array(d["std"]), channel_names=tuple(d["channel_names"])
    )


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    blocks = [("param", k, ckpt.model.params[k]) for k in sorted(ckpt.model.params)]
    blocks += [("buffer", k, ckpt.model.buffers[k]) for k in sorted(ckpt.model.buffers)]
    meta = {
        "model_config": ckpt.config.to_dict(),
        "stats": _stats_to_dict(ckpt.stats),
        "extra": ckpt.extra or {},
        "blocks": [{"kind": kind, "name": name, "shape": list(a.shape)} for kind, name, a in blocks],
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(meta_bytes)))
        f.write(meta_bytes)
        for _, _, a in blocks:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        head = f.read(12)
        if len(head) < 12 or head[:4] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a PDNC checkpoint")
        version, meta_len = struct.unpack("<II", head[4:])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        meta = json.loads(f.read(meta_len).decode("utf-8"))
        params, buffers = {}, {}
        for blk in meta["blocks"]:
            shape = tuple(blk["shape"])
            n = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8")
            if data.size != n:
                raise ValueError(f"{path}: truncated checkpoint at block {blk['name']}")
            arr = data.reshape(shape).astype(np.float64)
            (params if blk["kind"] == "param" else buffers)[blk["name"]] = arr
    config = ModelConfig.from_dict(meta["model_config"])
    return Checkpoint(
        config=config,
        model=ModelParams(params=params, buffers=buffers),
        stats=_stats_from_dict(meta.get("stats")),
        extra=meta.get("extra") or {},
    )
