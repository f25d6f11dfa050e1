"""Binary checkpoint container.

Layout (all integers little-endian ``u32``)::

    b"CANONKPT"                      8-byte magic
    version                          currently 1
    config_len, config_json          UTF-8 JSON, keys sorted
    n_records
    per record:
        name_len, name               UTF-8
        ndim, dims[ndim]
        data                         float64 little-endian, row-major

The JSON config carries the training configuration and the RNG state.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..errors import FormatError

MAGIC = b"CANONKPT"
VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    records: Dict[str, np.ndarray] = field(default_factory=dict)
    version: int = VERSION


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    cfg = json.dumps(ckpt.config, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", ckpt.version), struct.pack("<I", len(cfg)), cfg,
             struct.pack("<I", len(ckpt.records))]
    for name, arr in ckpt.records.items():
        a = np.asarray(arr, dtype="<f8", order="C")  # keeps 0-d records 0-d
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape))
        parts.append(a.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob, self.pos = blob, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError("truncated", f"file ends inside {what}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def decode_checkpoint(blob: bytes) -> Checkpoint:
    if len(blob) < len(MAGIC) or blob[:len(MAGIC)] != MAGIC:
        raise FormatError("corrupt-header", "missing CANONKPT magic")
    r = _Reader(blob)
    r.take(len(MAGIC), "magic")
    version = r.u32("version")
    if version != VERSION:
        raise FormatError("unsupported-version", f"version {version}, reader supports {VERSION}")
    cfg_raw = r.take(r.u32("config length"), "config")
    try:
        config = json.loads(cfg_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError("corrupt-header", f"config is not valid JSON: {exc}") from None
    records = {}
    for _ in range(r.u32("record count")):
        name = r.take(r.u32("name length"), "name").decode("utf-8", errors="strict")
        ndim = r.u32("ndim")
        dims = struct.unpack(f"<{ndim}I", r.take(4 * ndim, "shape"))
        count = int(np.prod(dims)) if ndim else 1
        data = np.frombuffer(r.take(8 * count, f"data of {name}"), dtype="<f8").astype(np.float64)
        records[name] = data.reshape(dims)
    if r.pos != len(blob):
        raise FormatError("corrupt-header", f"{len(blob) - r.pos} trailing bytes")
    return Checkpoint(config, records, version)


def write_checkpoint(path: str, ckpt: Checkpoint) -> None:
    """Atomic write: temp file in the same directory, then rename."""
    blob = encode_checkpoint(ckpt)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def read_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())


def _canonicalizer_kind(bundle) -> str:
    from ..nets.gconv import FixedCanonicalizer
    from ..nets.pointhead import FixedPointCanonicalizer

    if bundle.canonicalizer is None:
        return "none"
    if isinstance(bundle.canonicalizer, (FixedCanonicalizer, FixedPointCanonicalizer)):
        return "identity"
    return "learned"


def bundle_checkpoint(bundle, rng_state: Optional[dict] = None) -> Checkpoint:
    """Snapshot ``bundle`` (config, canonicalizer kind, RNG state, weights)."""
    config = {"config": bundle.config.to_dict(), "canonicalizer": _canonicalizer_kind(bundle),
              "rng_state": rng_state}
    records = {name: np.array(arr, dtype=np.float64) for name, arr in sorted(bundle.state_dict().items())}
    return Checkpoint(config, records)


def bundle_from_checkpoint(ckpt: Checkpoint):
    """Rebuild the bundle described by ``ckpt`` and load its weights."""
    from ..config import TrainConfig
    from ..harness.models import build_bundle, identity_canonicalizer

    try:
        config = TrainConfig.from_dict(ckpt.config["config"])
        kind = ckpt.config.get("canonicalizer", "learned")
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError("corrupt-header", f"bad config snapshot: {exc}") from None
    if kind == "identity":
        bundle = build_bundle(config, identity_canonicalizer(config))
    elif kind == "none":
        bundle = build_bundle(config.replace(mode="vanilla"))
        bundle.config = config
    else:
        bundle = build_bundle(config)
    try:
        bundle.load_state_dict(ckpt.records)
    except (KeyError, ValueError) as exc:
        raise FormatError("corrupt-header", f"records do not match the config: {exc}") from None
    bundle.eval()
    return bundle


def save_checkpoint(path: str, bundle, rng_state: Optional[dict] = None) -> None:
    write_checkpoint(path, bundle_checkpoint(bundle, rng_state))


def load_checkpoint(path: str):
    """Read ``path`` and return the rebuilt bundle.

    Any format problem raises :class:`FormatError` before a bundle exists, so
    a damaged file never yields a partially loaded model.
    """
    return bundle_from_checkpoint(read_checkpoint(path))
