"""Bit-exact binary checkpoint format.

Layout (all integers little-endian)::

    b"FZCK"                      magic
    u16                          format version
    u32 + UTF-8 JSON             topology descriptor
    per tensor, until EOF:
        u16 + UTF-8              name
        u8                       dtype code (1 = float64, 2 = float32)
        u8                       rank
        u64 * rank               dims
        raw values               row-major, little-endian

The descriptor lists the tensor names in file order; a file whose records
disagree with that list is rejected as corrupt.  The same format is the
import path for externally trained backbone weights (:func:`import_weights`).
"""

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, CorruptionError, FormatError, ShapeError, VersionError

MAGIC = b"FZCK"
VERSION = 1

_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<f4")}
_CODES = {np.dtype("float64"): 1, np.dtype("float32"): 2}


@dataclass
class CheckpointRecord:
    version: int
    descriptor: dict
    tensors: dict

    @property
    def best_val_acc(self):
        return self.descriptor.get("best_val_acc")

    @property
    def epoch(self):
        return self.descriptor.get("epoch")

    @property
    def arch(self):
        return self.descriptor.get("arch")


def _descriptor(model, meta):
    state = model.state_dict()
    desc = {
        "arch": model.arch,
        "config": model.config,
        "head": model.head.to_dict() if model.head is not None else None,
        "freeze_plan": model.freeze_plan.to_dict() if model.freeze_plan is not None else None,
        "seed": model.seed,
        "tensors": list(state),
    }
    for key, value in (meta or {}).items():
        if key in desc:
            raise ConfigError(f"checkpoint meta key {key!r} is reserved")
        desc[key] = value
    return desc, state


def encode_checkpoint(model, meta=None):
    desc, state = _descriptor(model, meta)
    blob = json.dumps(desc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<H", VERSION), struct.pack("<I", len(blob)), blob]
    for name, arr in state.items():
        code = _CODES.get(arr.dtype)
        if code is None:
            raise ConfigError(f"{name}: unsupported dtype {arr.dtype}")
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(parts)


def save_checkpoint(model, meta, path):
    """Write atomically: a partial file never replaces a good one."""
    path = Path(path)
    data = encode_checkpoint(model, meta)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return path


class _Reader:
    def __init__(self, buf, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CorruptionError(f"{self.path}: truncated at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def done(self):
        return self.pos >= len(self.buf)


def decode_checkpoint(buf, path="<bytes>"):
    if buf[:4] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (magic {bytes(buf[:4])!r})")
    r = _Reader(buf, path)
    r.take(4)
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise VersionError(f"{path}: checkpoint version {version}, this build reads {VERSION}")
    (dlen,) = r.unpack("<I")
    try:
        desc = json.loads(r.take(dlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptionError(f"{path}: bad descriptor: {exc}") from None
    tensors = {}
    while not r.done:
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8", "replace")
        code, rank = r.unpack("<BB")
        if code not in _DTYPES:
            raise CorruptionError(f"{path}: tensor {name!r} has unknown dtype code {code}")
        dims = r.unpack(f"<{rank}Q")
        dtype = _DTYPES[code]
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = r.take(count * dtype.itemsize)
        tensors[name] = np.frombuffer(raw, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))
    expected = desc.get("tensors")
    if not isinstance(expected, list) or expected != list(tensors):
        raise CorruptionError(
            f"{path}: descriptor lists {len(expected or [])} tensors, file holds {len(tensors)}")
    return CheckpointRecord(version, desc, tensors)


def load_checkpoint(path):
    path = Path(path)
    return decode_checkpoint(path.read_bytes(), path)


def model_from_checkpoint(record):
    """Rebuild the model described by ``record`` and load its tensors."""
    from ..models import FreezePlan, HeadSpec, apply_freeze, attach_head, build_backbone

    desc = record.descriptor
    if desc.get("arch") is None:
        raise ConfigError("checkpoint has no architecture id; load its tensors with import_weights")
    model = build_backbone(desc["arch"], desc.get("config"), desc.get("seed") or 0)
    if desc.get("head") is not None:
        model = attach_head(model, HeadSpec(**desc["head"]))
    if desc.get("freeze_plan") is not None:
        apply_freeze(model, FreezePlan.from_dict(desc["freeze_plan"]))
    model.load_state_dict(record.tensors, strict=True)
    return model


def import_weights(model, source, strict=False):
    """Copy tensors whose names match into ``model``; returns the names loaded.

    ``source`` is a path or a :class:`CheckpointRecord`.  With
    ``strict=False`` unknown names are ignored, so a backbone-only file can
    initialize a model that already has its head attached.
    """
    record = source if isinstance(source, CheckpointRecord) else load_checkpoint(source)
    targets = model.state_dict()
    loaded = [n for n in record.tensors if n in targets]
    for n in loaded:
        if record.tensors[n].shape != targets[n].shape:
            raise ShapeError(
                f"{n}: file shape {record.tensors[n].shape} != model shape {targets[n].shape}")
    if strict and set(loaded) != set(targets):
        raise ConfigError(f"missing tensors: {sorted(set(targets) - set(loaded))}")
    model.load_state_dict({n: record.tensors[n] for n in loaded}, strict=False)
    return loaded
