"""Checkpoint codec.

Layout: 8-byte magic "IVDCKPT1", little-endian u64 manifest length, canonical
JSON manifest, then one contiguous little-endian fp64 blob. The manifest
records parameter names/shapes/offsets (in elements), optional Adam slots,
and an arbitrary JSON metadata object (vocabulary, model config, decision
threshold). Offsets follow manifest order, so files are byte-reproducible.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from ..util import dump_json
from .params import Adam, ParamStore

MAGIC = b"IVDCKPT1"


def save_checkpoint(
    path: str | Path,
    store: ParamStore,
    meta: dict | None = None,
    optimizer: Adam | None = None,
) -> None:
    arrays: list[np.ndarray] = []
    offset = 0
    params_manifest = []
    for name, tensor in store.items():
        arrays.append(tensor.data)
        params_manifest.append(
            {"name": name, "shape": list(tensor.data.shape), "offset": offset}
        )
        offset += tensor.data.size
    opt_manifest = None
    if optimizer is not None:
        slots = []
        for name, _ in store.items():
            slots.append({"name": name, "m_offset": offset})
            arrays.append(optimizer.m[name])
            offset += optimizer.m[name].size
            slots[-1]["v_offset"] = offset
            arrays.append(optimizer.v[name])
            offset += optimizer.v[name].size
        opt_manifest = {"kind": "adam", "t": optimizer.t, "slots": slots}
    manifest = {
        "version": 1,
        "params": params_manifest,
        "optimizer": opt_manifest,
        "meta": meta or {},
    }
    manifest_bytes = dump_json(manifest).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(manifest_bytes)))
        fh.write(manifest_bytes)
        fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[ParamStore, dict, dict | None]:
    """Returns (store, meta, optimizer_state). optimizer_state is None when
    the checkpoint was saved without one; otherwise a dict consumable by
    Adam.load_state."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (manifest_len,) = struct.unpack("<Q", raw[8:16])
    manifest_end = 16 + manifest_len
    if manifest_end > len(raw):
        raise CheckpointError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[16:manifest_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable manifest: {exc}") from exc
    if manifest.get("version") != 1:
        raise CheckpointError(f"{path}: unsupported version {manifest.get('version')!r}")
    blob = np.frombuffer(raw[manifest_end:], dtype="<f8")

    def read(offset: int, shape: list[int]) -> np.ndarray:
        size = int(np.prod(shape)) if shape else 1
        if offset + size > blob.size:
            raise CheckpointError(f"{path}: blob shorter than manifest claims")
        return np.array(blob[offset : offset + size], dtype=np.float64).reshape(shape)

    store = ParamStore()
    shapes = {}
    for entry in manifest["params"]:
        arr = read(entry["offset"], entry["shape"])
        store.add(entry["name"], arr)
        shapes[entry["name"]] = entry["shape"]
    opt_state = None
    if manifest.get("optimizer"):
        om = manifest["optimizer"]
        if om.get("kind") != "adam":
            raise CheckpointError(f"{path}: unknown optimizer {om.get('kind')!r}")
        m = {}
        v = {}
        for slot in om["slots"]:
            m[slot["name"]] = read(slot["m_offset"], shapes[slot["name"]])
            v[slot["name"]] = read(slot["v_offset"], shapes[slot["name"]])
        opt_state = {"t": om["t"], "m": m, "v": v}
    return store, manifest.get("meta", {}), opt_state
