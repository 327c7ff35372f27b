"""Bit-exact training state persistence.

A checkpoint is a text manifest plus a binary blob.  The manifest carries
scalar state (iteration, stage, optimizer step counts, rng state) and one
line per array: `name shape dtype byte-offset`.  The blob is a magic tag
followed by the arrays' little-endian bytes in manifest order.  Saving is
atomic (temp file + rename) and save -> load -> save reproduces identical
bytes, so resumed runs continue exactly where the original left off.
"""
from __future__ import annotations

import json
import os

import numpy as np

from . import curriculum as cur
from . import objectives as obj

MANIFEST_MAGIC = "textganlab-ckpt-v1"
BLOB_MAGIC = b"TGLCKPT1"


class CheckpointError(RuntimeError):
    pass


def _named_arrays(state: obj.TrainState) -> dict[str, np.ndarray]:
    # parameter names already carry a "gen."/"critic." prefix
    arrays: dict[str, np.ndarray] = {}
    for params in (state.generator.parameters(), state.critic.parameters()):
        for name, p in params.items():
            arrays[f"param.{name}"] = p.data
    for opt in (state.gen_opt, state.critic_opt):
        for name, arr in opt.m.items():
            arrays[f"adam.m.{name}"] = arr
        for name, arr in opt.v.items():
            arrays[f"adam.v.{name}"] = arr
    return arrays


def _atomic_write(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def save_checkpoint(path_stem: str, state: obj.TrainState,
                    extra_meta: dict[str, str] | None = None) -> None:
    arrays = _named_arrays(state)
    names = sorted(arrays)

    blob = bytearray(BLOB_MAGIC)
    lines = [MANIFEST_MAGIC]
    lines.append(f"@iteration {state.iteration}")
    lines.append(f"@stage_len {state.stage.current_max}")
    lines.append(f"@teacher_ratio {float(state.stage.teacher_ratio).hex()}")
    lines.append(f"@gen_t {state.gen_opt.t}")
    lines.append(f"@critic_t {state.critic_opt.t}")
    rng_state = json.dumps(state.rng.bit_generator.state,
                           separators=(",", ":"), sort_keys=True)
    lines.append(f"@rng_state {rng_state}")
    for key in sorted(extra_meta or {}):
        lines.append(f"@x_{key} {(extra_meta or {})[key]}")

    offset = 0
    for name in names:
        arr = arrays[name]
        raw = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes()
        shape = ",".join(str(d) for d in arr.shape) or "-"
        lines.append(f"{name} {shape} {arr.dtype.name} {offset}")
        blob.extend(raw)
        offset += len(raw)

    _atomic_write(path_stem + ".blob", bytes(blob))
    _atomic_write(path_stem + ".manifest",
                  ("\n".join(lines) + "\n").encode("utf-8"))


def _parse_manifest(text: str):
    lines = text.splitlines()
    if not lines or lines[0] != MANIFEST_MAGIC:
        raise CheckpointError("bad manifest magic")
    meta: dict[str, str] = {}
    entries: list[tuple[str, tuple[int, ...], str, int]] = []
    for line in lines[1:]:
        if not line.strip():
            continue
        if line.startswith("@"):
            key, _, value = line[1:].partition(" ")
            meta[key] = value
            continue
        parts = line.split(" ")
        if len(parts) != 4:
            raise CheckpointError(f"malformed manifest line: {line!r}")
        name, shape_s, dtype_s, offset_s = parts
        shape = () if shape_s == "-" else tuple(int(d) for d in shape_s.split(","))
        entries.append((name, shape, dtype_s, int(offset_s)))
    return meta, entries


def load_checkpoint(path_stem: str, state: obj.TrainState) -> dict[str, str]:
    """Restores `state` in place; returns any extra metadata saved with it."""
    with open(path_stem + ".manifest", encoding="utf-8") as fh:
        meta, entries = _parse_manifest(fh.read())
    with open(path_stem + ".blob", "rb") as fh:
        blob = fh.read()
    if not blob.startswith(BLOB_MAGIC):
        raise CheckpointError("bad blob magic")
    data = blob[len(BLOB_MAGIC):]

    arrays = _named_arrays(state)
    seen = set()
    for name, shape, dtype_s, offset in entries:
        if name not in arrays:
            raise CheckpointError(f"unexpected parameter {name!r}")
        target = arrays[name]
        if tuple(target.shape) != shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: checkpoint {shape}, model {tuple(target.shape)}")
        dt = np.dtype(dtype_s).newbyteorder("<")
        nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize if shape else dt.itemsize
        end = offset + nbytes
        if end > len(data):
            raise CheckpointError(
                f"truncated blob: need {end} bytes for {name!r}, have {len(data)}")
        loaded = np.frombuffer(data[offset:end], dtype=dt).reshape(shape)
        target[...] = loaded.astype(target.dtype, copy=False)
        seen.add(name)
    missing = set(arrays) - seen
    if missing:
        raise CheckpointError(f"missing parameter {sorted(missing)[0]!r}")

    for key in ("iteration", "stage_len", "teacher_ratio", "gen_t", "critic_t", "rng_state"):
        if key not in meta:
            raise CheckpointError(f"manifest missing field {key!r}")
    state.iteration = int(meta["iteration"])
    state.stage = cur.Stage(current_max=int(meta["stage_len"]),
                            teacher_ratio=float.fromhex(meta["teacher_ratio"]))
    state.gen_opt.t = int(meta["gen_t"])
    state.critic_opt.t = int(meta["critic_t"])
    state.rng.bit_generator.state = json.loads(meta["rng_state"])
    return {k[2:]: v for k, v in meta.items() if k.startswith("x_")}
