"""Versioned binary checkpoint container.

Layout: magic, format version, JSON header (array table + free-form
metadata), concatenated little-endian array payloads, trailing CRC32.
The same container backs bare nets, RL learner snapshots, and distilled
policies (which stash their extra structure in the metadata dict).
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from distillab.nets.dense import DenseNet
from distillab.nets.optim import AdamState

MAGIC = b"DLCKPT\x00\x00"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


class CorruptCheckpointError(CheckpointError):
    """File is truncated, has a bad magic, or fails its CRC."""


class VersionError(CheckpointError):
    """File was written by an unknown (newer) format version."""


def save_arrays(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays plus a JSON-able metadata dict."""
    table = []
    payloads = []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        table.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape)})
        payloads.append(le.tobytes())  # tobytes() is C-order regardless of layout
    header = json.dumps({"meta": meta, "arrays": table}, sort_keys=True).encode("utf-8")
    body = MAGIC + struct.pack("<II", FORMAT_VERSION, len(header)) + header + b"".join(payloads)
    blob = body + struct.pack("<I", zlib.crc32(body))
    Path(path).write_bytes(blob)


def load_arrays(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read back ``save_arrays`` output, validating version and CRC."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 12 or blob[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack_from("<II", blob, len(MAGIC))
    if version > FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version} is newer than supported {FORMAT_VERSION}")
    body, tail = blob[:-4], blob[-4:]
    if struct.unpack("<I", tail)[0] != zlib.crc32(body):
        raise CorruptCheckpointError(f"{path}: CRC mismatch (truncated or corrupted)")
    offset = len(MAGIC) + 8
    try:
        header = json.loads(body[offset : offset + header_len].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as err:
        raise CorruptCheckpointError(f"{path}: unreadable header") from err
    offset += header_len
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * np.dtype(entry["dtype"]).itemsize
        chunk = body[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise CorruptCheckpointError(f"{path}: payload truncated at array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=entry["dtype"]).reshape(entry["shape"]).copy()
        offset += nbytes
    if offset != len(body):
        raise CorruptCheckpointError(f"{path}: {len(body) - offset} trailing bytes")
    return header["meta"], arrays


def net_to_arrays(net: DenseNet, prefix: str = "net") -> tuple[dict, dict[str, np.ndarray]]:
    spec = {"widths": net.widths, "activations": net.activations, "layer_norm": bool(net.ln_gains)}
    arrays = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"{prefix}.w{i}"] = w
        arrays[f"{prefix}.b{i}"] = b
    for i, (g, b) in enumerate(zip(net.ln_gains, net.ln_biases)):
        arrays[f"{prefix}.lng{i}"] = g
        arrays[f"{prefix}.lnb{i}"] = b
    return spec, arrays


def net_from_arrays(spec: dict, arrays: dict[str, np.ndarray], prefix: str = "net") -> DenseNet:
    widths = list(spec["widths"])
    acts = list(spec["activations"])
    weights = [arrays[f"{prefix}.w{i}"] for i in range(len(widths) - 1)]
    biases = [arrays[f"{prefix}.b{i}"] for i in range(len(widths) - 1)]
    gains, ln_biases = [], []
    if spec.get("layer_norm"):
        gains = [arrays[f"{prefix}.lng{i}"] for i in range(len(widths) - 2)]
        ln_biases = [arrays[f"{prefix}.lnb{i}"] for i in range(len(widths) - 2)]
    return DenseNet(widths, acts, weights, biases, gains, ln_biases)


def save_checkpoint(net: DenseNet, opt: AdamState | None, path, extra_meta: dict | None = None) -> None:
    """Persist one net (and optionally its optimizer state) to ``path``."""
    spec, arrays = net_to_arrays(net)
    meta = {"kind": "dense_net", "net": spec, "extra": extra_meta or {}}
    if opt is not None:
        meta["opt"] = {
            "learning_rate": opt.learning_rate,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
            "step_count": opt.step_count,
        }
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"opt.m{i}"] = m
            arrays[f"opt.v{i}"] = v
    save_arrays(path, meta, arrays)


def load_checkpoint(path) -> tuple[DenseNet, AdamState | None]:
    meta, arrays = load_arrays(path)
    if meta.get("kind") != "dense_net":
        raise CheckpointError(f"{path}: not a bare net checkpoint (kind={meta.get('kind')!r})")
    net = net_from_arrays(meta["net"], arrays)
    opt = None
    if "opt" in meta:
        o = meta["opt"]
        n = len(net.params())
        opt = AdamState(
            learning_rate=o["learning_rate"],
            beta1=o["beta1"],
            beta2=o["beta2"],
            eps=o["eps"],
            step_count=o["step_count"],
            m=[arrays[f"opt.m{i}"] for i in range(n)],
            v=[arrays[f"opt.v{i}"] for i in range(n)],
        )
    return net, opt
