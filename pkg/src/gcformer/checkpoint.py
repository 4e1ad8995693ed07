"""Binary checkpoint format.

Layout::

    b"GCFCKPT\\n"                 8-byte magic
    uint32 little-endian         header length in bytes
    header                       UTF-8 JSON, sorted keys
    payload                      little-endian float64 parameters, concatenated

The header holds ``version``, ``model_config``, free-form ``meta`` and a
``params`` list of ``{name, shape, dtype, offset}`` entries (offsets in
bytes from the payload start). Nothing time-dependent is written, so equal
models give byte-equal files.
"""

import json
import struct
from collections import OrderedDict

import numpy as np

from .errors import CheckpointError
from .model import GCformerModel, ModelConfig

MAGIC = b"GCFCKPT\n"
VERSION = "gcf1"
_DTYPE = "<f8"


def dumps(model, meta=None):
    entries, blobs, offset = [], [], 0
    for name, arr in model.params.items():
        data = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": _DTYPE, "offset": offset})
        blobs.append(data)
        offset += len(data)
    header = {
        "version": VERSION,
        "model_config": model.config.to_dict(),
        "meta": meta or {},
        "params": entries,
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(raw)) + raw + b"".join(blobs)


def loads(buf):
    """Inverse of :func:`dumps`; returns ``(model, meta)``."""
    if not buf.startswith(MAGIC):
        raise CheckpointError("not a checkpoint: bad magic bytes")
    if len(buf) < len(MAGIC) + 4:
        raise CheckpointError("truncated checkpoint header")
    (hlen,) = struct.unpack_from("<I", buf, len(MAGIC))
    start = len(MAGIC) + 4
    raw = buf[start:start + hlen]
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError("header is not valid JSON", _sniff_version(raw)) from None
    version = header.get("version") if isinstance(header, dict) else None
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version, expected {VERSION!r}", version)
    payload = buf[start + hlen:]
    try:
        config = ModelConfig.from_dict(header["model_config"])
        params = OrderedDict()
        for e in header["params"]:
            if e["dtype"] != _DTYPE:
                raise CheckpointError(f"{e['name']}: unsupported dtype {e['dtype']!r}", version)
            shape = tuple(int(s) for s in e["shape"])
            count = int(np.prod(shape, dtype=int))
            lo, hi = int(e["offset"]), int(e["offset"]) + 8 * count
            if hi > len(payload):
                raise CheckpointError(f"{e['name']}: payload truncated", version)
            params[e["name"]] = np.frombuffer(payload[lo:hi], dtype=_DTYPE).reshape(shape).astype(float)
        model = GCformerModel(config, params)
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint does not match the model: {exc}", version) from None
    return model, header.get("meta", {})


def save(model, path, meta=None):
    with open(path, "wb") as fh:
        fh.write(dumps(model, meta))


def load(path):
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return loads(buf)


def _sniff_version(raw):
    # best effort for damaged headers so the error can still name the version
    text = raw.decode("utf-8", "replace")
    key = '"version":"'
    i = text.find(key)
    if i < 0:
        return None
    j = text.find('"', i + len(key))
    return text[i + len(key):j] if j > 0 else None
