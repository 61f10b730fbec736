"""Single-file checkpoint container: versioned header plus raw arrays.

Layout: 8-byte magic, u32 version, u64 header length, a sorted-key JSON
header, the array payload, and a trailing crc32 over header and payload.
Arrays are stored C-ordered little-endian in sorted name order, so a run
that produces identical values produces identical bytes.
"""

import json
import struct
import zlib

import numpy as np

from .errors import DataError, SchemaError

MAGIC = b"SALSTMCK"
VERSION = 1

_DTYPES = {"f8": "<f8", "i8": "<i8"}


def save_blob(path, header, arrays):
    """Write a header dict and named numpy arrays as one checkpoint file."""
    names = sorted(arrays)
    meta = []
    chunks = []
    for name in names:
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype == np.float64:
            code = "f8"
        elif arr.dtype == np.int64:
            code = "i8"
        else:
            raise DataError("array %s has unsupported dtype %s" % (name, arr.dtype))
        meta.append({"name": name, "shape": list(arr.shape), "dtype": code})
        chunks.append(arr.astype(_DTYPES[code]).tobytes(order="C"))
    full_header = dict(header)
    full_header["arrays"] = meta
    header_bytes = json.dumps(full_header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(chunks)
    crc = zlib.crc32(header_bytes + payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def load_blob(path):
    """Read a checkpoint file back into (header, arrays)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as err:
        raise DataError("cannot read checkpoint %s: %s" % (path, err))
    if len(blob) < len(MAGIC) + 12 + 4:
        raise DataError("checkpoint %s is truncated" % (path,))
    if blob[: len(MAGIC)] != MAGIC:
        raise SchemaError("%s is not a checkpoint file" % (path,))
    offset = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if version != VERSION:
        raise SchemaError(
            "unsupported checkpoint version %d (this build reads version %d)"
            % (version, VERSION)
        )
    (header_len,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    if offset + header_len + 4 > len(blob):
        raise DataError("checkpoint %s is truncated" % (path,))
    header_bytes = blob[offset : offset + header_len]
    offset += header_len
    payload = blob[offset:-4]
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    crc = zlib.crc32(header_bytes + payload) & 0xFFFFFFFF
    if crc != stored_crc:
        raise DataError("checkpoint %s is corrupted (crc mismatch)" % (path,))
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise SchemaError("checkpoint %s has a malformed header: %s" % (path, err))
    meta = header.pop("arrays", None)
    if not isinstance(meta, list):
        raise SchemaError("checkpoint %s header lacks an array table" % (path,))
    arrays = {}
    cursor = 0
    for entry in meta:
        name = entry["name"]
        shape = tuple(int(d) for d in entry["shape"])
        dtype = _DTYPES.get(entry["dtype"])
        if dtype is None:
            raise SchemaError("checkpoint %s: array %s has unknown dtype" % (path, name))
        count = 1
        for d in shape:
            count *= d
        nbytes = count * 8
        if cursor + nbytes > len(payload):
            raise DataError("checkpoint %s is truncated" % (path,))
        arrays[name] = np.frombuffer(
            payload, dtype=dtype, count=count, offset=cursor
        ).reshape(shape).copy()
        cursor += nbytes
    if cursor != len(payload):
        raise DataError("checkpoint %s has %d trailing payload bytes" % (path, len(payload) - cursor))
    return header, arrays
