"""Versioned, checksummed binary formats for models and window archives.

Model file (all integers little-endian)::

    b"EDDM" | version u32
    | cell kind u8 | layers u16 | hidden u16 | dense u16 | input u16 | threshold f32
    | feature-spec digest (32 bytes)
    | tensor count u32, then per tensor:
        name length u8 | name | ndim u8 | dims u32 * ndim | data f32 * prod(dims)
    | CRC32 u32 of every preceding byte

Window archives use the same layout with magic ``b"EDDW"``, no config
block, and the tensors ``windows``, ``labels`` and ``origin_index``.
"""

import struct
import zlib

import numpy as np

from edgedetect.model import ModelConfig, ModelParams, _tensor_shapes
from edgedetect.nn.cells import CELL_KINDS

MODEL_MAGIC = b"EDDM"
ARCHIVE_MAGIC = b"EDDW"
FORMAT_VERSION = 1
DIGEST_SIZE = 32

_CONFIG = struct.Struct("<BHHHHf")
_U32 = struct.Struct("<I")


class ModelFileError(ValueError):
    """Base class for unreadable model or archive files."""


class BadMagicError(ModelFileError):
    pass


class UnsupportedVersionError(ModelFileError):
    pass


class TruncatedFileError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


class ShapeMismatchError(ModelFileError):
    pass


class DigestMismatchError(ValueError):
    """Model, archive and feature spec were not produced together."""


def _digest_bytes(digest):
    if digest is None:
        return bytes(DIGEST_SIZE)
    if isinstance(digest, str):
        digest = bytes.fromhex(digest)
    if len(digest) != DIGEST_SIZE:
        raise ValueError(f"feature-spec digest must be {DIGEST_SIZE} bytes, got {len(digest)}")
    return bytes(digest)


def encode_tensors(tensors):
    out = bytearray(_U32.pack(len(tensors)))
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        if len(raw) > 255:
            raise ValueError(f"tensor name too long: {name!r}")
        arr = np.asarray(arr)
        out += struct.pack("<B", len(raw)) + raw
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, buf, end):
        self.buf = buf
        self.pos = 0
        self.end = end

    def take(self, n, what):
        if self.pos + n > self.end:
            raise TruncatedFileError(f"file truncated while reading {what}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))


def _read_table(reader):
    """Walk the tensor table; returns ``[(name, shape, data_offset)]``."""
    (count,) = reader.unpack("<I", "tensor count")
    table = []
    for i in range(count):
        (name_len,) = reader.unpack("<B", f"tensor {i} name length")
        try:
            name = reader.take(name_len, f"tensor {i} name").decode("utf-8")
        except UnicodeDecodeError:
            raise ShapeMismatchError(f"tensor {i} has an undecodable name") from None
        (ndim,) = reader.unpack("<B", f"tensor {name} ndim")
        shape = reader.unpack(f"<{ndim}I", f"tensor {name} dims")
        offset = reader.pos
        reader.take(4 * int(np.prod(shape, dtype=np.int64)), f"tensor {name} data")
        table.append((name, tuple(shape), offset))
    return table


def _open(buf, magic):
    buf = bytes(buf)
    if len(buf) < 8:
        if buf[:len(magic)] != magic[:len(buf)]:
            raise BadMagicError("not an edgedetect file")
        raise TruncatedFileError("file shorter than its header")
    if buf[:4] != magic:
        raise BadMagicError(f"bad magic {buf[:4]!r}, expected {magic!r}")
    (version,) = _U32.unpack_from(buf, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format version {version} not supported (expected {FORMAT_VERSION})")
    if len(buf) < 12:
        raise TruncatedFileError("file too short for its checksum")
    reader = _Reader(buf, len(buf) - 4)
    reader.pos = 8
    return buf, reader


def _finish(buf, reader, table):
    if reader.pos != reader.end:
        raise TruncatedFileError("file length disagrees with its tensor table")
    (stored,) = _U32.unpack_from(buf, len(buf) - 4)
    if zlib.crc32(buf[:-4]) != stored:
        raise ChecksumError("CRC32 mismatch")
    return {
        name: np.frombuffer(buf, dtype="<f4", count=int(np.prod(shape, dtype=np.int64)), offset=off)
        .reshape(shape).astype(np.float64)
        for name, shape, off in table
    }


def _with_crc(body):
    return body + _U32.pack(zlib.crc32(body))


def save_model(params, feature_spec_digest=None):
    """Serialize a model to bytes. Tensors are stored as float32."""
    cfg = params.config
    body = bytearray(MODEL_MAGIC + _U32.pack(FORMAT_VERSION))
    body += _CONFIG.pack(CELL_KINDS.index(cfg.cell_kind), cfg.rnn_layers, cfg.hidden_size,
                         cfg.dense_size, cfg.input_size, cfg.threshold)
    body += _digest_bytes(feature_spec_digest)
    body += encode_tensors(params.tensors)
    return _with_crc(bytes(body))


def load_model(data):
    """Parse bytes written by :func:`save_model`.

    Returns ``(params, digest)``. Header, config and the full shape table
    are validated before any tensor data is decoded.
    """
    buf, reader = _open(data, MODEL_MAGIC)
    kind, layers, hidden, dense, inp, thr = reader.unpack(_CONFIG.format, "config block")
    if kind >= len(CELL_KINDS):
        raise ShapeMismatchError(f"unknown cell kind code {kind}")
    try:
        # shortest decimal that maps back to the stored float32, so 0.8 stays 0.8
        config = ModelConfig(CELL_KINDS[kind], layers, hidden, dense, inp,
                             float(str(np.float32(thr))))
    except ValueError as exc:
        raise ShapeMismatchError(f"invalid config block: {exc}") from None
    digest = reader.take(DIGEST_SIZE, "feature-spec digest")
    table = _read_table(reader)
    expected = _tensor_shapes(config)
    got = [(n, s) for n, s, _ in table]
    want = [(n, tuple(s)) for n, (s, _) in expected.items()]
    if got != want:
        raise ShapeMismatchError(f"tensor table does not match config {config}")
    tensors = _finish(buf, reader, table)
    return ModelParams(config, tensors), digest


def serialized_size_bytes(params):
    return len(save_model(params))


def save_archive(windows, feature_spec_digest=None):
    body = bytearray(ARCHIVE_MAGIC + _U32.pack(FORMAT_VERSION))
    body += _digest_bytes(feature_spec_digest)
    origin = np.asarray(windows.origin_index)
    if origin.size and origin.max() >= 2 ** 24:
        raise ValueError("origin indices beyond 2**24 are not exactly representable")
    body += encode_tensors({
        "windows": windows.data,
        "labels": windows.labels,
        "origin_index": origin,
    })
    return _with_crc(bytes(body))


def load_archive(data):
    """Returns ``(Windows, digest)``."""
    from edgedetect.features import Windows

    buf, reader = _open(data, ARCHIVE_MAGIC)
    digest = reader.take(DIGEST_SIZE, "feature-spec digest")
    table = _read_table(reader)
    names = [n for n, _, _ in table]
    if names != ["windows", "labels", "origin_index"]:
        raise ShapeMismatchError(f"unexpected archive tensors {names}")
    shapes = {n: s for n, s, _ in table}
    n = shapes["labels"][0] if shapes["labels"] else -1
    if len(shapes["windows"]) != 3 or shapes["labels"] != (n,) or shapes["origin_index"] != (n,) \
            or shapes["windows"][0] != n:
        raise ShapeMismatchError(f"inconsistent archive shapes {shapes}")
    t = _finish(buf, reader, table)
    return Windows(t["windows"], t["labels"].astype(np.int64), t["origin_index"].astype(np.int64)), digest


def check_digests(*digests):
    """Raise :class:`DigestMismatchError` unless every digest is identical."""
    ds = [bytes(d) for d in digests]
    if any(d != ds[0] for d in ds[1:]):
        raise DigestMismatchError(
            "feature-spec digest mismatch: the model, window archive and feature spec "
            "were not produced from the same preprocessing run ("
            + ", ".join(d.hex()[:12] for d in ds) + ")"
        )
