"""Matrix CSV export and the little-endian VMFC feature archive.

Archive layout::

    b"VMFC" | u32 version=1 | u32 count
    repeated count times:
        u32 rows | u32 cols | u32 id_len | id (UTF-8) | rows*cols float32, row-major
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

from ..errors import ArchiveError, BadMagic, TruncatedFile, VersionMismatch
from .mfcc import MfccTensor

MAGIC = b"VMFC"
VERSION = 1


def matrix_to_csv(matrix, digest: str = "") -> str:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    lines = [f"# rows={m.shape[0]} cols={m.shape[1]} config={digest}"]
    lines += [",".join(format(v, ".17g") for v in row) for row in m]
    return "\n".join(lines) + "\n"


def write_matrix_csv(path, matrix, digest: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(matrix_to_csv(matrix, digest))


def read_matrix_csv(path) -> tuple[np.ndarray, str]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# rows="):
            raise ArchiveError(f"{path}: missing matrix header")
        meta = dict(tok.split("=", 1) for tok in header[2:].split())
        rows, cols = int(meta["rows"]), int(meta["cols"])
        data = np.loadtxt(fh, delimiter=",", ndmin=2) if rows else np.zeros((0, cols))
    if data.shape != (rows, cols):
        raise ArchiveError(f"{path}: header says {rows}x{cols}, body is {data.shape}")
    return data, meta.get("config", "")


def write_archive(path, tensors) -> None:
    buf = io.BytesIO()
    tensors = list(tensors)
    buf.write(MAGIC + struct.pack("<II", VERSION, len(tensors)))
    for t in tensors:
        c = np.ascontiguousarray(t.coeffs, dtype="<f4")
        sid = t.source_id.encode("utf-8")
        buf.write(struct.pack("<III", c.shape[0], c.shape[1], len(sid)))
        buf.write(sid)
        buf.write(c.tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def read_archive(path, config_digest: str = "") -> list[MfccTensor]:
    with open(os.fspath(path), "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise BadMagic(f"{path}: not a VMFC archive")
    if len(data) < 12:
        raise TruncatedFile(f"{path}: header truncated")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise VersionMismatch(f"{path}: archive version {version}, expected {VERSION}")
    pos = 12
    out = []
    for i in range(count):
        if pos + 12 > len(data):
            raise TruncatedFile(f"{path}: tensor {i} header truncated")
        rows, cols, id_len = struct.unpack_from("<III", data, pos)
        pos += 12
        end = pos + id_len + 4 * rows * cols
        if end > len(data):
            raise TruncatedFile(f"{path}: tensor {i} body truncated")
        sid = data[pos : pos + id_len].decode("utf-8")
        pos += id_len
        coeffs = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=pos).reshape(rows, cols)
        pos = end
        out.append(MfccTensor(coeffs.astype(np.float32), config_digest, sid))
    return out
