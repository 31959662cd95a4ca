"""Binary file formats shared with the trainer bridge.

Embedding files ("DFEMB1") and logit files ("DFLGT1") share one layout:

    magic        6 bytes, ASCII
    n            u32 little-endian, row count
    d            u32 little-endian, column count
    payload      n*d float32 little-endian, row-major
    id table     n entries of (u32 LE byte length, UTF-8 bytes), row-aligned

The feature-statistics sidecar ("DFSTA1") keeps the same endianness but
stores float64:

    magic        6 bytes "DFSTA1"
    d            u32 little-endian
    shrinkage    f64
    epsilon      f64
    d_min, d_max f64, f64
    mu           d float64
    sigma        d*d float64 row-major (regularized covariance)
"""

from __future__ import annotations

import struct
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, ValidationError

EMBEDDING_MAGIC = b"DFEMB1"
LOGIT_MAGIC = b"DFLGT1"
STATS_MAGIC = b"DFSTA1"


def _write_matrix(path: str | Path, magic: bytes, ids: Sequence[str], matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise ValidationError(f"expected a 2-d matrix, got shape {matrix.shape}")
    n, d = matrix.shape
    if len(ids) != n:
        raise ValidationError(f"id count {len(ids)} does not match row count {n}")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("matrix contains non-finite values")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<II", n, d))
        fh.write(matrix.astype("<f4", copy=False).tobytes(order="C"))
        for doc_id in ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def _read_exact(fh, size: int, what: str) -> bytes:
    data = fh.read(size)
    if len(data) != size:
        raise ParseError(f"truncated file while reading {what}")
    return data


def _read_matrix(path: str | Path, magic: bytes) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        found = _read_exact(fh, len(magic), "magic")
        if found != magic:
            raise ParseError(f"bad magic {found!r}, expected {magic!r}")
        n, d = struct.unpack("<II", _read_exact(fh, 8, "header"))
        payload = _read_exact(fh, 4 * n * d, "float payload")
        matrix = np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()
        ids = []
        for i in range(n):
            (length,) = struct.unpack("<I", _read_exact(fh, 4, f"id length {i}"))
            ids.append(_read_exact(fh, length, f"id {i}").decode("utf-8"))
        trailing = fh.read(1)
        if trailing:
            raise ParseError("trailing bytes after id table")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("matrix contains non-finite values")
    return ids, matrix


def write_embeddings(path: str | Path, ids: Sequence[str], matrix: np.ndarray) -> None:
    _write_matrix(path, EMBEDDING_MAGIC, ids, matrix)


def read_embeddings_raw(path: str | Path) -> tuple[list[str], np.ndarray]:
    return _read_matrix(path, EMBEDDING_MAGIC)


def write_logits(path: str | Path, ids: Sequence[str], matrix: np.ndarray) -> None:
    _write_matrix(path, LOGIT_MAGIC, ids, matrix)


def read_logits_raw(path: str | Path) -> tuple[list[str], np.ndarray]:
    return _read_matrix(path, LOGIT_MAGIC)


def write_feature_stats_raw(
    path: str | Path,
    mu: np.ndarray,
    sigma: np.ndarray,
    shrinkage: float,
    epsilon: float,
    d_min: float,
    d_max: float,
) -> None:
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    d = mu.shape[0]
    if sigma.shape != (d, d):
        raise ValidationError(f"sigma shape {sigma.shape} does not match d={d}")
    with open(path, "wb") as fh:
        fh.write(STATS_MAGIC)
        fh.write(struct.pack("<I", d))
        fh.write(struct.pack("<dddd", shrinkage, epsilon, d_min, d_max))
        fh.write(mu.astype("<f8", copy=False).tobytes())
        fh.write(sigma.astype("<f8", copy=False).tobytes(order="C"))


def read_feature_stats_raw(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        found = _read_exact(fh, len(STATS_MAGIC), "magic")
        if found != STATS_MAGIC:
            raise ParseError(f"bad magic {found!r}, expected {STATS_MAGIC!r}")
        (d,) = struct.unpack("<I", _read_exact(fh, 4, "dimension"))
        shrinkage, epsilon, d_min, d_max = struct.unpack(
            "<dddd", _read_exact(fh, 32, "scalars")
        )
        mu = np.frombuffer(_read_exact(fh, 8 * d, "mu"), dtype="<f8").copy()
        sigma = (
            np.frombuffer(_read_exact(fh, 8 * d * d, "sigma"), dtype="<f8")
            .reshape(d, d)
            .copy()
        )
    return {
        "mu": mu,
        "sigma": sigma,
        "shrinkage": shrinkage,
        "epsilon": epsilon,
        "d_min": d_min,
        "d_max": d_max,
    }


def _dump(path: str) -> dict:
    """Parse a matrix file and expose ids plus the bit-exact payload."""
    import base64

    magic = open(path, "rb").read(6)
    if magic == EMBEDDING_MAGIC:
        ids, matrix = read_embeddings_raw(path)
    elif magic == LOGIT_MAGIC:
        ids, matrix = read_logits_raw(path)
    else:
        raise ParseError(f"unrecognized magic {magic!r}")
    return {
        "format": magic.decode("ascii"),
        "n": matrix.shape[0],
        "d": matrix.shape[1],
        "ids": ids,
        "payload_b64": base64.b64encode(
            matrix.astype("<f4", copy=False).tobytes(order="C")
        ).decode("ascii"),
    }


if __name__ == "__main__":  # cross-implementation round-trip checks
    import json

    if len(sys.argv) != 3 or sys.argv[1] != "dump":
        print("usage: python -m driftforge.formats dump <file>", file=sys.stderr)
        sys.exit(1)
    print(json.dumps(_dump(sys.argv[2]), sort_keys=True))
