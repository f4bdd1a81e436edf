"""Matrix file formats.

CSV: the first line holds the shape as ``rows,cols``; each following line is
one matrix row of ``cols`` comma-separated floats.  Values are written with
``repr`` so a CSV round trip is exact as well.

Binary (``.xcov``): a 16-byte little-endian header ``b"XCOV"``, ``u32 rows``,
``u32 cols``, 4 zero bytes; then ``rows * cols`` float64 values in row-major
order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from xcov.errors import MatrixFormatError

__all__ = ["read_matrix", "read_csv", "read_binary", "write_matrix", "write_csv", "write_binary"]

MAGIC = b"XCOV"
_HEADER = struct.Struct("<4sII4x")


def write_csv(path: str | Path, M: NDArray[np.float64]) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    rows, cols = M.shape
    lines = [f"{rows},{cols}"]
    lines.extend(",".join(repr(float(x)) for x in row) for row in M)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path: str | Path) -> NDArray[np.float64]:
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MatrixFormatError("empty file", path=path)
    head = lines[0].split(",")
    try:
        rows, cols = (int(h) for h in head)
    except ValueError:
        raise MatrixFormatError(f"header must be 'rows,cols', got {lines[0]!r}", path=path, line=1) from None
    if rows < 0 or cols < 0:
        raise MatrixFormatError(f"negative shape {rows},{cols}", path=path, line=1)
    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(f"header declares {rows} rows, found {len(body)}", path=path, line=len(lines))
    out = np.empty((rows, cols), dtype=np.float64)
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise MatrixFormatError(
                f"expected {cols} values, found {len(fields)}", path=path, line=i + 2, column=min(len(fields), cols) + 1
            )
        for j, field in enumerate(fields):
            try:
                out[i, j] = float(field)
            except ValueError:
                raise MatrixFormatError(f"not a number: {field.strip()!r}", path=path, line=i + 2, column=j + 1) from None
    return out


def write_binary(path: str | Path, M: NDArray[np.float64]) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    rows, cols = M.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())


def read_binary(path: str | Path) -> NDArray[np.float64]:
    path = str(path)
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise MatrixFormatError("file shorter than the 16-byte header", path=path)
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"bad magic {magic!r}", path=path)
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise MatrixFormatError(f"expected {expected} bytes for {rows}x{cols}, found {len(data)}", path=path)
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64).reshape(rows, cols)


def _is_binary(path: Path) -> bool:
    if path.suffix.lower() in {".xcov", ".bin"}:
        return True
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def read_matrix(path: str | Path) -> NDArray[np.float64]:
    """Read either format, sniffing the magic bytes."""
    path = Path(path)
    return read_binary(path) if _is_binary(path) else read_csv(path)


def write_matrix(path: str | Path, M: NDArray[np.float64]) -> None:
    path = Path(path)
    if path.suffix.lower() in {".xcov", ".bin"}:
        write_binary(path, M)
    else:
        write_csv(path, M)
