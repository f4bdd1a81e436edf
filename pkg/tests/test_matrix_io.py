from __future__ import annotations

import numpy as np
import pytest

from xcov.errors import MatrixFormatError
from xcov.matrix_io import read_binary, read_csv, read_matrix, write_binary, write_csv, write_matrix


@pytest.mark.parametrize("name", ["m.csv", "m.xcov"])
def test_round_trip_is_exact(tmp_path, name):
    M = np.random.default_rng(0).standard_normal((4, 7))
    write_matrix(tmp_path / name, M)
    np.testing.assert_array_equal(read_matrix(tmp_path / name), M)


def test_binary_header_layout(tmp_path):
    write_binary(tmp_path / "a.bin", np.arange(6.0).reshape(2, 3))
    raw = (tmp_path / "a.bin").read_bytes()
    assert raw[:4] == b"XCOV"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:12], "little") == 3
    assert raw[12:16] == b"\0\0\0\0"
    assert len(raw) == 16 + 6 * 8


def test_magic_sniffed_without_suffix(tmp_path):
    write_binary(tmp_path / "a.dat", np.eye(2))
    np.testing.assert_array_equal(read_matrix(tmp_path / "a.dat"), np.eye(2))


def test_csv_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("2,3\n1,2,3\n4,oops,6\n")
    with pytest.raises(MatrixFormatError) as info:
        read_csv(path)
    assert (info.value.line, info.value.column) == (3, 2)
    assert "line 3" in str(info.value) and "column 2" in str(info.value)


def test_csv_ragged_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("2,3\n1,2,3\n4,5\n")
    with pytest.raises(MatrixFormatError, match="line 3"):
        read_csv(path)


def test_csv_row_count_and_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("3,1\n1\n2\n")
    with pytest.raises(MatrixFormatError, match="3 rows"):
        read_csv(path)
    path.write_text("a,b\n")
    with pytest.raises(MatrixFormatError, match="line 1"):
        read_csv(path)


def test_truncated_binary(tmp_path):
    path = tmp_path / "t.xcov"
    write_binary(path, np.ones((3, 3)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(MatrixFormatError, match="expected"):
        read_binary(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "t.xcov"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(MatrixFormatError, match="magic"):
        read_binary(path)


def test_write_csv_first_line_is_shape(tmp_path):
    write_csv(tmp_path / "a.csv", np.zeros((2, 5)))
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "2,5"
