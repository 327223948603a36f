"""Test input parsing, number formatting and atomic output."""

import io
import os

import numpy as np
import pytest

from shide.utils import format_number, read_data, read_values, render_csv, write_atomic


def test_read_values():
    values = read_values(io.StringIO("x\n1.5 trailing\n\n-2\n3e-1\n"))
    assert values.tolist() == [1.5, -2.0, 0.3]
    assert read_values(io.StringIO("1\n2\n")).tolist() == [1.0, 2.0]
    print("✓ read_values: PASS")


def test_read_values_errors():
    with pytest.raises(ValueError) as excinfo:
        read_values(io.StringIO("1\n2\nabc\n"), "data.txt")
    assert "data.txt: line 3" in str(excinfo.value)

    with pytest.raises(ValueError) as excinfo:
        read_values(io.StringIO("1\nnan\n3\n"))
    assert "line 2 is not finite" in str(excinfo.value)

    with pytest.raises(ValueError):
        read_values(io.StringIO("header\n1\n"))
    with pytest.raises(ValueError):
        read_values(io.StringIO(""))
    with pytest.raises(ValueError):
        read_values(io.StringIO("a\nb\n1\n2\n"))
    print("✓ read_values errors: PASS")


def test_read_data_file(tmp_path):
    path = tmp_path / "values.txt"
    path.write_text("0.25\n0.75\n")
    assert read_data(str(path)).tolist() == [0.25, 0.75]
    with pytest.raises(OSError):
        read_data(str(tmp_path / "missing.txt"))
    print("✓ read_data: PASS")


def test_format_number():
    assert format_number(3) == "3"
    assert format_number(np.int64(4)) == "4"
    assert format_number(0.1) == "0.10000000000000001"
    value = float(np.random.default_rng(80).normal())
    assert float(format_number(value)) == value
    print("✓ format_number: PASS")


def test_render_csv():
    text = render_csv(("x", "density"), [(1, 0.5), (2, 0.25)], comments=["seed 1"])
    assert text == "# seed 1\nx,density\n1,0.5\n2,0.25\n"
    print("✓ render_csv: PASS")


def test_write_atomic(tmp_path, capsys):
    target = tmp_path / "nested" / "out.csv"
    write_atomic(str(target), "a,b\n")
    assert target.read_text() == "a,b\n"

    write_atomic(None, "to stdout\n")
    assert capsys.readouterr().out == "to stdout\n"

    blocker = tmp_path / "dir"
    blocker.mkdir()
    with pytest.raises(OSError):
        write_atomic(str(blocker), "text")
    assert sorted(os.listdir(tmp_path)) == ["dir", "nested"]
    assert os.listdir(blocker) == []
    print("✓ write_atomic: PASS")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
