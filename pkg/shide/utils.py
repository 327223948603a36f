"""
Utility functions for the shide command line.

Provides helpers for reading numeric input, number formatting and atomic CSV output.
"""

import os
import io
import csv
import sys
import logging
import tempfile
from typing import Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def format_number(value) -> str:
    """Serialize a number with 17 significant digits (round-trips a float64)."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.17g}"


def read_values(stream: io.TextIOBase, source: str = "input") -> np.ndarray:
    """Parse one number per line.

    A non-numeric first token on the first non-blank line is taken as a header
    and skipped; blank lines are ignored.

    Args:
        stream: Text stream to read
        source: Name used in error messages

    Returns:
        Finite values in file order

    Raises:
        ValueError: On a non-numeric or non-finite line (with its line number),
            or fewer than 2 values
    """
    values = []
    header_checked = False

    for line_number, line in enumerate(stream, start=1):
        token = line.strip()
        if not token:
            continue
        first = token.split()[0]
        try:
            value = float(first)
        except ValueError:
            if not header_checked:
                header_checked = True
                logger.debug(f"Skipping header line {line_number} of {source}: {token!r}")
                continue
            raise ValueError(f"{source}: line {line_number} is not numeric: {token!r}")
        header_checked = True
        if not np.isfinite(value):
            raise ValueError(f"{source}: line {line_number} is not finite: {token!r}")
        values.append(value)

    if len(values) < 2:
        raise ValueError(f"{source}: need at least 2 values, got {len(values)}")
    return np.array(values)


def read_data(path: Optional[str]) -> np.ndarray:
    """Read values from a file, or from standard input when path is None or '-'."""
    if path in (None, "-"):
        return read_values(sys.stdin, "stdin")
    with open(path, 'r', encoding='utf-8') as f:
        return read_values(f, path)


def render_csv(header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    """CSV text with '\\n' line endings; comment lines are prefixed with '#'."""
    buffer = io.StringIO()
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell if isinstance(cell, str) else format_number(cell) for cell in row])
    return buffer.getvalue()


def write_atomic(path: Optional[str], text: str) -> None:
    """Write text to path through a temporary file and an atomic rename.

    None or '-' writes to standard output. A failed write leaves no file behind.
    """
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(prefix=".shide-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise

    logger.info(f"✓ Wrote {path} ({len(text)} bytes)")
