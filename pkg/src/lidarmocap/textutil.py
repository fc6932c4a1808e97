"""Helpers shared by the text file formats.

Floats are written with repr(), the shortest representation that round
trips exactly, so rewriting a file never drifts values and identical runs
produce byte-identical output.
"""
import numpy as np

from .errors import FormatError


def fmt_float(x):
    return repr(float(x))


def fmt_floats(values):
    return " ".join(repr(float(v)) for v in np.asarray(values).reshape(-1))


def read_records(path):
    """All non-blank, non-comment lines of a text file as (lineno, tokens).

    Comments start with '#' and run to end of line. Line numbers are
    1-based. Raises FormatError when the file cannot be read.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise FormatError(path, f"cannot read file: {exc.strerror}") from exc
    records = []
    for i, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            records.append((i, text.split()))
    return records


def parse_floats(path, lineno, tokens, count=None):
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise FormatError(path, f"expected numeric fields, got {tokens!r}",
                          line=lineno) from None
    if count is not None and len(values) != count:
        raise FormatError(
            path, f"expected {count} numeric fields, got {len(values)}",
            line=lineno)
    return values


def parse_int(path, lineno, token, what="integer"):
    try:
        return int(token)
    except ValueError:
        raise FormatError(path, f"expected {what}, got {token!r}",
                          line=lineno) from None
