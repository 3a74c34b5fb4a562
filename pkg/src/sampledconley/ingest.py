"""Time series: Henon generators, file readers and delay embedding."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .mvmap import SampleSet


class Diverged(ArithmeticError):
    pass


class TooShort(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, line, msg):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class IoError(OSError):
    pass


ESCAPE = 1e6


@dataclass
class TimeSeries:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("time series contains non-finite values")

    def __len__(self):
        return len(self.values)

    def dump(self) -> str:
        return "".join(f"{v!r}\n" for v in self.values.tolist())


def _iterate(step, state, burn, count, meta):
    if count <= 0:
        raise ValueError("count must be positive")
    out = []
    for n in range(burn + count):
        if n >= burn:
            out.append(state[0])
        state = step(state)
        if not math.isfinite(state[0]) or abs(state[0]) > ESCAPE:
            raise Diverged(f"orbit escaped after {n + 1} steps")
    return TimeSeries(np.array(out), meta)


def henon_series(a=1.65, b=0.1, x0=0.0, y0=0.0, burn=100, count=29901) -> TimeSeries:
    """x-coordinates x_burn, ..., x_{burn+count-1} of the Henon map.

    The update is ``x' = (1.0 - (a * x) * x) + b * y`` evaluated left to right in
    IEEE double precision, with ``y' = x``; element 0 of the result is the
    state after ``burn`` steps.
    """
    def step(s):
        x, y = s
        return ((1.0 - (a * x) * x) + b * y, x)

    meta = dict(generator="henon", a=a, b=b, x0=x0, y0=y0, burn=burn, count=count)
    return _iterate(step, (float(x0), float(y0)), burn, count, meta)


def delayed_henon_series(a=1.65, b=0.1, x0=0.0, y0=0.0, z0=0.0, burn=100, count=29901) -> TimeSeries:
    """x-coordinates of ``(x, y, z) -> (1 - a x^2 + b z, x, y)``, same conventions."""
    def step(s):
        x, y, z = s
        return ((1.0 - (a * x) * x) + b * z, x, y)

    meta = dict(generator="delayed-henon", a=a, b=b, x0=x0, y0=y0, z0=z0, burn=burn, count=count)
    return _iterate(step, (float(x0), float(y0), float(z0)), burn, count, meta)


def delay_embed(s, d: int) -> SampleSet:
    """Samples ``(x_i..x_{i+d-1}) -> (x_{i+1}..x_{i+d})``; there are ``len(s) - d`` of them."""
    v = np.asarray(s.values if isinstance(s, TimeSeries) else s, dtype=float)
    if d < 1:
        raise ValueError("embedding dimension must be >= 1")
    n = len(v) - d
    if n < 1:
        raise TooShort(f"need at least {d + 1} values for embedding dimension {d}, got {len(v)}")
    idx = np.arange(n)[:, None] + np.arange(d)[None, :]
    return SampleSet(v[idx], v[idx + 1])


def read_series(path, fmt: str = "txt", column: int = 0, header: bool | None = None) -> TimeSeries:
    """Read one value per line (``fmt='txt'``) or one CSV column (``fmt='csv'``)."""
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as e:
        raise IoError(str(e)) from e
    vals = []
    if fmt == "txt":
        for n, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            vals.append(_parse(s, n))
    elif fmt == "csv":
        rows = list(csv.reader(text.splitlines()))
        start = 0
        if header is None:
            header = bool(rows) and not _is_number(rows[0][column] if column < len(rows[0]) else "")
        if header:
            start = 1
        for n, row in enumerate(rows[start:], start + 1):
            if not row:
                continue
            if column >= len(row):
                raise ParseError(n, f"no column {column}")
            vals.append(_parse(row[column].strip(), n))
    else:
        raise ValueError(f"unknown series format {fmt!r}")
    return TimeSeries(np.array(vals), dict(source=str(path), format=fmt, column=column))


def _is_number(s):
    try:
        return math.isfinite(float(s))
    except ValueError:
        return False


def _parse(s, n):
    try:
        x = float(s)
    except ValueError:
        raise ParseError(n, f"not a number: {s!r}") from None
    if not math.isfinite(x):
        raise ParseError(n, f"non-finite value: {s!r}")
    return x
