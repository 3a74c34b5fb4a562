import numpy as np
import pytest
from hypothesis import given, strategies as st

from sampledconley.ingest import (Diverged, IoError, ParseError, TimeSeries, TooShort,
                                  delay_embed, delayed_henon_series, henon_series, read_series)


def test_henon_series_default_run():
    s = henon_series()
    assert len(s) == 29901
    assert s.values.min() > -1.3 and s.values.max() < 1.3
    assert s.meta["generator"] == "henon" and s.meta["burn"] == 100


def test_henon_series_matches_explicit_recurrence():
    s = henon_series(burn=100, count=50)
    x, y = 0.0, 0.0
    out = []
    for n in range(150):
        if n >= 100:
            out.append(x)
        x, y = (1.0 - (1.65 * x) * x) + 0.1 * y, x
    assert s.values.tolist() == out


def test_henon_series_is_reproducible():
    assert henon_series(count=500).values.tobytes() == henon_series(count=500).values.tobytes()


def test_degenerate_parameters_give_constant_series():
    s = henon_series(a=0.0, b=0.0, burn=1, count=5)
    assert s.values.tolist() == [1.0] * 5


def test_divergence_detected():
    with pytest.raises(Diverged):
        henon_series(a=10.0, b=0.0, x0=1.0, burn=0, count=100)


def test_count_must_be_positive():
    with pytest.raises(ValueError):
        henon_series(count=0)


def test_delayed_henon_series():
    s = delayed_henon_series(count=1000)
    x, y, z = 0.0, 0.0, 0.0
    for _ in range(100):
        x, y, z = (1.0 - (1.65 * x) * x) + 0.1 * z, x, y
    assert s.values[0] == x
    assert np.all(np.abs(s.values) < 2)


def test_delay_embed_small():
    S = delay_embed(TimeSeries([1, 2, 3, 4]), 2)
    assert S.x.tolist() == [[1, 2], [2, 3]]
    assert S.y.tolist() == [[2, 3], [3, 4]]


def test_delay_embed_too_short():
    with pytest.raises(TooShort):
        delay_embed(TimeSeries([1, 2]), 2)


def test_delay_embed_reference_3d_count():
    assert len(delay_embed(TimeSeries(np.zeros(29899)), 3)) == 29896


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60), st.integers(1, 4))
def test_delay_embed_length_identity(vals, d):
    if len(vals) <= d:
        with pytest.raises(TooShort):
            delay_embed(TimeSeries(vals), d)
        return
    S = delay_embed(TimeSeries(vals), d)
    assert len(S) == len(vals) - d
    assert np.array_equal(S.x[1:], S.y[:-1])
    assert np.array_equal(S.x[:, 0], np.array(vals[:len(vals) - d]))


@given(st.floats(-5, 5, allow_nan=False), st.integers(5, 30), st.integers(1, 3))
def test_constant_series_embeds_to_one_point(c, n, d):
    S = delay_embed(TimeSeries([c] * n), d)
    assert len({tuple(r) for r in S.x.tolist()}) == 1
    assert np.array_equal(S.x, S.y)


def test_read_txt(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("1.0\n2.0\n")
    assert read_series(p).values.tolist() == [1.0, 2.0]


def test_read_csv_column(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("a,b\n1,2\n")
    assert read_series(p, "csv", column=1).values.tolist() == [2.0]


def test_read_malformed_line_reports_line(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("1.0\n2.0\nthree\n")
    with pytest.raises(ParseError) as e:
        read_series(p)
    assert e.value.line == 3


def test_read_missing_file(tmp_path):
    with pytest.raises(IoError):
        read_series(tmp_path / "missing.txt")


def test_series_dump_roundtrip(tmp_path):
    s = henon_series(count=200)
    p = tmp_path / "dump.txt"
    p.write_text(s.dump())
    assert read_series(p).values.tobytes() == s.values.tobytes()
