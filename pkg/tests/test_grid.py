"""Tests for the grid geometry helpers."""

import numpy as np
import pytest

from gridgaze.grid import GridSpec


def test_cells():
    assert GridSpec(4, 4).cells == 16
    assert GridSpec(2, 2).cells == 4
    assert GridSpec(1, 7).cells == 7
    assert GridSpec(16, 16).cells == 256


def test_bounds_divisible():
    spec = GridSpec(4, 4)
    assert spec.row_bounds(100).tolist() == [0, 25, 50, 75, 100]
    assert spec.col_bounds(16).tolist() == [0, 4, 8, 12, 16]


def test_bounds_remainder_absorbed_by_trailing_cells():
    # floor(i * 10 / 4): the last cells pick up the leftover pixels
    assert GridSpec(4, 4).row_bounds(10).tolist() == [0, 2, 5, 7, 10]
    assert GridSpec(3, 3).col_bounds(8).tolist() == [0, 2, 5, 8]


def test_bounds_partition_every_pixel():
    rng = np.random.default_rng(11)
    for _ in range(50):
        rows = int(rng.integers(1, 20))
        cols = int(rng.integers(1, 20))
        h = int(rng.integers(rows, 200))
        w = int(rng.integers(cols, 200))
        spec = GridSpec(rows, cols)
        rb = spec.row_bounds(h)
        cb = spec.col_bounds(w)
        assert rb.dtype == np.int64 and cb.dtype == np.int64
        assert rb[0] == 0 and rb[-1] == h
        assert cb[0] == 0 and cb[-1] == w
        assert np.all(np.diff(rb) >= 1)
        assert np.all(np.diff(cb) >= 1)
        assert np.diff(rb).sum() == h
        assert np.diff(cb).sum() == w


def test_bounds_match_floor_formula():
    spec = GridSpec(7, 13)
    h, w = 123, 321
    assert spec.row_bounds(h).tolist() == [(i * h) // 7 for i in range(8)]
    assert spec.col_bounds(w).tolist() == [(j * w) // 13 for j in range(14)]


def test_invalid_dims_raise():
    with pytest.raises(ValueError):
        GridSpec(0, 4)
    with pytest.raises(ValueError):
        GridSpec(4, -1)


def test_parse_and_str_round_trip():
    spec = GridSpec.parse("16x16")
    assert (spec.rows, spec.cols) == (16, 16)
    assert GridSpec.parse("4X8") == GridSpec(4, 8)
    assert str(GridSpec(3, 5)) == "3x5"
    assert GridSpec.parse(str(GridSpec(9, 2))) == GridSpec(9, 2)


@pytest.mark.parametrize("text", ["", "16", "4x", "x4", "axb", "4x4x4", "0x4"])
def test_parse_rejects_malformed(text):
    with pytest.raises(ValueError):
        GridSpec.parse(text)
