"""Grid geometry shared by the codec, the gaze head and the CLI.

A grid splits an H x W pixel frame into rows x cols cells. Cell
boundaries sit at floor(i * H / rows) (and likewise for columns), so
every pixel belongs to exactly one cell and trailing cells absorb the
remainder when the frame does not divide evenly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry: number of cell rows and columns."""

    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def cells(self) -> int:
        return self.rows * self.cols

    def row_bounds(self, height: int) -> np.ndarray:
        """Pixel row boundaries, length rows + 1 (exact integer arithmetic)."""
        return (np.arange(self.rows + 1, dtype=np.int64) * height) // self.rows

    def col_bounds(self, width: int) -> np.ndarray:
        return (np.arange(self.cols + 1, dtype=np.int64) * width) // self.cols

    def __str__(self) -> str:
        return f"{self.rows}x{self.cols}"

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse 'ROWSxCOLS', e.g. '16x16'."""
        parts = text.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"expected ROWSxCOLS, got {text!r}")
        return cls(int(parts[0]), int(parts[1]))
