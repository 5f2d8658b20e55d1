"""Bounded N-dimensional belief space, discretized into labeled cells."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"
SYLLABLES = tuple(c + v for c in CONSONANTS for v in VOWELS)

# label tables above this size are computed on demand
MATERIALIZE_LIMIT = 100_000


def _axis_tokens(label_seed: int, axis: int, count: int) -> tuple[str, ...]:
    """Draw `count` distinct pseudo-words for one axis."""
    base = len(SYLLABLES)
    n_syl = 2
    while base**n_syl < 4 * count:
        n_syl += 1
    rng = np.random.default_rng(np.random.SeedSequence(label_seed, spawn_key=(axis,)))
    codes = rng.choice(base**n_syl, size=count, replace=False)
    tokens = []
    for code in codes.tolist():
        parts = []
        for _ in range(n_syl):
            code, r = divmod(code, base)
            parts.append(SYLLABLES[r])
        tokens.append("".join(parts))
    return tuple(tokens)


@dataclass(frozen=True)
class BeliefSpace:
    """Hypercube [-half_extent, half_extent]^dims cut into cells_per_axis^dims cells.

    Each cell is labeled by one seeded token per axis joined with ``_``, so
    labels are unique and a pure function of (cell, label_seed).
    """

    dims: int
    half_extent: float
    cells_per_axis: int
    label_seed: int = 0
    tokens: tuple[tuple[str, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.dims) != self.dims or self.dims < 1:
            raise ValueError(f"dims must be a positive integer, got {self.dims!r}")
        if not (self.half_extent > 0) or not np.isfinite(self.half_extent):
            raise ValueError(f"half_extent must be positive and finite, got {self.half_extent!r}")
        if int(self.cells_per_axis) != self.cells_per_axis or self.cells_per_axis < 1:
            raise ValueError(f"cells_per_axis must be a positive integer, got {self.cells_per_axis!r}")
        object.__setattr__(self, "half_extent", float(self.half_extent))
        tokens = tuple(
            _axis_tokens(self.label_seed, axis, self.cells_per_axis) for axis in range(self.dims)
        )
        object.__setattr__(self, "tokens", tokens)

    @property
    def cell_width(self) -> float:
        return 2.0 * self.half_extent / self.cells_per_axis

    @property
    def n_cells(self) -> int:
        return self.cells_per_axis**self.dims

    @property
    def materialized(self) -> bool:
        return self.n_cells <= MATERIALIZE_LIMIT

    def cell_of(self, position) -> tuple[int, ...]:
        return tuple(int(c) for c in self.cells_of(np.asarray(position, dtype=float)[None, :])[0])

    def cells_of(self, positions: np.ndarray) -> np.ndarray:
        """Vectorized cell lookup for an (n, dims) array of positions."""
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != self.dims:
            raise ValueError(f"expected positions of shape (n, {self.dims}), got {positions.shape}")
        h = self.half_extent
        if np.any(positions < -h) or np.any(positions > h) or not np.all(np.isfinite(positions)):
            raise ValueError("position outside the closed hypercube")
        idx = np.floor((positions + h) / self.cell_width).astype(np.int64)
        # closed top face belongs to the last cell
        return np.minimum(idx, self.cells_per_axis - 1)

    def cell_center(self, cell) -> np.ndarray:
        cell = np.asarray(cell, dtype=float)
        return -self.half_extent + (cell + 0.5) * self.cell_width

    def label_of(self, cell) -> str:
        cell = tuple(int(c) for c in cell)
        if len(cell) != self.dims or any(c < 0 or c >= self.cells_per_axis for c in cell):
            raise ValueError(f"invalid cell index {cell} for {self.dims}-D space")
        return self._label(cell)

    def _label(self, cell: tuple[int, ...]) -> str:
        return "_".join(self.tokens[axis][c] for axis, c in enumerate(cell))

    def labels_of(self, positions: np.ndarray) -> list[str]:
        cells = self.cells_of(positions)
        lookup = _cached_labeler(self)
        return [lookup(tuple(row)) for row in cells.tolist()]

    def label_table(self) -> dict[tuple[int, ...], str]:
        """Full cell -> label mapping; refuses spaces above MATERIALIZE_LIMIT cells."""
        if not self.materialized:
            raise ValueError(f"{self.n_cells} cells is too many to materialize")
        return {cell: self._label(cell) for cell in np.ndindex(*(self.cells_per_axis,) * self.dims)}

    def position_of_label(self, label: str) -> np.ndarray:
        """Center of the cell carrying `label`."""
        parts = label.split("_")
        if len(parts) != self.dims:
            raise ValueError(f"label {label!r} does not belong to this space")
        cell = []
        for axis, tok in enumerate(parts):
            try:
                cell.append(self.tokens[axis].index(tok))
            except ValueError:
                raise ValueError(f"label {label!r} does not belong to this space") from None
        return self.cell_center(cell)


@lru_cache(maxsize=16)
def _cached_labeler(space: BeliefSpace):
    return lru_cache(maxsize=MATERIALIZE_LIMIT)(space._label)


def build_space(dims: int, half_extent: float, cells_per_axis: int, label_seed: int = 0) -> BeliefSpace:
    return BeliefSpace(dims, half_extent, cells_per_axis, label_seed)
