"""Uniform hash grid over 2D points for fixed-radius neighbor queries.

The cell size equals the query radius, so the 3x3 block of cells around a
query's cell always covers the full search disk (any point within radius W
of a query differs by at most one cell index per axis).  With bounded point
density each query touches at most nine cells, giving O(1) amortized cost
per query and O(n) construction.
"""

from __future__ import annotations

import numpy as np

from .errors import NonPositiveRadius
from .geometry import Point, as_point_array

__all__ = ["GridIndex"]

_NEIGHBOR_OFFSETS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]


class GridIndex:
    """Grid over a fixed point set; immutable once built.

    Matching uses the strict inequality ``||p - q|| < radius``; duplicate
    points are kept and all returned.  Queries are safe to run concurrently
    after construction.
    """

    def __init__(self, points, radius: float):
        if not radius > 0.0:
            raise NonPositiveRadius(f"radius must be > 0, got {radius}")
        self._points = as_point_array(points)
        self._radius = float(radius)
        self._radius_sq = self._radius * self._radius
        self._cell_size = self._radius

        buckets: dict[tuple[int, int], list[int]] = {}
        if len(self._points):
            keys = np.floor(self._points / self._cell_size).astype(np.int64)
            for i, key in enumerate(map(tuple, keys)):
                buckets.setdefault(key, []).append(i)
        self._cells = {k: np.asarray(v, dtype=np.int64) for k, v in buckets.items()}

    def __len__(self) -> int:
        return len(self._points)

    @property
    def radius(self) -> float:
        return self._radius

    @property
    def cell_size(self) -> float:
        return self._cell_size

    @property
    def occupied_cells(self) -> int:
        return len(self._cells)

    def query_radius(self, q) -> np.ndarray:
        """Indices ``i`` with ``||points[i] - q|| < radius``.

        The order is unspecified but deterministic for a fixed build.
        """
        qa = np.asarray(tuple(q) if isinstance(q, Point) else q, dtype=float)
        if qa.shape != (2,):
            raise ValueError(f"expected a single 2D query point, got shape {qa.shape}")
        cx = int(np.floor(qa[0] / self._cell_size))
        cy = int(np.floor(qa[1] / self._cell_size))
        hits = []
        for dx, dy in _NEIGHBOR_OFFSETS:
            bucket = self._cells.get((cx + dx, cy + dy))
            if bucket is not None:
                hits.append(bucket)
        if not hits:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(hits)
        d = self._points[cand] - qa
        mask = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] < self._radius_sq
        return cand[mask]
