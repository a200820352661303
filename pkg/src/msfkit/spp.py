"""Spatial pyramid max pooling onto a fixed-length descriptor.

A pyramid of n x n partitions is pooled over a feature map of any side a,
producing a vector of length C * sum(n_i^2) that does not depend on a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .featmap import FeatureMap, _frozen


@dataclass(frozen=True)
class PyramidSpec:
    """Strictly increasing pooling levels, e.g. (1, 2, 4)."""

    levels: tuple[int, ...]

    def __post_init__(self):
        levels = tuple(int(n) for n in self.levels)
        if not levels:
            raise ValueError("pyramid must have at least one level")
        if levels[0] < 1:
            raise ValueError(f"pyramid levels must be positive, got {levels}")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"pyramid levels must be strictly increasing, got {levels}")
        object.__setattr__(self, "levels", levels)

    @property
    def max_level(self) -> int:
        return self.levels[-1]


@dataclass(frozen=True)
class Descriptor:
    """Fixed-length pooled vector tagged with the side of its source image."""

    scale: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("descriptor values must be a non-empty vector")
        if not np.isfinite(vals).all():
            raise ValueError("descriptor values must be finite")
        object.__setattr__(self, "values", _frozen(vals))


def window_geometry(a: int, n: int) -> tuple[int, int]:
    """Pooling window size and stride for an a x a map split n x n ways.

    win = ceil(a/n) and str = floor(a/n); window i starts at offset i*str.
    Raises ValueError when the level is finer than the map (a < n).
    """
    if n < 1:
        raise ValueError(f"pyramid level must be >= 1, got {n}")
    if a < n:
        raise ValueError(f"pyramid level {n} is finer than the map side {a}")
    return -(-a // n), a // n


def pool_windows(a: int, n: int) -> list[tuple[int, int]]:
    """Half-open [start, stop) spans of the n pooling windows along one axis.

    Spans are clamped to the map: no window reaches past cell a, and the
    final window always runs to the map edge, so the n windows jointly cover
    every cell even when a mod n >= 2 leaves the plain win/stride grid short.
    """
    win, stride = window_geometry(a, n)
    spans = []
    for i in range(n):
        start = i * stride
        stop = a if i == n - 1 else min(start + win, a)
        spans.append((start, stop))
    return spans


def descriptor_length(channels: int, spec: PyramidSpec) -> int:
    """Length of a pooled descriptor: C * sum(n^2) over the pyramid levels."""
    if channels < 1:
        raise ValueError(f"channel count must be positive, got {channels}")
    return channels * sum(n * n for n in spec.levels)


def spp_pool(fmap: FeatureMap, spec: PyramidSpec, scale: int = 0) -> Descriptor:
    """Max-pool a feature map over every pyramid level into one vector.

    Concatenation order is levels coarse to fine; within a level channels are
    contiguous, and within a channel the n x n window maxima appear row-major.
    This order is fixed so serialized descriptors stay stable.
    """
    a = fmap.side
    if a < spec.max_level:
        raise ValueError(
            f"map side {a} is smaller than the finest pyramid level {spec.max_level}"
        )
    chunks = []
    for n in spec.levels:
        spans = pool_windows(a, n)
        block = np.empty((fmap.channels, n, n), dtype=np.float64)
        for r, (r0, r1) in enumerate(spans):
            for c, (c0, c1) in enumerate(spans):
                block[:, r, c] = fmap.data[:, r0:r1, c0:c1].max(axis=(1, 2))
        chunks.append(block.reshape(-1))
    return Descriptor(scale=scale, values=np.concatenate(chunks))
