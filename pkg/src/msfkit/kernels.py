"""Kernel functions, Gram matrices, normalization, and convex combination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError
from .featmap import _frozen


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice: linear dot product (default) or gaussian with width gamma."""

    kind: str = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.gamma is None or not (self.gamma > 0):
                raise ValueError("gaussian kernel needs gamma > 0")


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric matrix of kernel evaluations with a provenance tag."""

    entries: np.ndarray
    tag: str | int = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.entries, dtype=np.float64))
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError(f"gram entries must be square and non-empty, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("gram entries must be finite")
        scale = 1.0 + float(np.abs(arr).max())
        if float(np.abs(arr - arr.T).max()) > 1e-12 * scale:
            raise ValueError("gram entries are not symmetric")
        if float(np.diag(arr).min()) < 0.0:
            raise ValueError("gram diagonal must be non-negative")
        object.__setattr__(self, "entries", _frozen(arr))

    @property
    def order(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SimplexWeights:
    """Convex-combination weights: non-negative, summing to one."""

    d: np.ndarray

    def __post_init__(self):
        vec = np.ascontiguousarray(np.asarray(self.d, dtype=np.float64))
        if vec.ndim != 1 or vec.size < 1:
            raise ValueError("weights must be a non-empty vector")
        if not np.isfinite(vec).all() or vec.min() < 0.0:
            raise ValueError("weights must be finite and non-negative")
        if abs(vec.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {vec.sum()!r}")
        object.__setattr__(self, "d", _frozen(vec))

    def __len__(self):
        return self.d.size


def _as_matrix(descriptors) -> np.ndarray:
    try:
        X = np.asarray(descriptors, dtype=np.float64)
    except ValueError as exc:
        raise ValueError("descriptors must all have the same length") from exc
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"descriptors must form an (N, d) matrix, got shape {X.shape}")
    return X


def _mirror_upper(G: np.ndarray) -> np.ndarray:
    # entries for i <= j are kept; the lower triangle is their exact mirror
    return np.triu(G) + np.triu(G, 1).T


def _sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    sq = (X * X).sum(axis=1)[:, None] + (Y * Y).sum(axis=1)[None, :] - 2.0 * (X @ Y.T)
    np.maximum(sq, 0.0, out=sq)
    return sq


def gram(descriptors, spec: KernelSpec = KernelSpec(), tag: str | int = "") -> GramMatrix:
    """Kernel evaluations K(x_i, x_j) for every pair of descriptors."""
    X = _as_matrix(descriptors)
    if spec.kind == "linear":
        G = _mirror_upper(X @ X.T)
    else:
        G = _mirror_upper(np.exp(-spec.gamma * _sq_dists(X, X)))
        np.fill_diagonal(G, 1.0)
    return GramMatrix(G, tag=tag)


def kernel_rows(
    queries,
    train,
    spec: KernelSpec = KernelSpec(),
    normalize: bool = False,
) -> np.ndarray:
    """Kernel evaluations K(q, x_i) between query and training descriptors.

    With ``normalize`` the rows match a cosine-normalized training Gram:
    each entry is divided by sqrt(K(q,q) * K(x_i,x_i)). A query with zero
    self-similarity yields an all-zero row.
    """
    Q = _as_matrix(queries)
    T = _as_matrix(train)
    if Q.shape[1] != T.shape[1]:
        raise ValueError(
            f"query length {Q.shape[1]} does not match training length {T.shape[1]}"
        )
    if spec.kind == "linear":
        R = Q @ T.T
        if normalize:
            qd = (Q * Q).sum(axis=1)
            td = (T * T).sum(axis=1)
            if td.min() <= 0.0:
                raise DegenerateSampleError(int(np.argmin(td > 0.0)))
            qs = np.sqrt(qd)
            qs[qd <= 0.0] = np.inf  # zero query -> zero row
            R = R / (qs[:, None] * np.sqrt(td)[None, :])
        return R
    R = np.exp(-spec.gamma * _sq_dists(Q, T))
    # gaussian self-similarity is 1, so normalization changes nothing
    return R


def normalize_gram(g: GramMatrix) -> GramMatrix:
    """Cosine-normalize a Gram matrix so its diagonal is exactly one.

    Raises DegenerateSampleError naming the first sample whose diagonal
    entry is not positive.
    """
    diag = np.diag(g.entries)
    bad = np.flatnonzero(diag <= 0.0)
    if bad.size:
        raise DegenerateSampleError(int(bad[0]))
    scale = np.sqrt(diag)
    out = g.entries / (scale[:, None] * scale[None, :])
    np.fill_diagonal(out, 1.0)
    return GramMatrix(out, tag=g.tag)


def combine(grams: list[GramMatrix], weights) -> GramMatrix:
    """Entry-wise convex combination sum_m d_m K_m of same-order Gram matrices.

    ``weights`` is a SimplexWeights or any non-negative vector of matching
    length (tests probe the objective slightly off the simplex).
    """
    if not grams:
        raise ValueError("need at least one gram matrix")
    d = weights.d if isinstance(weights, SimplexWeights) else np.asarray(weights, dtype=np.float64)
    if d.ndim != 1 or d.size != len(grams):
        raise ValueError(f"got {d.size} weights for {len(grams)} gram matrices")
    if not np.isfinite(d).all() or d.min() < 0.0:
        raise ValueError("weights must be finite and non-negative")
    order = grams[0].order
    if any(g.order != order for g in grams):
        raise ValueError("gram matrices must all have the same order")
    out = np.zeros((order, order), dtype=np.float64)
    for w, g in zip(d, grams):
        out += w * g.entries
    return GramMatrix(out, tag="combined")
