"""End-to-end experiments: repeated splits, one-vs-all training, metrics.

Three fusion methods share one interface. ``single-<scale>`` trains on one
scale's kernel, ``sv`` concatenates all scales' descriptors before a single
kernel, and ``mkl`` learns per-class convex weights over the per-scale
kernels. All are trained one-vs-all and predict by argmax decision value
with ties broken toward the lowest class index.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .featmap import _frozen
from .kernels import KernelSpec, gram, kernel_rows, normalize_gram
from .mkl import MklProblem, mkl_train
from .svm import SvmModel, TrainSet, svm_solve


@dataclass(frozen=True)
class Dataset:
    """Aligned per-scale descriptor blocks with integer class labels."""

    classes: tuple[str, ...]
    labels: np.ndarray
    scales: tuple[int, ...]
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.intp))
        classes = tuple(self.classes)
        scales = tuple(int(s) for s in self.scales)
        blocks = tuple(np.ascontiguousarray(np.asarray(b)) for b in self.blocks)
        if len(classes) < 1:
            raise ValueError("dataset needs at least one class")
        if labels.ndim != 1 or labels.size < 1:
            raise ValueError("labels must be a non-empty vector")
        if labels.min() < 0 or labels.max() >= len(classes):
            raise ValueError("labels must index into classes")
        counts = np.bincount(labels, minlength=len(classes))
        if counts.min() < 2:
            raise ValueError("every class needs at least 2 samples")
        if len(scales) != len(blocks) or not blocks:
            raise ValueError("need one descriptor block per scale")
        for s, b in zip(scales, blocks):
            if b.ndim != 2 or b.shape[0] != labels.size:
                raise ValueError(
                    f"block for scale {s} must be (N, L) with N={labels.size}, got {b.shape}"
                )
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "blocks", tuple(_frozen(b) for b in blocks))

    @property
    def size(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class SplitPlan:
    """Per-class training count, repetition count, and base seed.

    Repetition r shuffles with seed + r, so the whole plan is reproducible.
    """

    train_per_class: int
    repetitions: int
    seed: int

    def __post_init__(self):
        if self.train_per_class < 1:
            raise ValueError("train_per_class must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Actual-by-predicted counts; row i sums to the test count of class i."""

    counts: np.ndarray
    classes: tuple[str, ...]

    def __post_init__(self):
        counts = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        k = len(self.classes)
        if counts.shape != (k, k):
            raise ValueError(f"counts must be ({k}, {k}), got {counts.shape}")
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def overall_accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def rates(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.maximum(sums, 1)


@dataclass(frozen=True)
class FitConfig:
    """Kernel and solver settings shared by every method."""

    kernel: KernelSpec = KernelSpec()
    normalize: bool = True
    C: float = 1.0
    svm_tol: float = 1e-4
    mkl_step: float = 1.0
    mkl_outer_tol: float = 1e-4
    mkl_max_outer: int = 200
    jobs: int | None = None


@dataclass
class OvrModel:
    """One-vs-all heads plus everything needed to score new descriptors."""

    method: str
    classes: tuple[str, ...]
    kernel: KernelSpec
    normalize: bool
    source_scales: tuple[int, ...]
    train_blocks: tuple[np.ndarray, ...]
    heads: tuple[SvmModel, ...]
    head_labels: tuple[np.ndarray, ...]
    weights: np.ndarray | None = None  # (K, M) simplex rows for mkl


@dataclass
class ExperimentReport:
    """Aggregates over the repetitions of one (method, train count) cell."""

    method: str
    train_per_class: int
    oa_per_rep: np.ndarray
    oa_mean: float
    oa_std: float  # population convention (divide by R)
    per_class_accuracy: np.ndarray
    confusion: ConfusionMatrix  # repetition 0
    mkl_weights: np.ndarray | None = None  # repetition 0, (K, M)


def make_splits(ds: Dataset, plan: SplitPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded per-class shuffles into disjoint (train, test) index arrays."""
    counts = np.bincount(ds.labels, minlength=len(ds.classes))
    if plan.train_per_class >= counts.min():
        raise ValueError(
            f"train_per_class {plan.train_per_class} must be below the smallest "
            f"class size {counts.min()}"
        )
    splits = []
    for r in range(plan.repetitions):
        rng = np.random.default_rng(plan.seed + r)
        train, test = [], []
        for k in range(len(ds.classes)):
            perm = rng.permutation(np.flatnonzero(ds.labels == k))
            train.append(perm[: plan.train_per_class])
            test.append(perm[plan.train_per_class :])
        splits.append((np.concatenate(train), np.concatenate(test)))
    return splits


def _effective_blocks(blocks, scales, method):
    """Map per-scale blocks to the blocks a method actually trains on."""
    if method == "sv":
        return ("sv",), (np.hstack(blocks),)
    if method == "mkl":
        return tuple(scales), tuple(blocks)
    if method.startswith("single-"):
        try:
            wanted = int(method.split("-", 1)[1])
        except ValueError:
            raise ValueError(f"bad method {method!r}") from None
        if wanted not in scales:
            raise ValueError(f"method {method!r} names a scale not in {scales}")
        i = list(scales).index(wanted)
        return (wanted,), (blocks[i],)
    raise ValueError(f"unknown method {method!r}; use single-<scale>, sv, or mkl")


def train_ovr(
    blocks,
    labels: np.ndarray,
    method: str,
    cfg: FitConfig = FitConfig(),
    *,
    scales,
    classes,
) -> OvrModel:
    """Train K one-vs-all heads with the requested fusion method."""
    labels = np.asarray(labels, dtype=np.intp)
    classes = tuple(classes)
    k = len(classes)
    if k < 2:
        raise ValueError("need at least 2 classes")
    counts = np.bincount(labels, minlength=k)
    if counts.min() < 1:
        missing = classes[int(np.argmin(counts))]
        raise ValueError(f"class {missing!r} has no training samples")

    eff_scales, eff_blocks = _effective_blocks(tuple(blocks), tuple(scales), method)
    grams = [gram(b, cfg.kernel, tag=s) for b, s in zip(eff_blocks, eff_scales)]
    if cfg.normalize:
        grams = [normalize_gram(g) for g in grams]

    signed = [np.where(labels == c, 1.0, -1.0) for c in range(k)]

    def fit_class(c):
        y = signed[c]
        if method == "mkl":
            model = mkl_train(
                MklProblem(tuple(grams), y, cfg.C),
                step=cfg.mkl_step,
                outer_tol=cfg.mkl_outer_tol,
                max_outer=cfg.mkl_max_outer,
            )
            return model.svm, model.weights.d
        return svm_solve(TrainSet(grams[0], y, cfg.C), cfg.svm_tol), None

    jobs = cfg.jobs or os.cpu_count() or 1
    if jobs > 1 and k > 1:
        with ThreadPoolExecutor(max_workers=min(jobs, k)) as pool:
            results = list(pool.map(fit_class, range(k)))
    else:
        results = [fit_class(c) for c in range(k)]

    heads = tuple(r[0] for r in results)
    weights = np.vstack([r[1] for r in results]) if method == "mkl" else None
    return OvrModel(
        method=method,
        classes=classes,
        kernel=cfg.kernel,
        normalize=cfg.normalize,
        source_scales=tuple(scales),
        train_blocks=eff_blocks,
        heads=heads,
        head_labels=tuple(signed),
        weights=weights,
    )


def predict(model: OvrModel, blocks, *, scales) -> np.ndarray:
    """Argmax of the K decision values for every test descriptor."""
    scales = tuple(scales)
    if scales != model.source_scales:
        raise ValueError(f"model was trained on scales {model.source_scales}, got {scales}")
    _, eff_blocks = _effective_blocks(tuple(blocks), scales, model.method)
    rows = []
    for test_b, train_b in zip(eff_blocks, model.train_blocks):
        if test_b.shape[1] != train_b.shape[1]:
            raise ValueError(
                f"descriptor length {test_b.shape[1]} does not match training "
                f"length {train_b.shape[1]}"
            )
        rows.append(kernel_rows(test_b, train_b, model.kernel, normalize=model.normalize))
    k = len(model.classes)
    scores = np.empty((eff_blocks[0].shape[0], k))
    for c, (head, y) in enumerate(zip(model.heads, model.head_labels)):
        if model.method == "mkl":
            row = sum(w * r for w, r in zip(model.weights[c], rows))
        else:
            row = rows[0]
        scores[:, c] = row @ (head.alpha * y) + head.b
    return np.argmax(scores, axis=1)  # ties resolve to the lowest class index


def evaluate(
    ds: Dataset,
    plan: SplitPlan,
    method: str,
    cfg: FitConfig = FitConfig(),
    diagnose: bool = False,
) -> ExperimentReport:
    """Run every repetition of one (method, train count) experiment cell.

    ``diagnose`` scores the training set itself instead of the held-out
    samples, which should be perfect on separable data.
    """
    splits = make_splits(ds, plan)
    k = len(ds.classes)
    oas = np.empty(plan.repetitions)
    class_acc = np.empty((plan.repetitions, k))
    confusion0 = None
    weights0 = None
    for r, (train_idx, test_idx) in enumerate(splits):
        if diagnose:
            test_idx = train_idx
        train_blocks = [b[train_idx] for b in ds.blocks]
        test_blocks = [b[test_idx] for b in ds.blocks]
        model = train_ovr(
            train_blocks, ds.labels[train_idx], method, cfg,
            scales=ds.scales, classes=ds.classes,
        )
        pred = predict(model, test_blocks, scales=ds.scales)
        actual = ds.labels[test_idx]
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (actual, pred), 1)
        cm = ConfusionMatrix(counts, ds.classes)
        oas[r] = cm.overall_accuracy
        class_acc[r] = np.diag(counts) / counts.sum(axis=1)
        if r == 0:
            confusion0 = cm
            weights0 = model.weights
    return ExperimentReport(
        method=method,
        train_per_class=plan.train_per_class,
        oa_per_rep=oas,
        oa_mean=float(oas.mean()),
        oa_std=float(oas.std()),
        per_class_accuracy=class_acc.mean(axis=0),
        confusion=confusion0,
        mkl_weights=weights0,
    )
