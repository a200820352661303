import numpy as np
import pytest

import msfkit as mk
from msfkit import dataio


def random_trainset(rng, n=None, C=None, kind=None):
    """Random small SVM problem with both classes present."""
    if n is None:
        n = int(rng.integers(2, 9))
    X = rng.standard_normal((n, 3))
    y = np.ones(n)
    y[rng.permutation(n)[: int(rng.integers(1, n))]] = -1.0
    if (y > 0).all() or (y < 0).all():
        y[0] = -y[0]
    if C is None:
        C = float(rng.choice([0.1, 1.0, 10.0]))
    if kind is None:
        kind = "linear" if rng.random() < 0.5 else "gaussian"
    spec = (
        mk.KernelSpec()
        if kind == "linear"
        else mk.KernelSpec("gaussian", float(rng.uniform(0.1, 2.0)))
    )
    return mk.TrainSet(mk.gram(X, spec), y, C)


def binary_mkl_problem(rng, n=20, informative=1.5, C=1.0):
    """Two-kernel problem: one class-informative kernel, one pure noise."""
    half = n // 2
    y = np.r_[np.ones(half), -np.ones(n - half)]
    Xi = y[:, None] * informative + rng.standard_normal((n, 6))
    Xn = rng.standard_normal((n, 6))
    gi = mk.normalize_gram(mk.gram(Xi))
    gn = mk.normalize_gram(mk.gram(Xn))
    return mk.MklProblem((gi, gn), y, C)


def write_toy_corpus(root, classes=("vert", "horiz", "flat"), per_class=6, side=40, seed=9):
    """Small PGM corpus with one oriented pattern per class; returns manifest path."""
    rng = np.random.default_rng(seed)
    lines = ["# toy corpus"]
    for k, name in enumerate(classes):
        for i in range(per_class):
            base = np.zeros((side, side))
            if k % 3 == 0:
                base += np.linspace(0.0, 0.8, side)[None, :]
            elif k % 3 == 1:
                base += np.linspace(0.0, 0.8, side)[:, None]
            else:
                base += 0.4
            img = mk.Image(np.clip(base + rng.random((side, side)) * 0.2, 0.0, 1.0)[None])
            fname = f"{name}_{i}.pgm"
            dataio.write_image(root / fname, img)
            lines.append(f"{fname}\t{name}\t{name}{i}")
    manifest = root / "manifest.tsv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


TOY_CONFIG = """\
[scales]
sides = 32 48

[pyramid]
levels = 1 2 4

[extractor]
seed = 5
layers = 6:3:2:2

[experiment]
train_counts = 3
repetitions = 2
seed = 1

[paths]
cache_dir = cache
"""


@pytest.fixture
def toy_corpus(tmp_path):
    manifest = write_toy_corpus(tmp_path)
    config = tmp_path / "run.ini"
    config.write_text(TOY_CONFIG, encoding="utf-8")
    return manifest, config
