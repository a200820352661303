import numpy as np
import pytest

import msfkit as mk
from msfkit.errors import DegenerateSampleError


def test_linear_kernel_examples():
    g = mk.gram([[1.0, 2.0], [3.0, 4.0]])
    assert g.entries[0, 1] == 11.0
    assert g.entries[0, 0] == 5.0  # ||x||^2
    assert g.entries[1, 1] == 25.0


def test_gaussian_kernel_self_similarity_is_one():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 4))
    g = mk.gram(X, mk.KernelSpec("gaussian", 0.7))
    assert (np.diag(g.entries) == 1.0).all()
    assert g.entries.max() <= 1.0
    assert g.entries.min() >= 0.0


def test_gram_is_bitwise_symmetric():
    rng = np.random.default_rng(1)
    for spec in (mk.KernelSpec(), mk.KernelSpec("gaussian", 0.3)):
        g = mk.gram(rng.standard_normal((17, 6)), spec)
        assert (g.entries == g.entries.T).all()


def test_gram_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        mk.gram([[1.0, 2.0], [1.0, 2.0, 3.0]])


def test_linear_grams_are_psd():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n, d = rng.integers(2, 12, size=2)
        g = mk.gram(rng.standard_normal((n, d)))
        assert np.linalg.eigvalsh(g.entries).min() >= -1e-8


def test_normalize_gram_worked_example():
    g = mk.GramMatrix(np.array([[4.0, 6.0], [6.0, 9.0]]))
    out = mk.normalize_gram(g)
    assert out.entries[0, 1] == pytest.approx(1.0)
    assert (np.diag(out.entries) == 1.0).all()


def test_normalize_gram_is_idempotent_and_bounded():
    rng = np.random.default_rng(3)
    g = mk.gram(rng.standard_normal((9, 5)))
    once = mk.normalize_gram(g)
    twice = mk.normalize_gram(once)
    assert np.abs(once.entries - twice.entries).max() <= 1e-12
    assert np.abs(once.entries).max() <= 1.0 + 1e-12
    assert np.linalg.eigvalsh(once.entries).min() >= -1e-8


def test_normalize_gram_flags_degenerate_sample():
    entries = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
    with pytest.raises(DegenerateSampleError) as info:
        mk.normalize_gram(mk.GramMatrix(entries))
    assert info.value.index == 1


def test_combine_identity_cases():
    rng = np.random.default_rng(4)
    g1 = mk.gram(rng.standard_normal((6, 3)))
    g2 = mk.gram(rng.standard_normal((6, 3)))
    assert (mk.combine([g1], mk.SimplexWeights(np.array([1.0]))).entries == g1.entries).all()
    same = mk.combine([g1, g1], np.array([0.5, 0.5]))
    assert np.allclose(same.entries, g1.entries)
    first = mk.combine([g1, g2], np.array([1.0, 0.0]))
    assert (first.entries == g1.entries).all()


def test_combine_preserves_psd():
    rng = np.random.default_rng(5)
    grams = [mk.gram(rng.standard_normal((8, 4))) for _ in range(3)]
    mixed = mk.combine(grams, mk.SimplexWeights(np.array([0.2, 0.5, 0.3])))
    assert np.linalg.eigvalsh(mixed.entries).min() >= -1e-8


def test_combine_rejects_bad_inputs():
    rng = np.random.default_rng(6)
    g1 = mk.gram(rng.standard_normal((4, 3)))
    g2 = mk.gram(rng.standard_normal((5, 3)))
    with pytest.raises(ValueError):
        mk.combine([g1, g2], np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        mk.combine([g1], np.array([-0.1]))
    with pytest.raises(ValueError):
        mk.combine([], np.array([]))


def test_simplex_weights_validation():
    mk.SimplexWeights(np.array([0.25, 0.75]))
    with pytest.raises(ValueError):
        mk.SimplexWeights(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        mk.SimplexWeights(np.array([-0.1, 1.1]))


def test_gram_matrix_validation():
    with pytest.raises(ValueError):
        mk.GramMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))  # not symmetric
    with pytest.raises(ValueError):
        mk.GramMatrix(np.array([[-1.0, 0.0], [0.0, 1.0]]))  # negative diagonal
    with pytest.raises(ValueError):
        mk.GramMatrix(np.array([[np.inf, 0.0], [0.0, 1.0]]))


def test_kernel_rows_match_normalized_gram():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((8, 5))
    for spec in (mk.KernelSpec(), mk.KernelSpec("gaussian", 0.4)):
        g = mk.normalize_gram(mk.gram(X, spec))
        rows = mk.kernel_rows(X, X, spec, normalize=True)
        assert np.allclose(rows, g.entries, atol=1e-12)


def test_kernel_rows_zero_query_gives_zero_row():
    rng = np.random.default_rng(8)
    train = rng.standard_normal((5, 4))
    rows = mk.kernel_rows(np.zeros((2, 4)), train, normalize=True)
    assert (rows == 0.0).all()
