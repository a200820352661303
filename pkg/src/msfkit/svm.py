"""Dual SVM training on a precomputed kernel.

`svm_solve` runs two-variable ascent on the box- and equality-constrained
dual with maximal-violating-pair working-set selection, so both constraints
hold by construction at every iterate. `qp_oracle` independently maximizes
the same objective by enumerating active sets of the feasible polytope and
is meant for verification on tiny problems only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .featmap import _frozen
from .kernels import GramMatrix


@dataclass(frozen=True)
class TrainSet:
    """A kernel matrix, +/-1 labels, and the box bound C."""

    gram: GramMatrix
    y: np.ndarray
    C: float

    def __post_init__(self):
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64))
        if y.ndim != 1 or y.size != self.gram.order:
            raise ValueError(
                f"labels must be a vector of length {self.gram.order}, got shape {y.shape}"
            )
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not ((y > 0).any() and (y < 0).any()):
            raise ValueError("both classes must be present")
        if not (np.isfinite(self.C) and self.C > 0):
            raise ValueError(f"C must be positive, got {self.C}")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "C", float(self.C))

    @property
    def size(self) -> int:
        return self.y.size


@dataclass
class SvmModel:
    """Solution of the dual problem.

    `objective` is the dual value W* = sum(alpha) - 0.5 (alpha*y)' K (alpha*y),
    recomputed exactly from the final iterate; `objective_trace` holds the
    incrementally updated value after every working-set step.
    """

    alpha: np.ndarray
    b: float
    support: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    objective_trace: np.ndarray = field(repr=False)


def _dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    v = alpha * y
    return float(alpha.sum() - 0.5 * (v @ K @ v))


def _bias(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, C: float) -> float:
    """Average margin over unbounded support vectors, else the midpoint of
    the feasible bias interval implied by the bound samples."""
    margin = y - K @ (alpha * y)
    eps = 1e-8 * C
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        return float(margin[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
    lo = margin[up].max() if up.any() else -np.inf
    hi = margin[low].min() if low.any() else np.inf
    if not np.isfinite(lo):
        return float(hi)
    if not np.isfinite(hi):
        return float(lo)
    return float(0.5 * (lo + hi))


def _finish(K, y, alpha, C, residual, iters, converged, trace) -> SvmModel:
    return SvmModel(
        alpha=_frozen(alpha),
        b=_bias(K, y, alpha, C),
        support=_frozen(np.flatnonzero(alpha > 1e-8 * C)),
        objective=_dual_objective(K, y, alpha),
        kkt_residual=float(residual),
        iterations=iters,
        converged=converged,
        objective_trace=_frozen(np.asarray(trace)),
    )


def svm_solve(
    ts: TrainSet,
    tol: float = 1e-4,
    alpha0: np.ndarray | None = None,
    max_iter: int | None = None,
) -> SvmModel:
    """Maximize the dual objective for a fixed kernel.

    Each step picks the maximal violating pair (i from the set that may move
    up, j from the set that may move down), takes the exact two-variable step
    clipped to the box, and updates the gradient. Terminates when the largest
    violation drops to ``tol``; a warm start ``alpha0`` must already satisfy
    the constraints. Raises ConvergenceError (carrying the best iterate and
    its residual) if the iteration cap of 10^4 * N is reached.
    """
    if not (0.0 < tol <= 1e-2):
        raise ValueError(f"tol must be in (0, 1e-2], got {tol}")
    K = ts.gram.entries
    y = ts.y
    C = ts.C
    n = ts.size
    if max_iter is None:
        max_iter = 10_000 * n

    if alpha0 is None:
        alpha = np.zeros(n)
        g = -np.ones(n)  # gradient of f = 0.5 a'Qa - sum(a) at a = 0
        W = 0.0
    else:
        alpha = np.array(alpha0, dtype=np.float64)
        if alpha.shape != (n,):
            raise ValueError(f"alpha0 must have shape ({n},), got {alpha.shape}")
        if alpha.min() < -1e-12 * C or alpha.max() > C * (1 + 1e-12):
            raise ValueError("alpha0 violates the box constraints")
        np.clip(alpha, 0.0, C, out=alpha)
        if abs(alpha @ y) > 1e-8 * n * C:
            raise ValueError("alpha0 violates the equality constraint")
        g = y * (K @ (alpha * y)) - 1.0
        W = _dual_objective(K, y, alpha)

    trace = [W]
    residual = np.inf
    for it in range(max_iter):
        score = -y * g
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            residual = 0.0
            return _finish(K, y, alpha, C, residual, it, True, trace)
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        residual = score[i] - score[j]
        if residual <= tol:
            return _finish(K, y, alpha, C, residual, it, True, trace)

        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 0.0:
            eta = 1e-12
        cap_i = (C - alpha[i]) if y[i] > 0 else alpha[i]
        cap_j = alpha[j] if y[j] > 0 else (C - alpha[j])
        t = min(residual / eta, cap_i, cap_j)

        new_i = alpha[i] + y[i] * t
        new_j = alpha[j] - y[j] * t
        if t == cap_i:
            new_i = C if y[i] > 0 else 0.0
        if t == cap_j:
            new_j = 0.0 if y[j] > 0 else C
        new_i = min(max(new_i, 0.0), C)
        new_j = min(max(new_j, 0.0), C)
        dai = new_i - alpha[i]
        daj = new_j - alpha[j]

        W -= (
            g[i] * dai
            + g[j] * daj
            + 0.5
            * (K[i, i] * dai * dai + 2.0 * y[i] * y[j] * K[i, j] * dai * daj + K[j, j] * daj * daj)
        )
        g += y * (K[:, i] * (y[i] * dai) + K[:, j] * (y[j] * daj))
        alpha[i] = new_i
        alpha[j] = new_j
        trace.append(W)

    model = _finish(K, y, alpha, C, residual, max_iter, False, trace)
    raise ConvergenceError(
        f"no convergence within {max_iter} iterations (violation {residual:.3e})",
        model=model,
        kkt_residual=float(residual),
    )


def decision(model: SvmModel, kernel_row: np.ndarray, y: np.ndarray) -> float:
    """Decision value sum_i alpha_i y_i k(x, x_i) + b for one query row."""
    row = np.asarray(kernel_row, dtype=np.float64)
    labels = np.asarray(y, dtype=np.float64)
    if row.shape != model.alpha.shape or labels.shape != model.alpha.shape:
        raise ValueError(
            f"kernel row and labels must have shape {model.alpha.shape}, "
            f"got {row.shape} and {labels.shape}"
        )
    return float(row @ (model.alpha * labels) + model.b)


def _grid_candidates(n: int, C: float, y: np.ndarray, grid: int) -> np.ndarray:
    """Box grid points pushed onto the equality hyperplane by alternating
    projection; approximate, used only to cross-check the enumeration."""
    axes = [np.linspace(0.0, C, grid)] * n
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    for _ in range(100):
        pts -= np.outer((pts @ y) / n, y)
        np.clip(pts, 0.0, C, out=pts)
    keep = np.abs(pts @ y) <= 1e-9 * n * C
    return pts[keep]


def qp_oracle(ts: TrainSet, grid: int = 0) -> SvmModel:
    """Brute-force maximizer of the dual objective for problems with N <= 8.

    Enumerates every split of the variables into {free, at 0, at C}: for each
    split the stationarity system restricted to the free set is solved with
    the equality constraint, and box-feasible candidates are scored. The best
    candidate is the exact optimum up to linear-algebra roundoff. ``grid``
    >= 2 additionally scores a projected grid of the given resolution.
    """
    n = ts.size
    if n > 8:
        raise ValueError(f"oracle only supports N <= 8, got {n}")
    K = ts.gram.entries
    y = ts.y
    C = ts.C
    Q = (y[:, None] * y[None, :]) * K
    feas = 1e-8 * max(1.0, C)

    candidates = []
    idx = np.arange(n)
    for fmask in range(1 << n):
        free = idx[[(fmask >> k) & 1 == 1 for k in range(n)]]
        bound = idx[[(fmask >> k) & 1 == 0 for k in range(n)]]
        nb = bound.size
        # every bound variable sits at 0 or at C: all 2^nb assignments at once
        pats = ((np.arange(1 << nb)[:, None] >> np.arange(nb)[None, :]) & 1) * C
        if free.size == 0:
            ok = np.abs(pats @ y[bound]) <= feas
            for p in pats[ok]:
                a = np.zeros(n)
                a[bound] = p
                candidates.append(a)
            continue
        nf = free.size
        A = np.zeros((nf + 1, nf + 1))
        A[:nf, :nf] = Q[np.ix_(free, free)]
        A[:nf, nf] = y[free]
        A[nf, :nf] = y[free]
        rhs = np.empty((nf + 1, pats.shape[0]))
        rhs[:nf, :] = 1.0 - Q[np.ix_(free, bound)] @ pats.T
        rhs[nf, :] = -(pats @ y[bound])
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
        af = sol[:nf, :]
        ok = (af.min(axis=0) >= -feas) & (af.max(axis=0) <= C + feas)
        for col in np.flatnonzero(ok):
            a = np.zeros(n)
            a[bound] = pats[col]
            a[free] = np.clip(af[:, col], 0.0, C)
            candidates.append(a)

    if grid >= 2:
        candidates.extend(_grid_candidates(n, C, y, grid))

    A = np.asarray(candidates)
    w = A.sum(axis=1) - 0.5 * np.einsum("pi,ij,pj->p", A, Q, A)
    best = A[int(np.argmax(w))]
    score = -y * (y * (K @ (best * y)) - 1.0)
    up = ((y > 0) & (best < C)) | ((y < 0) & (best > 0))
    low = ((y < 0) & (best < C)) | ((y > 0) & (best > 0))
    residual = (score[up].max() - score[low].min()) if up.any() and low.any() else 0.0
    return _finish(K, y, best, C, residual, 0, True, [float(w.max())])
