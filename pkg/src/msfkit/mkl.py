"""Learning convex kernel-combination weights by alternating optimization.

The outer objective J(d) is the optimal dual value of the SVM trained on the
combined kernel sum_m d_m K_m. J is convex in d (a pointwise maximum of
functions affine in d) and is minimized over the probability simplex by
reduced-gradient steps with a backtracking line search: an exact SVM solve at
the current d supplies the gradient through the envelope theorem, and a step
is accepted only when it lowers J.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .featmap import _frozen
from .kernels import GramMatrix, SimplexWeights, combine
from .svm import SvmModel, TrainSet, svm_solve


@dataclass(frozen=True)
class MklProblem:
    """Per-source Gram matrices with shared labels and box bound."""

    grams: tuple[GramMatrix, ...]
    y: np.ndarray
    C: float

    def __post_init__(self):
        grams = tuple(self.grams)
        if not grams:
            raise ValueError("need at least one gram matrix")
        order = grams[0].order
        if any(g.order != order for g in grams):
            raise ValueError("gram matrices must all have the same order")
        # TrainSet re-runs the label checks; build one to validate early
        TrainSet(grams[0], self.y, self.C)
        object.__setattr__(self, "grams", grams)
        object.__setattr__(
            self, "y", _frozen(np.ascontiguousarray(np.asarray(self.y, dtype=np.float64)))
        )
        object.__setattr__(self, "C", float(self.C))

    @property
    def kernel_count(self) -> int:
        return len(self.grams)


@dataclass
class MklModel:
    """Simplex weights, the SVM retrained at those weights, and the trace of
    outer-objective values (non-increasing by construction)."""

    weights: SimplexWeights
    svm: SvmModel
    objective_trace: np.ndarray = field(repr=False)
    converged: bool = True
    outer_iterations: int = 0


def mkl_gradient(grams, alpha: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Partial derivatives of the dual value with respect to each weight:
    -0.5 * (alpha*y)' K_m (alpha*y), one per kernel (non-positive for PSD K_m)."""
    a = np.asarray(alpha, dtype=np.float64)
    labels = np.asarray(y, dtype=np.float64)
    if a.shape != labels.shape or a.ndim != 1:
        raise ValueError(f"alpha {a.shape} and labels {labels.shape} must be equal-length vectors")
    order = grams[0].order if grams else 0
    if a.size != order:
        raise ValueError(f"alpha has length {a.size} but grams have order {order}")
    v = a * labels
    return np.array([-0.5 * (v @ g.entries @ v) for g in grams])


def outer_objective(p: MklProblem, d, tol: float = 1e-6, alpha0=None) -> float:
    """J(d): the optimal dual value on the combined kernel at weights d."""
    model = svm_solve(TrainSet(combine(list(p.grams), d), p.y, p.C), tol, alpha0=alpha0)
    return model.objective


def _simplex_direction(grad: np.ndarray, d: np.ndarray, entry_tol: float = 1e-8) -> np.ndarray:
    """Descent direction for J on the simplex.

    The negative gradient is centered over the movable coordinates so the
    step stays on sum(d) = 1. Coordinates at zero stay frozen unless moving
    them inward is favored by more than ``entry_tol``; frozen coordinates
    whose centered component would turn negative are dropped and the rest
    re-centered.
    """
    m = grad.size
    act = d > 0.0
    if act.any():
        ref = grad[act].mean()
        act |= (~act) & (-(grad - ref) > entry_tol)
    for _ in range(m + 1):
        if not act.any():
            break
        ref = grad[act].mean()
        delta = np.zeros(m)
        delta[act] = -(grad[act] - ref)
        drop = act & (d <= 0.0) & (delta < 0.0)
        if not drop.any():
            return delta
        act &= ~drop
    return np.zeros(m)


def mkl_train(
    p: MklProblem,
    step: float = 1.0,
    outer_tol: float = 1e-4,
    max_outer: int = 200,
) -> MklModel:
    """Alternate exact SVM solves with reduced-gradient weight updates.

    Weights start uniform. Each outer iteration solves the SVM on the current
    combination, forms the gradient of J, projects it onto the simplex, and
    backtracks on the step length (halving, at most 30 times) until J
    decreases; the step length is also capped so no weight goes negative,
    and weights that reach zero are snapped exactly and frozen. Terminates
    on a relative objective change below ``outer_tol``, a weight move below
    1e-8 in max-norm, or no improving step; hitting ``max_outer`` instead
    returns the model flagged as non-converged.
    """
    if not (np.isfinite(step) and step > 0):
        raise ValueError(f"step must be positive, got {step}")
    if not (np.isfinite(outer_tol) and outer_tol > 0):
        raise ValueError(f"outer_tol must be positive, got {outer_tol}")
    m = p.kernel_count
    inner_tol = min(1e-5, outer_tol / 10.0)
    grams = list(p.grams)

    def solve_at(d, warm):
        try:
            return svm_solve(TrainSet(combine(grams, d), p.y, p.C), inner_tol, alpha0=warm)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"inner SVM solve failed at weights {np.round(d, 6)}: {exc}",
                model=exc.model,
                kkt_residual=exc.kkt_residual,
            ) from exc

    d = np.full(m, 1.0 / m)
    if m == 1:
        model = solve_at(d, None)
        return MklModel(
            weights=SimplexWeights(d),
            svm=model,
            objective_trace=np.asarray([model.objective]),
            converged=True,
            outer_iterations=0,
        )

    current = solve_at(d, None)
    J = current.objective
    trace = [J]
    alpha = np.array(current.alpha)
    converged = False
    outer = 0
    while outer < max_outer:
        grad = mkl_gradient(grams, alpha, p.y)
        delta = _simplex_direction(grad, d)
        if not delta.any():
            converged = True
            break
        neg = delta < 0.0
        gamma = min(step, float((-d[neg] / delta[neg]).min()))
        accepted = None
        for _ in range(30):
            d_try = d + gamma * delta
            d_try[d_try < 1e-10] = 0.0
            d_try /= d_try.sum()
            if np.abs(d_try - d).max() < 1e-8:
                break
            trial = solve_at(d_try, alpha)
            if trial.objective < J:
                accepted = (d_try, trial)
                break
            gamma *= 0.5
        if accepted is None:
            converged = True
            break
        outer += 1
        d_new, trial = accepted
        move = float(np.abs(d_new - d).max())
        d = d_new
        alpha = np.array(trial.alpha)
        J_new = trial.objective
        trace.append(J_new)
        small = abs(J - J_new) <= outer_tol * (1.0 + abs(J_new))
        J = J_new
        if small or move < 1e-8:
            converged = True
            break

    final = solve_at(d, alpha)
    return MklModel(
        weights=SimplexWeights(d),
        svm=final,
        objective_trace=np.asarray(trace),
        converged=converged,
        outer_iterations=outer,
    )
