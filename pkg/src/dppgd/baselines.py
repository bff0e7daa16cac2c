"""Reference methods: exact-subgradient distributed descent and a centralised solver."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import NetworkState, SubgradientOracle, step
from .graph import WeightMatrices
from .problems import Problem
from .projection import ConstraintSet, project
from .schedules import StepSchedule


def distributed_subgradient_step(state: NetworkState, weights: WeightMatrices, costs,
                                 step_schedule: StepSchedule, cset: ConstraintSet) -> NetworkState:
    """One surplus-consensus round driven by true subgradients (D-DPS analog)."""
    return step(state, weights, SubgradientOracle(costs), step_schedule, None, cset)


@dataclass(frozen=True)
class Reference:
    f_star: float
    x_star: np.ndarray
    exact: bool
    iterations: int = 0


class ReferenceWarning(UserWarning):
    """The centralised solver stopped on its iteration budget."""


def solve_reference(problem: Problem, cset: ConstraintSet | None = None, tol: float = 1e-10,
                    max_iter: int = 2_000_000, patience: int = 10_000) -> Reference:
    """Optimal value of ``sum_i f_i`` over ``cset``.

    Registered optima are returned directly when they are feasible. Otherwise
    projected subgradient descent runs with steps ``s / sqrt(j + 1)``, where
    ``j`` counts iterations since the last restart; ``s`` halves at each
    restart. It stops once the best value has improved by less than ``tol``
    over ``patience`` iterations.
    """
    if cset is None:
        cset = ConstraintSet.whole_space(problem.n)
    if problem.f_star is not None and problem.x_star is not None and cset.contains(problem.x_star):
        return Reference(problem.f_star, np.asarray(problem.x_star, dtype=float), True)

    x = project(cset, np.zeros(problem.n))
    best_x, best_f = x.copy(), float(problem.value(x))
    scale = 1.0
    last_f, last_it, j = best_f, 0, 0
    it = 0
    for it in range(1, max_iter + 1):
        g = problem.subgradient(x)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            best_x, best_f = x.copy(), float(problem.value(x))
            break
        x = project(cset, x - scale / np.sqrt(j + 1.0) * g / gn)
        j += 1
        fx = float(problem.value(x))
        if fx < best_f:
            best_f, best_x = fx, x.copy()
        if it - last_it >= patience:
            if last_f - best_f < tol:
                break
            last_f, last_it = best_f, it
            x, scale, j = best_x.copy(), scale / 2.0, 0
    else:
        warnings.warn(f"reference solver hit max_iter={max_iter}; f_star is inexact",
                      ReferenceWarning, stacklevel=2)
        return Reference(best_f, best_x, False, it)
    return Reference(best_f, best_x, True, it)
