"""Test problems: collections of local costs with a known optimum."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .oracle import LocalCost


@dataclass
class Problem:
    name: str
    n: int
    costs: list[LocalCost]
    f_star: float | None = None
    x_star: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    # set for problems the compiled round kernel implements natively
    kernel_weights: np.ndarray | None = None

    @property
    def n_agents(self) -> int:
        return len(self.costs)

    def value(self, x) -> np.ndarray | float:
        """Global cost ``sum_i f_i``; accepts ``(..., n)`` when every cost is vectorized."""
        x = np.asarray(x, dtype=float)
        if x.ndim > 1 and all(c.vectorized for c in self.costs):
            return sum(np.asarray(c.evaluate(x)) for c in self.costs)
        if x.ndim > 1:
            return np.array([self.value(p) for p in x.reshape(-1, self.n)]).reshape(x.shape[:-1])
        return float(sum(c.evaluate(x) for c in self.costs))

    def subgradient(self, x) -> np.ndarray:
        return sum(c.subgradient(x) for c in self.costs)


def _chain_terms(x: np.ndarray) -> np.ndarray:
    return 1.0 + x[..., 1:] - 2.0 * x[..., :-1]


def nesterov_cost(weight: float, n: int) -> LocalCost:
    """``weight * |x_1 - 1| + sum_d (1 + x_{d+1} - 2 x_d)^2``, minimised at the all-ones vector."""

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        r = _chain_terms(x)
        return weight * np.abs(x[..., 0] - 1.0) + (r * r).sum(axis=-1)

    def subgradient(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros(n)
        # sign(0) = 0 picks the zero subgradient at the kink
        g[0] = weight * np.sign(x[0] - 1.0)
        r = _chain_terms(x)
        g[1:] += 2.0 * r
        g[:-1] -= 4.0 * r
        return g

    # |d/dx_1| <= weight on the kink term; the quadratic part is unbounded on R^n
    lip = weight if n == 1 else None
    return LocalCost(n, evaluate, subgradient, lipschitz=lip, vectorized=True)


def nesterov_nonsmooth(n: int, n_agents: int, seed: int = 0,
                       l_range: tuple[float, float] = (0.5, 1.5)) -> Problem:
    rng = np.random.default_rng(seed)
    weights = rng.uniform(l_range[0], l_range[1], n_agents)
    costs = [nesterov_cost(float(w), n) for w in weights]
    return Problem("nesterov_nonsmooth", n, costs, f_star=0.0, x_star=np.ones(n),
                   params={"l": weights.tolist(), "l_range": list(l_range)},
                   kernel_weights=weights)


def quadratic_cost(center: np.ndarray) -> LocalCost:
    c = np.asarray(center, dtype=float)

    def evaluate(x):
        d = np.asarray(x, dtype=float) - c
        return (d * d).sum(axis=-1)

    return LocalCost(c.size, evaluate, lambda x: 2.0 * (np.asarray(x, dtype=float) - c),
                     vectorized=True)


def quadratic(n: int, n_agents: int, seed: int = 0) -> Problem:
    """``f_i(x) = ||x - c_i||^2`` with standard normal centres; optimum at their mean."""
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_agents, n))
    x_star = centers.mean(axis=0)
    f_star = float(((centers - x_star) ** 2).sum())
    return Problem("quadratic", n, [quadratic_cost(c) for c in centers], f_star=f_star,
                   x_star=x_star, params={"centers": centers.tolist()})


PROBLEMS: dict[str, Callable[..., Problem]] = {
    "nesterov_nonsmooth": nesterov_nonsmooth,
    "quadratic": quadratic,
}


def make_problem(name: str, n: int, n_agents: int, seed: int = 0, **kwargs) -> Problem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(PROBLEMS)}") from None
    return factory(n, n_agents, seed, **kwargs)
