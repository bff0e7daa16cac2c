"""Function-value access to local costs and the two-point pseudo-gradient.

Direction pairs ``(xi1, xi2)`` come from a :class:`DirectionSampler` that draws
in fixed-size blocks from its own generator, so the stream an agent consumes
does not depend on whether rounds are taken one at a time or in bulk.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

SamplerMode = Literal["gaussian", "ball_both", "ball_mixed"]
SAMPLER_MODES = ("gaussian", "ball_both", "ball_mixed")
BLOCK = 256


class NonFiniteError(FloatingPointError):
    """A cost evaluation (or iterate) stopped being finite."""

    def __init__(self, message: str, point=None, round_index: int | None = None):
        super().__init__(message)
        self.point = None if point is None else np.asarray(point)
        self.round_index = round_index


@dataclass
class LocalCost:
    """Zeroth-order access to one agent's cost.

    ``evaluate`` maps a point to a float. When ``vectorized`` is set it also
    accepts an array of shape ``(..., n)`` and returns shape ``(...)``.
    ``subgradient`` is only used by the exact-gradient baseline and by checks.
    """

    dimension: int
    evaluate: Callable
    subgradient: Callable | None = None
    lipschitz: float | None = None
    vectorized: bool = False
    calls: int = field(default=0, compare=False)

    def __call__(self, x) -> float:
        self.calls += 1
        val = float(self.evaluate(x))
        if not np.isfinite(val):
            raise NonFiniteError(f"cost is {val} at {np.asarray(x)!r}", point=x)
        return val

    def batch(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        self.calls += pts.shape[0]
        if self.vectorized:
            vals = np.asarray(self.evaluate(pts), dtype=float)
        else:
            vals = np.array([float(self.evaluate(p)) for p in pts])
        bad = ~np.isfinite(vals)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise NonFiniteError(f"cost is {vals[i]} at {pts[i]!r}", point=pts[i])
        return vals


class DirectionSampler:
    """Source of perturbation pairs ``(xi1, xi2)`` in R^n.

    gaussian: both standard normal. ball_both: both uniform on the ball of
    radius sqrt(n+2). ball_mixed: xi1 on radius sqrt(n+2), xi2 on radius sqrt(n).
    """

    def __init__(self, mode: SamplerMode, dimension: int, rng: np.random.Generator | int | None = None,
                 block: int = BLOCK):
        if mode not in SAMPLER_MODES:
            raise ValueError(f"unknown sampler mode {mode!r}")
        self.mode = mode
        self.dimension = int(dimension)
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.block = int(block)
        self._buf = np.empty((0, 2, self.dimension))
        self._pos = 0

    @property
    def radii(self) -> tuple[float, float] | None:
        n = self.dimension
        if self.mode == "ball_both":
            return np.sqrt(n + 2.0), np.sqrt(n + 2.0)
        if self.mode == "ball_mixed":
            return np.sqrt(n + 2.0), np.sqrt(float(n))
        return None

    def _refill(self) -> np.ndarray:
        n, b = self.dimension, self.block
        z = self.rng.standard_normal((b, 2, n))
        if self.mode == "gaussian":
            return z
        u = self.rng.random((b, 2))
        norms = np.linalg.norm(z, axis=2)
        norms[norms == 0] = 1.0
        radial = np.asarray(self.radii) * u ** (1.0 / n)
        return z * (radial / norms)[:, :, None]

    def take(self, count: int) -> np.ndarray:
        """Next ``count`` pairs as an array of shape ``(count, 2, n)``."""
        out = np.empty((count, 2, self.dimension))
        filled = 0
        while filled < count:
            if self._pos == len(self._buf):
                self._buf = self._refill()
                self._pos = 0
            m = min(count - filled, len(self._buf) - self._pos)
            out[filled:filled + m] = self._buf[self._pos:self._pos + m]
            self._pos += m
            filled += m
        return out

    def draw(self) -> tuple[np.ndarray, np.ndarray]:
        pair = self.take(1)[0]
        return pair[0], pair[1]


def pseudo_gradient(cost: LocalCost, x, k: int, sched, sampler: DirectionSampler) -> np.ndarray:
    """One two-point estimate ``(f(x + b1 xi1 + b2 xi2) - f(x + b1 xi1)) / b2 * xi2``."""
    x = np.asarray(x, dtype=float)
    b1 = float(sched.beta1(k))
    b2 = float(sched.beta2(k))
    if b2 <= 0:
        raise ValueError("beta2 must be positive")
    xi1, xi2 = sampler.draw()
    base = x + b1 * xi1
    diff = cost(base + b2 * xi2) - cost(base)
    return diff / b2 * xi2


def pseudo_gradient_batch(cost: LocalCost, x, k: int, sched, sampler: DirectionSampler,
                          count: int) -> np.ndarray:
    """``count`` independent estimates at the same point; same stream as repeated single calls."""
    x = np.asarray(x, dtype=float)
    b1 = float(sched.beta1(k))
    b2 = float(sched.beta2(k))
    pairs = sampler.take(count)
    base = x + b1 * pairs[:, 0]
    diff = cost.batch(base + b2 * pairs[:, 1]) - cost.batch(base)
    return (diff / b2)[:, None] * pairs[:, 1]


def smoothed_value_mc(cost: LocalCost, x, beta1: float, sampler: DirectionSampler,
                      samples: int) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of ``f(x + beta1 * xi1)``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = np.asarray(x, dtype=float)
    xi1 = sampler.take(samples)[:, 0]
    vals = cost.batch(x + beta1 * xi1)
    stderr = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return float(vals.mean()), stderr


@dataclass(frozen=True)
class MomentReport:
    mean_norm: float
    mean_sq_norm: float
    rms_norm: float
    samples: int

    @property
    def jensen_ok(self) -> bool:
        return self.mean_norm <= self.rms_norm * (1 + 1e-12) + 1e-300


def oracle_moment_check(cost: LocalCost, x, k: int, sched, sampler: DirectionSampler,
                        samples: int = 10_000) -> MomentReport:
    """Empirical first and second moments of the pseudo-gradient norm at round ``k``."""
    g = pseudo_gradient_batch(cost, x, k, sched, sampler, samples)
    norms = np.linalg.norm(g, axis=1)
    m2 = float((norms ** 2).mean())
    report = MomentReport(float(norms.mean()), m2, float(np.sqrt(m2)), samples)
    if not (np.isfinite(report.mean_norm) and np.isfinite(m2)):
        raise NonFiniteError("pseudo-gradient moments are not finite", point=x)
    if not report.jensen_ok:
        raise AssertionError("E||g|| exceeds sqrt(E||g||^2)")
    return report
