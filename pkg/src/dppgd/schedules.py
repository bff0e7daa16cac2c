"""Step-size and smoothing sequences indexed by the round counter k >= 0."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Literal

import numpy as np


@dataclass(frozen=True)
class StepSchedule:
    """Positive non-increasing step sizes.

    ``power``: ``alpha0 / (k + shift)**a``.
    ``constant_horizon``: ``alpha0 / sqrt(horizon + 2)`` for every k.
    ``constant``: ``alpha0``.
    """

    kind: Literal["power", "constant_horizon", "constant"] = "power"
    alpha0: float = 0.1
    a: float = 0.5
    shift: float = 1.0
    horizon: int = 0

    def __post_init__(self):
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be non-negative")
        if self.kind == "power" and (self.a < 0 or self.shift <= 0):
            raise ValueError("power schedule needs a >= 0 and shift > 0")
        if self.kind not in ("power", "constant_horizon", "constant"):
            raise ValueError(f"unknown step schedule {self.kind!r}")

    def values(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if self.kind == "power":
            return self.alpha0 / (k + self.shift) ** self.a
        if self.kind == "constant_horizon":
            return np.full_like(k, self.alpha0 / np.sqrt(self.horizon + 2.0))
        return np.full_like(k, self.alpha0)

    def __call__(self, k: int) -> float:
        return float(self.values(k))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class SmoothingSchedule:
    """``beta1_k = c1 / (k + shift)**p1`` and ``beta2_k = c2 / (k + shift)**p2``.

    The ratio ``beta2_k / beta1_k`` decays like ``(k + shift)**-(p2 - p1)``.
    """

    p1: float = 1.5
    p2: float = 2.5
    shift: float = 1.0
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if self.p1 < 0 or self.p2 < 0 or self.c1 <= 0 or self.c2 <= 0 or self.shift <= 0:
            raise ValueError("smoothing schedule must be positive and non-increasing")

    @classmethod
    def from_ratio_exponent(cls, p1: float, b: float, shift: float = 1.0) -> "SmoothingSchedule":
        """Schedule with ``beta2_k / beta1_k = (k + shift)**-b``."""
        return cls(p1=p1, p2=p1 + b, shift=shift)

    def beta1(self, k) -> np.ndarray | float:
        return self.c1 / (np.asarray(k, dtype=float) + self.shift) ** self.p1

    def beta2(self, k) -> np.ndarray | float:
        return self.c2 / (np.asarray(k, dtype=float) + self.shift) ** self.p2

    def ratio(self, k) -> np.ndarray | float:
        return self.beta2(k) / self.beta1(k)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class FixedSmoothing:
    """Constant ``beta1`` and ``beta2``; handy for oracle checks at a fixed k."""

    b1: float
    b2: float

    def beta1(self, k) -> np.ndarray | float:
        return np.full_like(np.asarray(k, dtype=float), self.b1)

    def beta2(self, k) -> np.ndarray | float:
        return np.full_like(np.asarray(k, dtype=float), self.b2)

    def ratio(self, k) -> np.ndarray | float:
        return self.beta2(k) / self.beta1(k)
