"""Euclidean projection onto closed convex sets with closed-form projections."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

SetKind = Literal["whole_space", "box", "ball", "halfspace"]

# integer codes shared with the round kernels
KIND_CODES = {"whole_space": 0, "box": 1, "ball": 2, "halfspace": 3}
ROUND_SLACK = 8 * np.finfo(float).eps
SETTLE_ITERS = 8


@dataclass(frozen=True)
class ConstraintSet:
    """Nonempty closed convex subset of R^n.

    Use the constructors :meth:`whole_space`, :meth:`box`, :meth:`ball` and
    :meth:`halfspace` rather than building instances by hand.
    """

    kind: SetKind
    dimension: int
    lo: np.ndarray | None = field(default=None, repr=False)
    hi: np.ndarray | None = field(default=None, repr=False)
    center: np.ndarray | None = field(default=None, repr=False)
    radius: float = 0.0
    normal: np.ndarray | None = field(default=None, repr=False)
    offset: float = 0.0

    @classmethod
    def whole_space(cls, n: int) -> "ConstraintSet":
        return cls("whole_space", n)

    @classmethod
    def box(cls, lo, hi, n: int | None = None) -> "ConstraintSet":
        lo_a = np.atleast_1d(np.asarray(lo, dtype=float))
        hi_a = np.atleast_1d(np.asarray(hi, dtype=float))
        if n is not None:
            lo_a = np.broadcast_to(lo_a, (n,)).copy()
            hi_a = np.broadcast_to(hi_a, (n,)).copy()
        if lo_a.shape != hi_a.shape:
            raise ValueError("box bounds have different shapes")
        if np.any(lo_a > hi_a):
            raise ValueError("box requires lo <= hi")
        return cls("box", lo_a.size, lo=lo_a, hi=hi_a)

    @classmethod
    def ball(cls, center, radius: float) -> "ConstraintSet":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if radius < 0:
            raise ValueError("ball requires radius >= 0")
        return cls("ball", c.size, center=c, radius=float(radius))

    @classmethod
    def halfspace(cls, a, b: float) -> "ConstraintSet":
        """The set ``{x : <a, x> <= b}``."""
        a_v = np.atleast_1d(np.asarray(a, dtype=float))
        if not np.any(a_v):
            raise ValueError("halfspace normal must be nonzero")
        return cls("halfspace", a_v.size, normal=a_v, offset=float(b))

    @classmethod
    def from_dict(cls, spec: dict[str, Any], n: int) -> "ConstraintSet":
        kind = spec.get("kind", "box")
        if kind == "whole_space":
            return cls.whole_space(n)
        if kind == "box":
            return cls.box(spec.get("lo", -10.0), spec.get("hi", 10.0), n)
        if kind == "ball":
            return cls.ball(np.broadcast_to(spec.get("center", 0.0), (n,)), spec["radius"])
        if kind == "halfspace":
            return cls.halfspace(np.broadcast_to(spec["a"], (n,)), spec["b"])
        raise ValueError(f"unknown constraint kind {kind!r}")

    def contains(self, v, tol: float = 1e-12) -> bool:
        v = np.asarray(v, dtype=float)
        if self.kind == "whole_space":
            return True
        if self.kind == "box":
            return bool(np.all(v >= self.lo - tol) and np.all(v <= self.hi + tol))
        if self.kind == "ball":
            d = np.linalg.norm(v - self.center, axis=-1)
            return bool(np.all(d <= self.radius * (1 + tol) + tol))
        return bool(np.all(v @ self.normal <= self.offset + tol * (1 + abs(self.offset))))


def project(cset: ConstraintSet, v) -> np.ndarray:
    """Nearest point of ``cset`` to ``v``; rows of a 2-D array are projected independently."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != cset.dimension:
        raise ValueError(f"point has dimension {v.shape[-1]}, set has {cset.dimension}")
    if cset.kind == "whole_space":
        return v.copy()
    if cset.kind == "box":
        return np.clip(v, cset.lo, cset.hi)
    if cset.kind == "ball":
        return _project_ball(v, cset.center, cset.radius)
    return _project_halfspace(v, cset.normal, cset.offset)


# Both helpers repeat the correction until the result passes the same
# membership test they start with, so projecting a projection is a no-op.

def _project_ball(v, center, radius):
    out = v
    for _ in range(SETTLE_ITERS):
        d = out - center
        dist = np.sqrt((d * d).sum(axis=-1, keepdims=True))
        size = np.abs(out).max(axis=-1, keepdims=True) + np.abs(center).max()
        outside = dist > radius + ROUND_SLACK * (radius + size)
        if not outside.any():
            break
        scale = radius / np.where(outside, dist, 1.0)
        out = np.where(outside, center + d * scale, out)
    return out


def _project_halfspace(v, a, b):
    out = v
    aa = a @ a
    for _ in range(SETTLE_ITERS):
        excess = out @ a - b
        slack = ROUND_SLACK * (abs(b) + np.abs(out) @ np.abs(a))
        viol = np.where(excess > slack, excess, 0.0)
        if not np.any(viol):
            break
        out = out - np.multiply.outer(viol, a) / aa
    return out
