"""Per-round diagnostics and convergence-rate fits."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

COLUMNS = ("round", "alpha", "beta1", "beta_tilde", "gap_hat", "gap_bar",
           "consensus", "surplus", "G_k")


def state_metrics(state, value: Callable) -> dict:
    """Raw (not yet shifted by f*) metrics of one network state.

    ``value`` is the global cost. ``gap_hat`` is the agent average of
    ``f(xhat_i)``; ``consensus`` is ``max_i ||x_i - zbar||``; ``surplus`` is
    ``max_i ||y_i||``.
    """
    zbar = state.z_bar
    agent_values = np.array([float(value(p)) for p in state.x_hat])
    return {
        "gap_hat": float(agent_values.mean()),
        "gap_bar": float(value(zbar)),
        "consensus": float(np.linalg.norm(state.x - zbar, axis=1).max()),
        "surplus": float(np.linalg.norm(state.y, axis=1).max()),
        "agent_values": agent_values,
    }


@dataclass
class MetricsTrace:
    """Metrics averaged over repetitions, one row per recorded round."""

    name: str
    rows: np.ndarray
    config: dict = field(default_factory=dict)
    agent_gaps: np.ndarray | None = None
    per_rep: list[np.ndarray] = field(default_factory=list)
    final_states: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, COLUMNS.index(name)]

    @property
    def rounds(self) -> np.ndarray:
        return self.column("round").astype(int)

    def at(self, name: str, k: int) -> float:
        idx = np.flatnonzero(self.rounds == k)
        if not len(idx):
            raise KeyError(f"round {k} was not recorded")
        return float(self.column(name)[idx[0]])

    def tail_mean(self, name: str, frac: float = 0.1) -> float:
        """Mean of ``name`` over the last ``frac`` of recorded rounds."""
        vals = self.column(name)
        m = max(1, int(round(len(vals) * frac)))
        return float(np.mean(vals[-m:]))


@dataclass(frozen=True)
class RateFit:
    model: Literal["lnt_over_sqrt", "one_over_sqrt"]
    exponent: float
    r2: float
    window: tuple[int, int]
    log_coefficient: float = 0.0  # power of ln k (lnt_over_sqrt only)
    prefactor: float = 1.0
    dropped: int = 0
    reliable: bool = True


def fit_rate(rounds, gaps, model: str = "one_over_sqrt",
             window: tuple[int, int] | None = None) -> RateFit:
    """Least-squares fit of ``log gap`` over the tail window.

    ``one_over_sqrt``: ``log gap = c + p log k``.
    ``lnt_over_sqrt``: ``log gap = c + p log k + q log ln k``.
    The default window is the last 90% of rounds. Non-positive gaps are
    dropped; losing more than half the window flags the fit unreliable.
    """
    k = np.asarray(rounds, dtype=float)
    gap = np.asarray(gaps, dtype=float)
    if window is None:
        window = (max(2, int(k.max() // 10)), int(k.max()))
    lo, hi = window
    inwin = (k >= lo) & (k <= hi) & (k >= 2)
    if inwin.sum() < 3:
        raise ValueError(f"window {window} holds fewer than 3 rounds")
    keep = inwin & (gap > 0) & np.isfinite(gap)
    dropped = int(inwin.sum() - keep.sum())
    reliable = bool(dropped <= inwin.sum() / 2)
    kk, yy = k[keep], np.log(gap[keep])
    cols = [np.ones_like(kk), np.log(kk)]
    if model == "lnt_over_sqrt":
        cols.append(np.log(np.log(kk)))
    elif model != "one_over_sqrt":
        raise ValueError(f"unknown rate model {model!r}")
    design = np.column_stack(cols)
    if len(kk) < design.shape[1]:
        return RateFit(model, float("nan"), float("nan"), (lo, hi), dropped=dropped, reliable=False)
    coef, *_ = np.linalg.lstsq(design, yy, rcond=None)
    resid = yy - design @ coef
    ss_tot = float(((yy - yy.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    q = float(coef[2]) if model == "lnt_over_sqrt" else 0.0
    return RateFit(model, float(coef[1]), r2, (lo, hi), q, float(np.exp(coef[0])), dropped, reliable)
