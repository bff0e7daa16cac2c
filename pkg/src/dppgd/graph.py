"""Directed communication graphs, weighting matrices and their spectra.

Nodes are labelled ``1..N`` in :class:`DirectedGraph` and in edge-list files;
matrices are indexed from zero, so node ``i`` maps to row ``i - 1``.
An edge ``(i, j)`` means node ``i`` sends to node ``j``.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

WeightRule = Literal["uniform", "lazy"]

STOCHASTIC_TOL = 1e-12
DECAY_KMAX = 200
DECAY_FLOOR = 1e-13


class GraphError(ValueError):
    """Malformed or unusable communication graph."""


class SpectralError(RuntimeError):
    """The dense eigensolver failed."""


class EpsilonWarning(UserWarning):
    """The chosen epsilon lies outside the range with a convergence guarantee."""


@dataclass(frozen=True)
class DirectedGraph:
    node_count: int
    edges: frozenset[tuple[int, int]]

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]]):
        if node_count < 1:
            raise GraphError(f"node_count must be positive, got {node_count}")
        es = frozenset((int(i), int(j)) for i, j in edges)
        for i, j in es:
            if not (1 <= i <= node_count and 1 <= j <= node_count):
                raise GraphError(f"edge ({i}, {j}) has a node outside [1, {node_count}]")
        object.__setattr__(self, "node_count", int(node_count))
        object.__setattr__(self, "edges", es)

    def adjacency(self, self_loops: bool = True) -> np.ndarray:
        """Boolean matrix ``M`` with ``M[i, j]`` set when node i+1 sends to j+1."""
        n = self.node_count
        m = np.zeros((n, n), dtype=bool)
        for i, j in self.edges:
            m[i - 1, j - 1] = True
        if self_loops:
            np.fill_diagonal(m, True)
        return m

    def in_neighbors(self, i: int) -> list[int]:
        """In-neighbourhood of node ``i`` (1-based), always containing ``i``."""
        col = self.adjacency()[:, i - 1]
        return [int(j) + 1 for j in np.flatnonzero(col)]

    def out_neighbors(self, i: int) -> list[int]:
        row = self.adjacency()[i - 1]
        return [int(j) + 1 for j in np.flatnonzero(row)]

    def relabel(self, perm: Iterable[int]) -> "DirectedGraph":
        """Graph with node ``i`` renamed to ``perm[i-1]`` (a permutation of 1..N)."""
        p = list(perm)
        if sorted(p) != list(range(1, self.node_count + 1)):
            raise GraphError("relabel needs a permutation of 1..N")
        return DirectedGraph(self.node_count, ((p[i - 1], p[j - 1]) for i, j in self.edges))


@dataclass(frozen=True)
class WeightMatrices:
    row_stochastic: np.ndarray
    col_stochastic: np.ndarray
    epsilon: float = 0.0
    augmented: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_agents(self) -> int:
        return self.row_stochastic.shape[0]


@dataclass(frozen=True)
class SpectralReport:
    eigs_at_zero: np.ndarray  # magnitudes of A(0), descending
    eigs_at_eps: np.ndarray  # magnitudes of A(eps), descending
    lambda2_mag_at_zero: float
    lambda3_mag_at_zero: float
    epsilon: float
    epsilon_bar: float
    lambda2_mag_at_eps: float
    gamma_bound: float
    gamma_fitted: float
    Gamma_fitted: float
    fit_rounds: int


# -- topology -----------------------------------------------------------------

def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u] & ~seen):
            seen[v] = True
            queue.append(int(v))
    return seen


def is_strongly_connected(graph: DirectedGraph) -> bool:
    """Forward and backward BFS from node 1 must both reach every node."""
    adj = graph.adjacency(self_loops=False)
    return bool(_reachable(adj, 0).all() and _reachable(adj.T, 0).all())


def cycle_graph(n: int) -> DirectedGraph:
    return DirectedGraph(n, ((i, i % n + 1) for i in range(1, n + 1)))


def complete_graph(n: int) -> DirectedGraph:
    return DirectedGraph(n, ((i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j))


def path_graph(n: int) -> DirectedGraph:
    return DirectedGraph(n, ((i, i + 1) for i in range(1, n)))


def random_strongly_connected(n: int, p: float, seed: int | None = None,
                              max_tries: int = 1000) -> DirectedGraph:
    """Erdos-Renyi style digraph, resampled until strongly connected."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        mask = rng.random((n, n)) < p
        np.fill_diagonal(mask, False)
        g = DirectedGraph(n, ((int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(mask))))
        if is_strongly_connected(g):
            return g
    raise GraphError(f"no strongly connected graph after {max_tries} draws (n={n}, p={p})")


def chorded_ring_graph() -> DirectedGraph:
    """Ten-agent unbalanced digraph used as the default experiment topology.

    A directed ring with six one-way chords. In- and out-degrees differ, so no
    uniform weighting is doubly stochastic.
    """
    ring = [(i, i % 10 + 1) for i in range(1, 11)]
    chords = [(1, 3), (3, 6), (5, 9), (7, 2), (10, 4), (8, 5)]
    return DirectedGraph(10, ring + chords)


def read_edge_list(path: str | Path) -> DirectedGraph:
    """Parse ``N`` on the first line followed by ``i j`` lines (1-based)."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise GraphError(f"{path}: empty edge list")
    n = int(lines[0])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"{path}: bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return DirectedGraph(n, edges)


def write_edge_list(graph: DirectedGraph, path: str | Path) -> None:
    rows = [str(graph.node_count)] + [f"{i} {j}" for i, j in sorted(graph.edges)]
    Path(path).write_text("\n".join(rows) + "\n")


# -- weights ------------------------------------------------------------------

def build_weights(graph: DirectedGraph, rule: WeightRule = "uniform") -> WeightMatrices:
    """Row-stochastic ``A_r`` and column-stochastic ``A_c`` for ``graph``.

    ``uniform``: ``[A_r]_ij = 1/|N_i^in|`` and ``[A_c]_ij = 1/|N_j^out|``.
    ``lazy``: self weight 1/2, the remaining half split uniformly over the
    other neighbours.
    """
    if not is_strongly_connected(graph):
        raise GraphError("graph is not strongly connected")
    # receive[i, j]: agent i hears agent j (j in N_i^in)
    receive = graph.adjacency().T.astype(float)
    if rule == "uniform":
        a_r = receive / receive.sum(axis=1, keepdims=True)
        a_c = receive / receive.sum(axis=0, keepdims=True)
    elif rule == "lazy":
        off = receive.copy()
        np.fill_diagonal(off, 0.0)
        n = graph.node_count
        a_r = np.eye(n)
        a_c = np.eye(n)
        rdeg = off.sum(axis=1)
        cdeg = off.sum(axis=0)
        if n > 1:
            a_r = 0.5 * np.eye(n) + 0.5 * off / rdeg[:, None]
            a_c = 0.5 * np.eye(n) + 0.5 * off / cdeg[None, :]
    else:
        raise ValueError(f"unknown weight rule {rule!r}")
    return WeightMatrices(a_r, a_c)


def augment(weights: WeightMatrices, epsilon: float) -> WeightMatrices:
    """Attach the 2N x 2N matrix ``[[A_r, eps I], [I - A_r, A_c - eps I]]``."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    a_r, a_c = weights.row_stochastic, weights.col_stochastic
    eye = np.eye(a_r.shape[0])
    big = np.block([[a_r, epsilon * eye], [eye - a_r, a_c - epsilon * eye]])
    return WeightMatrices(a_r, a_c, float(epsilon), big)


def stochastic_defects(weights: WeightMatrices) -> dict[str, float]:
    """Largest row-sum defect of A_r and column-sum defects of A_c and A."""
    out = {
        "row_stochastic": float(np.abs(weights.row_stochastic.sum(axis=1) - 1).max()),
        "col_stochastic": float(np.abs(weights.col_stochastic.sum(axis=0) - 1).max()),
    }
    if weights.augmented is not None:
        out["augmented"] = float(np.abs(weights.augmented.sum(axis=0) - 1).max())
    return out


def limit_matrix(n_agents: int) -> np.ndarray:
    """The limit ``[[11^T/N, 11^T/N], [0, 0]]`` of the powers of A."""
    lim = np.zeros((2 * n_agents, 2 * n_agents))
    lim[:n_agents, :] = 1.0 / n_agents
    return lim


# -- spectra ------------------------------------------------------------------

def _eig_magnitudes(mat: np.ndarray) -> np.ndarray:
    try:
        vals = np.linalg.eigvals(mat)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(str(exc)) from exc
    if not np.all(np.isfinite(vals)):
        raise SpectralError("eigensolver returned non-finite eigenvalues")
    return np.sort(np.abs(vals))[::-1]


def epsilon_bar(lambda3_mag: float, n_agents: int) -> float:
    return ((1.0 - lambda3_mag) / (20.0 + 8.0 * n_agents)) ** n_agents


def power_decay(augmented: np.ndarray, kmax: int = DECAY_KMAX,
                floor: float = DECAY_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """``||A^k - L||_inf`` for k = 1..kmax, stopping once it drops below ``floor``."""
    n = augmented.shape[0] // 2
    lim = limit_matrix(n)
    power = np.eye(2 * n)
    ks, norms = [], []
    for k in range(1, kmax + 1):
        power = power @ augmented
        val = np.abs(power - lim).sum(axis=1).max()
        if val < floor:
            break
        ks.append(k)
        norms.append(val)
    return np.asarray(ks, dtype=int), np.asarray(norms)


def fit_geometric(ks: np.ndarray, norms: np.ndarray) -> tuple[float, float, float]:
    """Least-squares ``log norm = log Gamma + k log gamma``; returns (gamma, Gamma, R^2)."""
    if len(ks) < 2:
        return 0.0, float(norms[0]) if len(norms) else 0.0, 1.0
    logs = np.log(norms)
    slope, icpt = np.polyfit(ks, logs, 1)
    resid = logs - (icpt + slope * ks)
    ss_tot = float(((logs - logs.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(slope)), float(np.exp(icpt)), r2


def spectral_analysis(weights: WeightMatrices, epsilon: float | None = None,
                      kmax: int = DECAY_KMAX) -> SpectralReport:
    """Eigenvalue magnitudes of A(0) and A(eps), the epsilon bounds and a decay fit."""
    eps = weights.epsilon if epsilon is None else float(epsilon)
    n = weights.n_agents
    eigs0 = _eig_magnitudes(augment(weights, 0.0).augmented)
    big = augment(weights, eps).augmented
    eigs = _eig_magnitudes(big)
    lam3 = float(eigs0[2]) if len(eigs0) > 2 else 0.0
    ebar = epsilon_bar(lam3, n)
    lam2_eps = float(eigs[1])
    gamma_bound = max(lam3 + (20 + 8 * n) * eps ** (1.0 / n), lam2_eps)
    if eps >= ebar:
        warnings.warn(f"epsilon={eps:.3g} is not below epsilon_bar={ebar:.3g}",
                      EpsilonWarning, stacklevel=2)
    ks, norms = power_decay(big, kmax)
    gamma_fit, prefactor, _ = fit_geometric(ks, norms)
    return SpectralReport(
        eigs_at_zero=eigs0,
        eigs_at_eps=eigs,
        lambda2_mag_at_zero=float(eigs0[1]),
        lambda3_mag_at_zero=lam3,
        epsilon=eps,
        epsilon_bar=ebar,
        lambda2_mag_at_eps=lam2_eps,
        gamma_bound=gamma_bound,
        gamma_fitted=gamma_fit,
        Gamma_fitted=prefactor,
        fit_rounds=int(ks[-1]) if len(ks) else 0,
    )


def epsilon_grid(lo: float = 1e-4, hi: float = 0.5, num: int = 41) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), num)


def pick_epsilon(weights: WeightMatrices, report: SpectralReport | None = None,
                 policy: str = "practical", value: float | None = None,
                 grid: np.ndarray | None = None) -> float:
    """Choose epsilon.

    ``theory`` halves epsilon_bar. ``practical`` returns the grid point with the
    smallest fitted decay rate of ``A(eps)^k``. ``manual`` returns ``value``.
    """
    if policy == "theory":
        if report is None:
            report = _quiet_report(weights, 0.0)
        return report.epsilon_bar / 2.0
    if policy == "manual":
        if value is None or value <= 0:
            raise ValueError("manual epsilon policy needs a positive value")
        if report is None:
            report = _quiet_report(weights, 0.0)
        if value >= report.epsilon_bar:
            warnings.warn(f"manual epsilon={value:.3g} is not below epsilon_bar="
                          f"{report.epsilon_bar:.3g}", EpsilonWarning, stacklevel=2)
        return float(value)
    if policy == "practical":
        grid = epsilon_grid() if grid is None else np.asarray(grid, dtype=float)
        rates = [decay_rate(weights, e) for e in grid]
        return float(grid[int(np.argmin(rates))])
    raise ValueError(f"unknown epsilon policy {policy!r}")


def decay_rate(weights: WeightMatrices, epsilon: float) -> float:
    ks, norms = power_decay(augment(weights, epsilon).augmented)
    return fit_geometric(ks, norms)[0]


def _quiet_report(weights: WeightMatrices, eps: float) -> SpectralReport:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EpsilonWarning)
        return spectral_analysis(weights, eps)
