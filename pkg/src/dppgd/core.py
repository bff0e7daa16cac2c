"""Synchronous rounds of distributed projected pseudo-gradient descent.

Each round every agent reads its in-neighbours' round-k values and then
writes round k+1:

    x_i <- P_X[ sum_j Ar_ij x_j + eps y_i - alpha_k g_i ]
    y_i <- x_i - sum_j Ar_ij x_j + sum_j Ac_ij y_j - eps y_i
    xhat_i <- xhat_i + alpha_{k+1} / (alpha_0 + ... + alpha_{k+1}) * (x_i - xhat_i)

``step`` works for any list of local costs. ``simulate`` drives whole runs
and hands problems the round kernel understands to the compiled (or numpy)
kernel, falling back to ``step`` otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .graph import WeightMatrices, augment
from .metrics import COLUMNS, state_metrics
from .oracle import DirectionSampler, NonFiniteError, pseudo_gradient
from .problems import Problem
from .projection import KIND_CODES, ConstraintSet, project
from .schedules import SmoothingSchedule, StepSchedule

DIVERGENCE_LIMIT = 1e9
MAX_RECORDED_ROWS = 10_000
CHUNK = 4096


@dataclass(frozen=True)
class AgentState:
    x: np.ndarray
    y: np.ndarray
    x_hat: np.ndarray
    alpha_sum: float


@dataclass
class NetworkState:
    """Stacked per-agent vectors; row ``i`` belongs to agent ``i``."""

    k: int
    x: np.ndarray
    y: np.ndarray
    x_hat: np.ndarray
    alpha_sum: float

    @property
    def n_agents(self) -> int:
        return self.x.shape[0]

    @property
    def agents(self) -> list[AgentState]:
        return [AgentState(self.x[i], self.y[i], self.x_hat[i], self.alpha_sum)
                for i in range(self.n_agents)]

    @property
    def z_bar(self) -> np.ndarray:
        return (self.x.sum(axis=0) + self.y.sum(axis=0)) / self.n_agents

    def stacked(self) -> np.ndarray:
        """``z`` with the x rows first and the y rows after them."""
        return np.vstack([self.x, self.y])

    def copy(self) -> "NetworkState":
        return NetworkState(self.k, self.x.copy(), self.y.copy(), self.x_hat.copy(), self.alpha_sum)


@dataclass
class StepTerms:
    """By-products of one round, for checks against the stacked form."""

    estimates: np.ndarray  # the g_i fed to the x update
    augmented: np.ndarray  # x_{k+1} - A_r x_k - eps y_k, per agent
    G: float


class ZerothOrderOracle:
    """Per-agent pseudo-gradients, each agent with its own direction stream."""

    def __init__(self, costs, samplers: list[DirectionSampler]):
        if len(costs) != len(samplers):
            raise ValueError("one sampler per cost is required")
        self.costs = list(costs)
        self.samplers = list(samplers)

    def estimates(self, x: np.ndarray, k: int, smoothing) -> np.ndarray:
        return np.stack([pseudo_gradient(c, x[i], k, smoothing, s)
                         for i, (c, s) in enumerate(zip(self.costs, self.samplers))])


class SubgradientOracle:
    """True subgradients; used by the exact-gradient baseline."""

    def __init__(self, costs):
        missing = [i for i, c in enumerate(costs) if c.subgradient is None]
        if missing:
            raise ValueError(f"costs {missing} have no subgradient")
        self.costs = list(costs)

    def estimates(self, x: np.ndarray, k: int, smoothing=None) -> np.ndarray:
        return np.stack([np.asarray(c.subgradient(x[i]), dtype=float)
                         for i, c in enumerate(self.costs)])


def agent_seed(seed: int, rep: int, agent: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(rep, agent))


def make_samplers(n_agents: int, dimension: int, mode: str, seed: int,
                  rep: int = 0) -> list[DirectionSampler]:
    return [DirectionSampler(mode, dimension, np.random.default_rng(agent_seed(seed, rep, i)))
            for i in range(n_agents)]


def init(problem: Problem, weights: WeightMatrices, cset: ConstraintSet,
         step_schedule: StepSchedule, x0="zeros", seed: int = 0, rep: int = 0) -> NetworkState:
    """Round-0 state: ``y = 0``, ``xhat = x``, and ``alpha_sum = alpha_0``.

    ``x0`` is ``"zeros"``, ``"random"`` (uniform on the bounding box of a
    bounded set) or an explicit point / per-agent array.
    """
    n_agents, n = weights.n_agents, problem.n
    if len(problem.costs) != n_agents:
        raise ValueError(f"{len(problem.costs)} costs for {n_agents} agents")
    if isinstance(x0, str) and x0 == "zeros":
        x = np.zeros((n_agents, n))
    elif isinstance(x0, str) and x0 == "random":
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, n_agents, 0)))
        lo, hi = _bounding_box(cset)
        x = project(cset, rng.uniform(lo, hi, size=(n_agents, n)))
    elif isinstance(x0, str):
        raise ValueError(f"unknown x0 policy {x0!r}")
    else:
        x = np.broadcast_to(np.asarray(x0, dtype=float), (n_agents, n)).copy()
    for i in range(n_agents):
        if not cset.contains(x[i]):
            raise ValueError(f"initial point of agent {i} lies outside the constraint set")
    return NetworkState(0, x, np.zeros_like(x), x.copy(), step_schedule(0))


def _bounding_box(cset: ConstraintSet) -> tuple[np.ndarray, np.ndarray]:
    n = cset.dimension
    if cset.kind == "box":
        return cset.lo, cset.hi
    if cset.kind == "ball":
        return cset.center - cset.radius, cset.center + cset.radius
    raise ValueError(f"random x0 needs a bounded set, got {cset.kind}")


def _check_finite(k: int, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.abs(a).max(initial=0.0) > DIVERGENCE_LIMIT:
            raise NonFiniteError(f"iterates diverged at round {k}", round_index=k)


def step(state: NetworkState, weights: WeightMatrices, oracle, step_schedule: StepSchedule,
         smoothing, cset: ConstraintSet, return_terms: bool = False):
    """Advance every agent from round k to round k+1 (double-buffered)."""
    k = state.k
    a_r, a_c, eps = weights.row_stochastic, weights.col_stochastic, weights.epsilon
    x, y = state.x, state.y
    alpha = step_schedule(k)
    g = oracle.estimates(x, k, smoothing)
    mixed = a_r @ x
    x_new = project(cset, mixed + eps * y - alpha * g)
    y_new = x - mixed + a_c @ y - eps * y
    _check_finite(k, x_new, y_new)
    alpha_next = step_schedule(k + 1)
    alpha_sum = state.alpha_sum + alpha_next
    w = alpha_next / alpha_sum if alpha_sum > 0 else 0.0
    x_hat = state.x_hat + w * (x_new - state.x_hat)
    new = NetworkState(k + 1, x_new, y_new, x_hat, alpha_sum)
    if not return_terms:
        return new
    aug = x_new - mixed - eps * y
    return new, StepTerms(g, aug, float(np.linalg.norm(aug, axis=1).sum()))


def step_stacked(z: np.ndarray, weights: WeightMatrices, g_terms: np.ndarray) -> np.ndarray:
    """``z_{k+1} = A z_k + g`` with ``g`` zero on the surplus rows."""
    big = weights.augmented
    if big is None:
        big = augment(weights, weights.epsilon).augmented
    n_agents = weights.n_agents
    g = np.zeros_like(z)
    g[:n_agents] = g_terms
    return big @ z + g


# -- whole runs ---------------------------------------------------------------

def record_stride(rounds: int) -> int:
    return max(1, math.ceil(rounds / MAX_RECORDED_ROWS))


def recorded_rounds(rounds: int) -> np.ndarray:
    ks = np.arange(0, rounds + 1, record_stride(rounds))
    if ks[-1] != rounds:
        ks = np.append(ks, rounds)
    return ks


@dataclass
class SimResult:
    rows: np.ndarray  # one row per recorded round, columns as COLUMNS
    agent_gaps: np.ndarray  # per-agent f(xhat_i) - f*, one row per recorded round
    state: NetworkState
    backend: str
    f_star: float = 0.0
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, COLUMNS.index(name)]


def simulate(problem: Problem, weights: WeightMatrices, cset: ConstraintSet,
             step_schedule: StepSchedule, smoothing: SmoothingSchedule, rounds: int, *,
             sampler_mode: str = "gaussian", seed: int = 0, rep: int = 0, x0="zeros",
             method: str = "dppgd", f_star: float | None = None,
             backend: str = "auto") -> SimResult:
    """Run ``rounds`` rounds and record metrics.

    ``method`` is ``"dppgd"`` (pseudo-gradients) or ``"ddps"`` (exact
    subgradients, no smoothing). ``backend``: ``"auto"``, ``"compiled"``,
    ``"python"`` (numpy round kernel) or ``"step"`` (generic per-round path).
    """
    if method not in ("dppgd", "ddps"):
        raise ValueError(f"unknown method {method!r}")
    if weights.augmented is None:
        weights = augment(weights, weights.epsilon)
    if f_star is None:
        f_star = problem.f_star if problem.f_star is not None else 0.0
    state = init(problem, weights, cset, step_schedule, x0, seed, rep)
    chosen = _choose_backend(problem, backend)
    if chosen == "step":
        rows, agent = _simulate_steps(problem, weights, cset, step_schedule, smoothing, rounds,
                                      state, sampler_mode, seed, rep, method)
    else:
        impl = kernels.get(chosen)
        rows, agent = _simulate_kernel(impl, problem, weights, cset, step_schedule, smoothing,
                                       rounds, state, sampler_mode, seed, rep, method)
    rows[:, COLUMNS.index("gap_hat")] -= f_star
    rows[:, COLUMNS.index("gap_bar")] -= f_star
    agent -= f_star
    return SimResult(rows, agent, state, chosen, f_star)


def _choose_backend(problem: Problem, backend: str) -> str:
    if backend == "step" or problem.kernel_weights is None:
        if backend in ("compiled", "python"):
            raise ValueError(f"problem {problem.name!r} is not supported by the round kernel")
        return "step"
    if backend == "auto":
        return "compiled" if kernels.HAVE_COMPILED else "python"
    if backend == "compiled" and not kernels.HAVE_COMPILED:
        raise RuntimeError("compiled kernel is not built")
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def _schedule_columns(ks: np.ndarray, step_schedule, smoothing, method: str) -> np.ndarray:
    cols = np.empty((len(ks), 4))
    cols[:, 0] = ks
    cols[:, 1] = step_schedule.values(ks)
    if method == "ddps":
        cols[:, 2:] = np.nan
    else:
        cols[:, 2] = smoothing.beta1(ks)
        cols[:, 3] = smoothing.ratio(ks)
    return cols


def _simulate_steps(problem, weights, cset, step_schedule, smoothing, rounds, state,
                    sampler_mode, seed, rep, method):
    if method == "ddps":
        oracle = SubgradientOracle(problem.costs)
    else:
        oracle = ZerothOrderOracle(problem.costs,
                                   make_samplers(weights.n_agents, problem.n, sampler_mode, seed, rep))
    ks = recorded_rounds(rounds)
    wanted = set(ks.tolist())
    rows = np.full((len(ks), len(COLUMNS)), np.nan)
    rows[:, :4] = _schedule_columns(ks, step_schedule, smoothing, method)
    agent = np.empty((len(ks), weights.n_agents))
    r = 0
    cur = state
    for k in range(rounds + 1):
        if k in wanted:
            m = state_metrics(cur, problem.value)
            rows[r, 4:8] = m["gap_hat"], m["gap_bar"], m["consensus"], m["surplus"]
            agent[r] = m["agent_values"]
        if k == rounds:
            break
        cur, terms = step(cur, weights, oracle, step_schedule, smoothing, cset, return_terms=True)
        if k in wanted:
            rows[r, 8] = terms.G
            r += 1
    _copy_state(state, cur)
    return rows, agent


def _copy_state(dst: NetworkState, src: NetworkState) -> None:
    dst.k, dst.alpha_sum = src.k, src.alpha_sum
    dst.x[...] = src.x
    dst.y[...] = src.y
    dst.x_hat[...] = src.x_hat


def _simulate_kernel(impl, problem, weights, cset, step_schedule, smoothing, rounds, state,
                     sampler_mode, seed, rep, method):
    n_agents, n = weights.n_agents, problem.n
    use_sub = method == "ddps"
    samplers = None if use_sub else make_samplers(n_agents, n, sampler_mode, seed, rep)
    ks = recorded_rounds(rounds)
    record = np.zeros(rounds + 1, dtype=np.uint8)
    record[ks] = 1
    rows = np.full((len(ks), len(COLUMNS)), np.nan)
    rows[:, :4] = _schedule_columns(ks, step_schedule, smoothing, method)
    agent = np.empty((len(ks), n_agents))
    out = np.empty((min(CHUNK, max(rounds, 1)), 5 + n_agents))
    cparams = _constraint_params(cset, n)
    lw = np.ascontiguousarray(problem.kernel_weights, dtype=float)
    a_r = np.ascontiguousarray(weights.row_stochastic)
    a_c = np.ascontiguousarray(weights.col_stochastic)
    x, y, xh = state.x, state.y, state.x_hat
    alpha_sum = state.alpha_sum
    r = 0
    for k0 in range(0, rounds, CHUNK):
        c = min(CHUNK, rounds - k0)
        kk = np.arange(k0, k0 + c + 1, dtype=float)
        alphas = step_schedule.values(kk)
        if use_sub:
            b1 = b2 = np.ones(c)
            xi = np.zeros((n_agents, c, 2, n))
        else:
            b1 = np.asarray(smoothing.beta1(kk[:-1]), dtype=float)
            b2 = np.asarray(smoothing.beta2(kk[:-1]), dtype=float)
            xi = np.stack([s.take(c) for s in samplers])
        alpha_sum, nrows, status, bad = impl.run_rounds(
            x, y, xh, alpha_sum, a_r, a_c, weights.epsilon, lw, alphas, b1, b2, xi,
            record[k0:k0 + c], out, *cparams, int(use_sub), DIVERGENCE_LIMIT)
        if status != 0:
            raise NonFiniteError(f"iterates diverged at round {k0 + bad}", round_index=k0 + bad)
        rows[r:r + nrows, 4:9] = out[:nrows, :5]
        agent[r:r + nrows] = out[:nrows, 5:]
        r += nrows
    final = np.empty(5 + n_agents)
    impl.state_metrics(x, y, xh, lw, final)
    rows[r, 4:8] = final[:4]
    agent[r] = final[5:]
    state.k = rounds
    state.alpha_sum = alpha_sum
    return rows, agent


def _constraint_params(cset: ConstraintSet, n: int):
    zeros = np.zeros(n)
    lo = cset.lo if cset.lo is not None else zeros
    hi = cset.hi if cset.hi is not None else zeros
    center = cset.center if cset.center is not None else zeros
    normal = cset.normal if cset.normal is not None else zeros
    return (KIND_CODES[cset.kind], np.ascontiguousarray(lo, dtype=float),
            np.ascontiguousarray(hi, dtype=float), np.ascontiguousarray(center, dtype=float),
            float(cset.radius), np.ascontiguousarray(normal, dtype=float), float(cset.offset))
