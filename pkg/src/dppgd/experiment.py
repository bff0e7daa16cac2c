"""Experiment configuration, repetition averaging, parameter sweeps and CSV export.

A config is a YAML (or JSON) mapping; every key is optional::

    name: stepsize
    problem: {name: nesterov_nonsmooth, n: 1, agents: 10, seed: 1, l_range: [0.5, 1.5]}
    graph: {kind: chorded_ring}            # cycle | complete | random | file
    weight_rule: uniform           # or lazy
    epsilon: {policy: practical}   # theory | manual (with value)
    constraint: {kind: box, lo: -10, hi: 10}
    sampler: gaussian              # ball_both | ball_mixed
    step: {kind: power, alpha0: 0.1, a: 0.5, shift: 1}
    smoothing: {p1: 1.5, p2: 2.5, shift: 1}
    rounds: 10000
    repetitions: 10
    seed: 0
    x0: zeros                      # random | [x_1, ..., x_n]
    method: dppgd                  # ddps for the exact-subgradient baseline
    backend: auto
    per_agent: false
    per_rep: false
    output: null                   # falls back to $DPPGD_OUTPUT_DIR, then ./results
"""
from __future__ import annotations

import copy
import csv
import io
import json
import os
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .baselines import solve_reference
from .core import simulate
from .graph import (DirectedGraph, EpsilonWarning, augment, build_weights, complete_graph,
                    cycle_graph, chorded_ring_graph, pick_epsilon, random_strongly_connected,
                    read_edge_list, spectral_analysis)
from .metrics import COLUMNS, MetricsTrace
from .problems import make_problem
from .projection import ConstraintSet
from .schedules import SmoothingSchedule, StepSchedule

OUTPUT_ENV = "DPPGD_OUTPUT_DIR"
STEPSIZE_EXPONENTS = (0.0, 0.2, 0.5, 0.7, 1.0)
RATIO_EXPONENTS = (1, 3, 5, 7, 9)


@dataclass
class ExperimentConfig:
    name: str = "run"
    problem: dict = field(default_factory=lambda: {
        "name": "nesterov_nonsmooth", "n": 1, "agents": 10, "seed": 1, "l_range": [0.5, 1.5]})
    graph: dict = field(default_factory=lambda: {"kind": "chorded_ring"})
    weight_rule: str = "uniform"
    epsilon: dict = field(default_factory=lambda: {"policy": "practical"})
    constraint: dict = field(default_factory=lambda: {"kind": "box", "lo": -10.0, "hi": 10.0})
    sampler: str = "gaussian"
    step: dict = field(default_factory=lambda: {"kind": "power", "alpha0": 0.1, "a": 0.5})
    smoothing: dict = field(default_factory=lambda: {"p1": 1.5, "p2": 2.5})
    rounds: int = 1000
    repetitions: int = 10
    seed: int = 0
    x0: Any = "zeros"
    method: str = "dppgd"
    backend: str = "auto"
    per_agent: bool = False
    per_rep: bool = False
    output: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]  # a JSON sidecar
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        merged = {}
        for key, val in data.items():
            default = getattr(base, key)
            if isinstance(default, dict) and isinstance(val, dict) and key != "step":
                merged[key] = {**default, **val}
            else:
                merged[key] = val
        return cls(**merged)

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update(changes)
        return ExperimentConfig(**d)

    @property
    def n(self) -> int:
        return int(self.problem.get("n", 1))

    @property
    def agents(self) -> int:
        return int(self.problem.get("agents", 10))

    def step_schedule(self) -> StepSchedule:
        return StepSchedule(**self.step)

    def smoothing_schedule(self) -> SmoothingSchedule:
        s = dict(self.smoothing)
        if "b" in s:
            b = s.pop("b")
            s["p2"] = s.get("p1", 1.5) + b
        return SmoothingSchedule(**s)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return ExperimentConfig.from_dict(data)


def build_graph(spec: dict, agents: int) -> DirectedGraph:
    kind = spec.get("kind", "chorded_ring")
    if kind == "chorded_ring":
        g = chorded_ring_graph()
    elif kind == "cycle":
        g = cycle_graph(agents)
    elif kind == "complete":
        g = complete_graph(agents)
    elif kind == "random":
        g = random_strongly_connected(agents, spec.get("p", 0.3), spec.get("seed", 0))
    elif kind == "file":
        g = read_edge_list(spec["path"])
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    if g.node_count != agents:
        raise ValueError(f"graph has {g.node_count} nodes but the problem has {agents} agents")
    return g


@dataclass
class Setup:
    problem: Any
    graph: DirectedGraph
    weights: Any
    constraint: ConstraintSet
    f_star: float
    spectral: dict


def prepare(cfg: ExperimentConfig) -> Setup:
    p = cfg.problem
    extra = {"l_range": tuple(p["l_range"])} if p.get("name") == "nesterov_nonsmooth" and "l_range" in p else {}
    problem = make_problem(p.get("name", "nesterov_nonsmooth"), cfg.n, cfg.agents, p.get("seed", 0), **extra)
    graph = build_graph(cfg.graph, cfg.agents)
    base = build_weights(graph, cfg.weight_rule)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EpsilonWarning)
        report0 = spectral_analysis(base, 0.0)
        eps = pick_epsilon(base, report0, cfg.epsilon.get("policy", "practical"),
                           cfg.epsilon.get("value"))
        report = spectral_analysis(base, eps)
    cset = ConstraintSet.from_dict(cfg.constraint, cfg.n)
    ref = solve_reference(problem, cset)
    spectral = {
        "epsilon": eps,
        "epsilon_bar": report.epsilon_bar,
        "lambda3_at_zero": report.lambda3_mag_at_zero,
        "lambda2_at_eps": report.lambda2_mag_at_eps,
        "gamma_bound": report.gamma_bound,
        "gamma_fitted": report.gamma_fitted,
        "Gamma_fitted": report.Gamma_fitted,
    }
    return Setup(problem, graph, augment(base, eps), cset, ref.f_star, spectral)


def run(cfg: ExperimentConfig, setup: Setup | None = None) -> MetricsTrace:
    """Run ``cfg.repetitions`` independent repetitions and average their metrics."""
    setup = setup or prepare(cfg)
    step_s, smooth_s = cfg.step_schedule(), cfg.smoothing_schedule()
    reps, agent_gaps, finals = [], [], []
    backend = None
    for rep in range(cfg.repetitions):
        res = simulate(setup.problem, setup.weights, setup.constraint, step_s, smooth_s, cfg.rounds,
                       sampler_mode=cfg.sampler, seed=cfg.seed, rep=rep, x0=cfg.x0,
                       method=cfg.method, f_star=setup.f_star, backend=cfg.backend)
        backend = res.backend
        reps.append(res.rows)
        agent_gaps.append(res.agent_gaps)
        finals.append({"x": res.state.x.tolist(), "y": res.state.y.tolist(),
                       "x_hat": res.state.x_hat.tolist()})
    rows = np.mean(reps, axis=0) if reps else np.empty((0, len(COLUMNS)))
    if reps:
        rows[:, :4] = reps[0][:, :4]
    trace = MetricsTrace(cfg.name, rows, cfg.to_dict(),
                         np.mean(agent_gaps, axis=0) if agent_gaps else None, reps, finals)
    trace.meta = {
        "seed": cfg.seed,
        "backend": backend,
        "f_star": setup.f_star,
        "graph": {"nodes": setup.graph.node_count, "edges": sorted(setup.graph.edges)},
        "l": setup.problem.params.get("l"),
        **setup.spectral,
    }
    return trace


def sweep_stepsize(base: ExperimentConfig, exponents=STEPSIZE_EXPONENTS) -> list[MetricsTrace]:
    """One run per ``alpha_k = 0.1 / (1 + k)**a``, smoothing exponents 1.5 and 2.5."""
    setup = prepare(base)
    out = []
    for a in exponents:
        cfg = base.replace(name=f"{base.name}_a{a:g}",
                           step={"kind": "power", "alpha0": 0.1, "a": float(a), "shift": 1.0},
                           smoothing={"p1": 1.5, "p2": 2.5, "shift": 1.0})
        out.append(run(cfg, setup))
    return out


def sweep_beta(base: ExperimentConfig, exponents=RATIO_EXPONENTS) -> list[MetricsTrace]:
    """One run per ratio ``beta2/beta1 = (1 + k)**-b`` with ``alpha_k = 0.1/sqrt(k + 1)``."""
    setup = prepare(base)
    out = []
    for b in exponents:
        cfg = base.replace(name=f"{base.name}_b{b:g}",
                           step={"kind": "power", "alpha0": 0.1, "a": 0.5, "shift": 1.0},
                           smoothing={"p1": 1.5, "p2": 1.5 + b, "shift": 1.0})
        out.append(run(cfg, setup))
    return out


def compare_baselines(base: ExperimentConfig) -> list[MetricsTrace]:
    """The pseudo-gradient method and the exact-subgradient baseline on one setup."""
    setup = prepare(base)
    return [run(base.replace(name=f"{base.name}_{m}", method=m), setup) for m in ("dppgd", "ddps")]


# -- output -------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def trace_csv(trace: MetricsTrace, per_agent: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(COLUMNS)
    agents = trace.agent_gaps if per_agent and trace.agent_gaps is not None else None
    if agents is not None:
        header += [f"gap_agent_{i + 1}" for i in range(agents.shape[1])]
    w.writerow(header)
    for r, row in enumerate(trace.rows):
        cells = [str(int(row[0]))] + [_fmt(v) for v in row[1:]]
        if agents is not None:
            cells += [_fmt(v) for v in agents[r]]
        w.writerow(cells)
    return buf.getvalue()


def output_dir(cfg_output: str | None = None) -> Path:
    return Path(cfg_output or os.environ.get(OUTPUT_ENV) or "results")


def export_csv(traces: list[MetricsTrace], path: str | Path) -> list[Path]:
    """Write ``<name>.csv`` plus a ``<name>.json`` sidecar per trace into directory ``path``."""
    root = Path(path)
    written = []
    try:
        root.mkdir(parents=True, exist_ok=True)
        for tr in traces:
            per_agent = bool(tr.config.get("per_agent"))
            csv_path = root / f"{tr.name}.csv"
            csv_path.write_text(trace_csv(tr, per_agent))
            side = {
                "config": tr.config,
                "seed": tr.config.get("seed"),
                "columns": list(COLUMNS),
                "meta": getattr(tr, "meta", {}),
                "final_states": tr.final_states,
            }
            side_path = root / f"{tr.name}.json"
            side_path.write_text(json.dumps(side, indent=1, default=_json_default) + "\n")
            written += [csv_path, side_path]
            if tr.config.get("per_rep"):
                rep_dir = root / f"{tr.name}_reps"
                rep_dir.mkdir(exist_ok=True)
                for i, rows in enumerate(tr.per_rep):
                    rep = MetricsTrace(f"rep{i}", rows, tr.config)
                    p = rep_dir / f"rep{i}.csv"
                    p.write_text(trace_csv(rep))
                    written.append(p)
    except OSError as exc:
        raise OSError(f"cannot write results under {root}: {exc}") from exc
    return written


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(c) for c in r] for r in body]) if body else np.empty((0, len(header)))
    return {h: data[:, i] for i, h in enumerate(header)}


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def plot_svg(traces: list[MetricsTrace], path: str | Path, column: str = "gap_hat") -> Path:
    """Log-log line chart of ``column`` against round, one line per trace (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for tr in traces:
        k = tr.rounds
        v = tr.column(column)
        keep = (k > 0) & (v > 0)
        ax.loglog(k[keep], v[keep], label=tr.name)
    ax.set_xlabel("round k")
    ax.set_ylabel(column)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return Path(path)
