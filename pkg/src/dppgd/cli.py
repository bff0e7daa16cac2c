"""Command-line entry point ``dppgd``."""
from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import experiment as ex
from .graph import (EpsilonWarning, build_weights, complete_graph, cycle_graph, decay_rate,
                    epsilon_grid, chorded_ring_graph, path_graph, pick_epsilon, read_edge_list,
                    spectral_analysis)
from .metrics import fit_rate


def _graph_arg(text: str):
    """``chorded_ring``, ``cycle:N``, ``complete:N``, ``path:N`` or an edge-list file."""
    name, _, size = text.partition(":")
    makers = {"cycle": cycle_graph, "complete": complete_graph, "path": path_graph}
    if name == "chorded_ring":
        return chorded_ring_graph()
    if name in makers and size:
        return makers[name](int(size))
    return read_edge_list(text)


def _emit(traces, cfg, args) -> None:
    out = ex.output_dir(args.output or cfg.output)
    paths = ex.export_csv(traces, out)
    for tr in traces:
        gap = tr.column("gap_hat")
        print(f"{tr.name}: rounds={int(tr.rounds[-1])} gap_hat={gap[-1]:.4g} "
              f"consensus={tr.column('consensus')[-1]:.3g}")
    if args.svg:
        svg = out / f"{cfg.name}_{args.command}.svg"
        ex.plot_svg(traces, svg)
        paths.append(svg)
    print(f"wrote {len(paths)} files to {out}")


def _load(args) -> ex.ExperimentConfig:
    cfg = ex.load_config(args.config)
    if args.rounds is not None:
        cfg = cfg.replace(rounds=args.rounds)
    if args.repetitions is not None:
        cfg = cfg.replace(repetitions=args.repetitions)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    _emit([ex.run(cfg)], cfg, args)
    return 0


def cmd_sweep_stepsize(args) -> int:
    cfg = _load(args)
    _emit(ex.sweep_stepsize(cfg), cfg, args)
    return 0


def cmd_sweep_beta(args) -> int:
    cfg = _load(args)
    _emit(ex.sweep_beta(cfg), cfg, args)
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    _emit(ex.compare_baselines(cfg), cfg, args)
    return 0


def cmd_spectra(args) -> int:
    graph = _graph_arg(args.graph)
    weights = build_weights(graph, args.rule)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EpsilonWarning)
        eps = args.epsilon if args.epsilon is not None else pick_epsilon(weights)
        rep = spectral_analysis(weights, eps)
    summary = {
        "nodes": graph.node_count,
        "edges": len(graph.edges),
        "epsilon": rep.epsilon,
        "epsilon_bar": rep.epsilon_bar,
        "lambda2_at_zero": rep.lambda2_mag_at_zero,
        "lambda3_at_zero": rep.lambda3_mag_at_zero,
        "lambda2_at_eps": rep.lambda2_mag_at_eps,
        "gamma_bound": rep.gamma_bound,
        "gamma_fitted": rep.gamma_fitted,
        "Gamma_fitted": rep.Gamma_fitted,
    }
    print(json.dumps(summary, indent=1))
    if args.eps_grid:
        print("epsilon,gamma_fitted")
        for e in epsilon_grid():
            print(f"{e:.6g},{decay_rate(weights, e):.6f}")
    return 0


def cmd_fit_rate(args) -> int:
    data = ex.read_csv(args.csv)
    window = tuple(args.window) if args.window else None
    fit = fit_rate(data["round"], data[args.column], args.model, window)
    print(json.dumps({
        "model": fit.model, "exponent": fit.exponent, "log_coefficient": fit.log_coefficient,
        "prefactor": fit.prefactor, "r2": fit.r2, "window": list(fit.window),
        "dropped": fit.dropped, "reliable": fit.reliable,
    }, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dppgd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="YAML config, or a JSON sidecar from an earlier run")
        sp.add_argument("--output", help=f"output directory (default: config, ${ex.OUTPUT_ENV}, ./results)")
        sp.add_argument("--rounds", type=int)
        sp.add_argument("--repetitions", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--svg", action="store_true", help="also write a log-log SVG chart")
        sp.set_defaults(func=func)

    with_config("run", cmd_run, "run one configuration")
    with_config("sweep-stepsize", cmd_sweep_stepsize, "alpha_k = 0.1/(1+k)^a for a in 0, .2, .5, .7, 1")
    with_config("sweep-beta", cmd_sweep_beta, "beta2/beta1 = (1+k)^-b for b in 1, 3, 5, 7, 9")
    with_config("compare-baselines", cmd_compare, "pseudo-gradient method vs exact subgradients")

    sp = sub.add_parser("spectra", help="eigenvalues, epsilon bounds and the decay fit of a graph")
    sp.add_argument("graph", help="edge-list file, or chorded_ring / cycle:N / complete:N / path:N")
    sp.add_argument("--rule", default="uniform", choices=["uniform", "lazy"])
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--eps-grid", action="store_true", help="print the fitted rate over the epsilon grid")
    sp.set_defaults(func=cmd_spectra)

    sp = sub.add_parser("fit-rate", help="fit a power law to a trace CSV")
    sp.add_argument("csv")
    sp.add_argument("--model", default="one_over_sqrt", choices=["one_over_sqrt", "lnt_over_sqrt"])
    sp.add_argument("--column", default="gap_hat")
    sp.add_argument("--window", type=int, nargs=2, metavar=("LO", "HI"))
    sp.set_defaults(func=cmd_fit_rate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.seterr(over="ignore", invalid="ignore")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
