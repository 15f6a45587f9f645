"""Command-line entry point.

One binary with subcommands: ``simulate`` runs the learning dynamics on a
game file, ``analyze`` performs the resistance/stationary analysis, and
``netform`` runs the network formation experiment.  Every command writes a
manifest JSON next to its artifacts and is deterministic given that manifest.

Exit codes: 0 success, 2 input validation, 3 guard/resource limit, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dynamics, netform, stability
from .errors import NumericError, ResourceLimitError
from .game import Game

EXIT_VALIDATION = 2
EXIT_GUARD = 3
EXIT_NUMERIC = 4


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def _manifest(out_dir: Path, command: str, config: dict, started: float):
    _write_json(out_dir / "manifest.json", {
        "command": command,
        "config": config,
        "tool_version": __version__,
        "runtime_seconds": time.time() - started,
    })


def _matrix_to_csv(path: Path, matrix: np.ndarray, labels: list[str]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(labels)
        for row in matrix:
            writer.writerow([_fmt(v) for v in row])


# -- simulate ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    game = Game.load(args.game)
    config = dynamics.LearnerConfig(epsilon=args.epsilon, lam=args.lam, seed=args.seed)
    config.check_step_size(game)
    if args.steps < 1:
        raise ValueError("--steps must be at least 1")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()

    rng = np.random.RandomState(args.seed)
    init = dynamics.initial_state(game, rng)
    with open(out_dir / "trace.csv", "w", newline="") as sink:
        trace = dynamics.run(game, init, config, args.steps,
                             snapshot_every=args.snapshot_every,
                             delta=args.delta, sink=sink)
    if trace.snapshots:
        with open(out_dir / "snapshots.jsonl", "w") as fh:
            trace.snapshots_to_jsonl(fh)
    report = dynamics.occupancy(trace, game)
    _write_json(out_dir / "occupancy.json", report.to_dict())
    _manifest(out_dir, "simulate", {
        "game": str(args.game), "epsilon": args.epsilon, "lambda": args.lam,
        "delta": args.delta, "steps": args.steps, "seed": args.seed,
        "snapshot_every": args.snapshot_every,
    }, started)
    return 0


# -- analyze -----------------------------------------------------------------


def cmd_analyze(args) -> int:
    game = Game.load(args.game)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    labels = [",".join(map(str, p)) for p in game.profiles()]

    graph = stability.build_one_step_graph(game, args.epsilon, args.delta)
    _write_json(out_dir / "one_step_graph.json", {
        "num_states": graph.num_states,
        "epsilon": graph.epsilon,
        "delta": graph.delta,
        "eta": graph.eta_value,
        "arrows": [
            {
                "src": labels[a.src], "dst": labels[a.dst], "deviator": a.deviator,
                "weight": a.weight, "gamma": a.gamma,
                "prob_annotation": a.prob_annotation,
            }
            for a in graph.arrows.values()
        ],
    })

    report = stability.stochastically_stable_set(game, args.epsilon,
                                                 rho=args.rho, delta=args.delta)
    _write_json(out_dir / "resistance_report.json", report.to_dict())

    if args.mc_trials > 0:
        phat = stability.estimate_phat(game, args.epsilon, args.delta,
                                       args.mc_trials, args.mc_cap, args.seed,
                                       workers=args.threads)
        _matrix_to_csv(out_dir / "phat_mc.csv", phat.matrix, labels)
        _write_json(out_dir / "phat_mc.json", {
            "provenance": phat.provenance,
            "trials": phat.trials,
            "spill": [float(v) for v in phat.spill],
            "warnings": phat.warnings,
            "matrix": {labels[i]: [float(v) for v in row]
                       for i, row in enumerate(phat.matrix)},
        })
        pi_graphs = stability.stationary_from_graphs(phat)
        pi_solve = stability.stationary_solve(phat)
        diff = float(np.abs(pi_graphs.pi - pi_solve.pi).max())
        _write_json(out_dir / "stationary.json", {
            "pi_wgraph": [float(v) for v in pi_graphs.pi],
            "pi_solve": [float(v) for v in pi_solve.pi],
            "states": labels,
            "max_abs_difference": diff,
        })
        if diff > 1e-6:
            raise NumericError(
                f"stationary distributions disagree by {diff} (> 1e-6)"
            )

    _manifest(out_dir, "analyze", {
        "game": str(args.game), "epsilon": args.epsilon, "delta": args.delta,
        "rho": args.rho, "mc_trials": args.mc_trials, "mc_cap": args.mc_cap,
        "seed": args.seed, "threads": args.threads,
    }, started)
    return 0


# -- netform -----------------------------------------------------------------


def _netform_run(game, topology, metric_table, args, seed, out_dir, write_steps):
    config = dynamics.LearnerConfig(epsilon=args.epsilon, lam=args.lam, seed=seed)
    config.check_step_size(game)
    rng = np.random.RandomState(seed)
    init = dynamics.initial_state(game, rng)
    trace = dynamics.run(game, init, config, args.steps, delta=args.delta)
    metric = metric_table[trace.profiles]
    running = np.cumsum(metric) / np.arange(1, len(metric) + 1)
    if write_steps:
        with open(out_dir / f"metric_seed{seed}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "mean_inverse_total_distance", "running_average"])
            for t in range(len(metric)):
                writer.writerow([t + 1, _fmt(metric[t]), _fmt(running[t])])
        final_profile = game.decode(int(trace.profiles[-1]))
        choice = netform.profile_to_choice(topology, game, final_profile)
        graph = netform.induced_graph(topology, choice)
        with open(out_dir / f"final_edges_seed{seed}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["from", "to"])
            for j, i in sorted(graph.links):
                writer.writerow([j, i])
    report = dynamics.occupancy(trace, game)
    return trace, metric, running, report


def cmd_netform(args) -> int:
    if args.topology:
        topology = netform.Topology.load(args.topology)
    else:
        topology = netform.Topology.ring(args.n)
    game = netform.make_netform_game(topology, args.kappa, args.offset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()

    subsets = [topology.link_subsets(i) for i in range(topology.n)]
    metric_table = np.zeros(game.num_profiles)
    nash_mask = np.zeros(game.num_profiles, dtype=bool)
    for idx, profile in enumerate(game.profiles()):
        choice = [subsets[i][a] for i, a in enumerate(profile)]
        graph = netform.induced_graph(topology, choice)
        metric_table[idx] = netform.mean_inverse_total_distance(graph, topology)
    for profile in game.nash_equilibria():
        nash_mask[game.encode(profile)] = True

    seeds = [args.seed + k for k in range(args.seeds)]
    summary = []
    for seed in seeds:
        trace, metric, running, report = _netform_run(
            game, topology, metric_table, args, seed, out_dir,
            write_steps=(len(seeds) == 1),
        )
        nash_mass = sum(
            frac for pss, frac in report.fractions.items()
            if nash_mask[game.encode(pss)]
        )
        summary.append({
            "seed": seed,
            "final_running_average": float(running[-1]),
            "nash_neighborhood_occupancy": float(nash_mass),
            "residual": report.residual,
        })
        _write_json(out_dir / f"occupancy_seed{seed}.json", report.to_dict())
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "final_running_average",
                         "nash_neighborhood_occupancy", "residual"])
        for row in summary:
            writer.writerow([row["seed"], _fmt(row["final_running_average"]),
                             _fmt(row["nash_neighborhood_occupancy"]),
                             _fmt(row["residual"])])
    _manifest(out_dir, "netform", {
        "n": topology.n, "topology": args.topology, "kappa": args.kappa,
        "offset": args.offset, "epsilon": args.epsilon, "lambda": args.lam,
        "delta": args.delta, "steps": args.steps, "seed": args.seed,
        "seeds": args.seeds,
    }, started)
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plauto",
        description="Perturbed learning automata: simulation and stochastic "
                    "stability analysis on positive-utility games.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the learning dynamics on a game file")
    sim.add_argument("--game", required=True, help="game file (JSON)")
    sim.add_argument("--epsilon", type=float, required=True, help="step size")
    sim.add_argument("--lambda", dest="lam", type=float, required=True,
                     help="tremble probability")
    sim.add_argument("--steps", type=int, required=True, help="number of steps")
    sim.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    sim.add_argument("--delta", type=float, default=0.01,
                     help="occupancy neighborhood size (default 0.01)")
    sim.add_argument("--snapshot-every", type=int, default=0,
                     help="strategy snapshot interval, 0 disables (default 0)")
    sim.add_argument("--out-dir", default=".", help="output directory (default .)")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="resistance and stationary analysis")
    ana.add_argument("--game", required=True, help="game file (JSON)")
    ana.add_argument("--epsilon", type=float, required=True, help="step size")
    ana.add_argument("--delta", type=float, default=0.01,
                     help="neighborhood size for annotations and Monte Carlo "
                          "absorption (default 0.01)")
    ana.add_argument("--rho", type=float, default=1e-9,
                     help="relative tolerance of the argmin level set (default 1e-9)")
    ana.add_argument("--mc-trials", type=int, default=0,
                     help="Monte Carlo trials per state, 0 skips (default 0)")
    ana.add_argument("--mc-cap", type=int, default=10**6,
                     help="absorption step cap per trial (default 1000000)")
    ana.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    ana.add_argument("--threads", type=int, default=1,
                     help="worker cap for Monte Carlo (default 1)")
    ana.add_argument("--out-dir", default=".", help="output directory (default .)")
    ana.set_defaults(func=cmd_analyze)

    net = sub.add_parser("netform", help="network formation experiment")
    net.add_argument("--n", type=int, default=6,
                     help="ring size when no topology file is given (default 6)")
    net.add_argument("--topology", default=None, help="topology JSON file")
    net.add_argument("--kappa", type=float, default=0.5,
                     help="per-link cost (default 0.5)")
    net.add_argument("--offset", type=float, default=1.0,
                     help="uniform payoff offset restoring positivity (default 1.0)")
    net.add_argument("--epsilon", type=float, default=0.005,
                     help="step size (default 0.005)")
    net.add_argument("--lambda", dest="lam", type=float, default=0.005,
                     help="tremble probability (default 0.005)")
    net.add_argument("--steps", type=int, default=2_000_000,
                     help="number of steps (default 2000000)")
    net.add_argument("--delta", type=float, default=0.01,
                     help="occupancy neighborhood size (default 0.01)")
    net.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
    net.add_argument("--seeds", type=int, default=1,
                     help="seed sweep count; one summary row per seed (default 1)")
    net.add_argument("--out-dir", default=".", help="output directory (default .)")
    net.set_defaults(func=cmd_netform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"error (resource guard): {exc}", file=sys.stderr)
        return EXIT_GUARD
    except NumericError as exc:
        print(f"error (numeric): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
