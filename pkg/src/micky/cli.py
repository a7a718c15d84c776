"""Command-line experiment runner.

Subcommands:
    run       execute the distributed minimizer, write trace.csv, PGM
              snapshots/solutions, and summary.txt
    oracle    solve the aggregated workload exactly by max-flow
    validate  check a config against every assumption the algorithm needs
    fixture   emit the synthetic disk image (and its ground-truth mask)

Shared flags: --config, --seed (overrides the config), --out, --threads.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from . import oracle as oraclemod
from . import segmentation as seg
from .engine import StepsizeSchedule, run as engine_run
from .topology import (
    doubly_stochastic_violations,
    is_strongly_connected,
    min_positive_entry,
    save_edge_list,
    save_weight_csv,
)


def _load(args):
    cfg = cfgmod.load_config(args.config)
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.threads is not None:
        cfg.run.threads = args.threads
    return cfg


def _write_trace_csv(path, trace):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("round,agent,consensus_err,f_value,f_best,block_selected\n")
        for r, k in enumerate(trace.rounds):
            for i in range(trace.consensus_err.shape[1]):
                fh.write(
                    f"{k},{i},{trace.consensus_err[r, i]:.17g},"
                    f"{trace.f_value[r, i]:.17g},{trace.f_best[r, i]:.17g},"
                    f"{trace.block_selected[r, i]}\n"
                )


def _write_cost_error_csv(path, trace, optimal):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("round,agent,set_cost,cost_error\n")
        for r, k in enumerate(trace.rounds):
            for i in range(trace.set_cost.shape[1]):
                err = trace.set_cost[r, i] - optimal
                fh.write(f"{k},{i},{trace.set_cost[r, i]:.17g},{err:.17g}\n")


def cmd_run(args) -> int:
    cfg = _load(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    digraph, weights = cfgmod.build_graph(cfg)
    instances, functions, image_side = cfgmod.build_workload(cfg)
    run_config = cfgmod.make_run_config(cfg, functions, digraph, weights)

    save_edge_list(digraph, os.path.join(out, "topology.txt"))
    save_weight_csv(weights, os.path.join(out, "weights.csv"))

    trace = engine_run(run_config)
    _write_trace_csv(os.path.join(out, "trace.csv"), trace)

    if image_side is not None:
        d = image_side
        for k, snap in sorted(trace.snapshots.items()):
            for i in range(snap.shape[0]):
                seg.save_pgm(
                    snap[i].reshape(d, d),
                    os.path.join(out, f"snapshot_agent_{i}_round_{k}.pgm"),
                )
        # With the standard terminal-weight formulas the minimizing set
        # collects the background pixels, so the segmented object is its
        # complement; both renderings are written.
        for i, final in enumerate(trace.final_sets):
            seg.save_pgm(
                seg.mask_from_set(final, d),
                os.path.join(out, f"solution_agent_{i}.pgm"),
            )
            seg.save_pgm(
                seg.mask_from_set(~final, d),
                os.path.join(out, f"object_agent_{i}.pgm"),
            )

    optimal = None
    if cfg.run.oracle:
        net = oraclemod.build_flow_network(instances)
        mask, flow_value = oraclemod.max_flow_min_cut(net)
        normalization = sum(inst.normalization for inst in instances)
        optimal = flow_value - normalization

    final_costs = trace.set_cost[-1]
    lines = ["final thresholded set cost per agent:"]
    lines += [f"  agent {i}: {c:.12g}" for i, c in enumerate(final_costs)]
    if optimal is not None:
        lines.append(f"oracle optimal cost: {optimal:.12g}")
        lines.append("cost error per agent (final round):")
        lines += [
            f"  agent {i}: {c - optimal:.12g}" for i, c in enumerate(final_costs)
        ]
        _write_cost_error_csv(os.path.join(out, "cost_error.csv"), trace, optimal)
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"run complete: {len(trace.rounds)} recorded rounds, artifacts in {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _load(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    instances, _, image_side = cfgmod.build_workload(cfg)
    net = oraclemod.build_flow_network(instances)
    mask, flow_value = oraclemod.max_flow_min_cut(net)
    normalization = sum(inst.normalization for inst in instances)
    optimal = flow_value - normalization
    with open(os.path.join(out, "oracle_value.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"min_cut_value {flow_value:.17g}\n")
        fh.write(f"normalization {normalization:.17g}\n")
        fh.write(f"optimal_set_cost {optimal:.17g}\n")
        fh.write(f"set_size {int(mask.sum())}\n")
    if image_side is not None:
        # The min-cut source side is the background; oracle_mask.pgm shows
        # the segmented object (its complement), oracle_set.pgm the raw set.
        seg.save_pgm(
            seg.mask_from_set(~mask, image_side),
            os.path.join(out, "oracle_mask.pgm"),
        )
        seg.save_pgm(
            seg.mask_from_set(mask, image_side),
            os.path.join(out, "oracle_set.pgm"),
        )
    print(f"oracle min cut {flow_value:.12g} (set cost {optimal:.12g}), artifacts in {out}")
    return 0


def cmd_validate(args) -> int:
    failures = []
    checks = []

    def check(ok, label):
        checks.append((ok, label))
        if not ok:
            failures.append(label)

    try:
        cfg = _load(args)
    except Exception as exc:
        print(f"FAIL config: {exc}")
        return 1

    try:
        digraph, weights = cfgmod.build_graph(cfg)
    except Exception as exc:
        print(f"FAIL graph construction: {exc}")
        return 1

    check(is_strongly_connected(digraph), "communication graph strongly connected")

    eta = min_positive_entry(weights)
    problems = doubly_stochastic_violations(weights, digraph, eta if eta > 0 else 1.0)
    check(not problems, "weight matrix doubly stochastic on the graph pattern")
    for p in problems:
        print(f"       - {p}")

    a = cfg.algorithm
    if a.stepsize == "auto":
        check(True, "stepsize: auto (diminishing 1/(k+1), locally scaled)")
    else:
        try:
            StepsizeSchedule(a.stepsize, a.c, a.gamma)
            label = f"stepsize: {a.stepsize} valid"
            if a.stepsize == "constant":
                label += " (note: constant stepsizes reach only a neighborhood of the optimum)"
            check(True, label)
        except ValueError as exc:
            check(False, f"stepsize: {exc}")

    check(0.0 <= a.tau <= 1.0, f"threshold tau={a.tau} in [0, 1]")
    check(a.rounds >= 0, "round budget nonnegative")

    try:
        _, functions, _ = cfgmod.build_workload(cfg)
        n = functions[0].n
        check(1 <= a.blocks <= n, f"block count {a.blocks} fits ground set of size {n}")
        uniform = 1.0 / a.blocks
        check(
            uniform >= a.p_min,
            f"uniform block probability {uniform:.3g} at or above floor {a.p_min:.3g}",
        )
    except Exception as exc:
        check(False, f"workload construction: {exc}")

    for ok, label in checks:
        print(("PASS " if ok else "FAIL ") + label)
    if failures:
        print(f"{len(failures)} check(s) failed")
        return 1
    print("all checks passed")
    return 0


def cmd_fixture(args) -> int:
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.ExperimentConfig()
    out = args.out
    os.makedirs(out, exist_ok=True)
    d = cfg.workload.fixture_size
    radius = cfg.workload.fixture_radius
    seg.save_pgm(seg.disk_image(d, radius), os.path.join(out, "fixture_disk.pgm"))
    seg.save_pgm(
        seg.mask_from_set(seg.disk_mask(d, radius), d),
        os.path.join(out, "fixture_truth.pgm"),
    )
    print(f"wrote {d}x{d} disk fixture to {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="micky",
        description="Distributed block-wise submodular minimization simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("run", cmd_run, True),
        ("oracle", cmd_oracle, True),
        ("validate", cmd_validate, True),
        ("fixture", cmd_fixture, False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config, help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads per round")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
