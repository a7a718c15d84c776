"""Experiment configuration: TOML parsing and pipeline assembly.

A config file has four sections. Unknown keys are rejected so typos fail
loudly. All defaults live here; docs/config.md documents every key.

    [workload]   what to minimize (segmentation image or synthetic cuts)
    [graph]      communication topology and weight construction
    [algorithm]  blocks, rounds, threshold, stepsizes
    [run]        seed, metric cadence, snapshots, oracle toggle, threads
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

import numpy as np

from . import segmentation as seg
from . import synthetic
from .engine import RunConfig, StepsizeSchedule
from .submodular import BlockPartition
from .topology import (
    Digraph,
    erdos_renyi_strongly_connected,
    load_edge_list,
    metropolis_weights,
    sinkhorn_weights,
    symmetrize,
)

__all__ = ["ExperimentConfig", "load_config", "build_graph", "build_workload", "make_run_config"]


@dataclass
class WorkloadSection:
    kind: str = "segmentation"  # "segmentation" | "synthetic-cut"
    image: str | None = None
    fixture_size: int = 64
    fixture_radius: float = 0.3
    noise_amplitude: float = 0.05
    sigma: float = 0.1
    lam: float = 1.0
    mu_fg: float = 0.8
    mu_bg: float = 0.2
    spread: float = 0.2
    prob_floor: float = 1e-6
    layout: tuple = (2, 4)
    overlap: int = 0
    connectivity: int = 4
    ground_size: int = 8
    edge_prob: float = 0.35
    margin: float = 1.0
    edge_scale: float = 0.2


@dataclass
class GraphSection:
    agents: int = 8
    kind: str = "erdos-renyi"  # "erdos-renyi" | "file"
    edge_prob: float = 0.3
    file: str | None = None
    weights: str = "metropolis"  # "metropolis" | "sinkhorn"
    retry_cap: int = 1000


@dataclass
class AlgorithmSection:
    blocks: int = 40
    rounds: int = 1000
    tau: float = 0.5
    stepsize: str = "auto"  # "auto" | "diminishing" | "constant"
    c: float = 1.0
    gamma: float = 1.0
    p_min: float = 1e-3
    update_from_average: bool = True


@dataclass
class RunSection:
    seed: int = 0
    record_every: int = 10
    snapshots: tuple = ()
    oracle: bool = False
    threads: int = 1


@dataclass
class ExperimentConfig:
    workload: WorkloadSection = field(default_factory=WorkloadSection)
    graph: GraphSection = field(default_factory=GraphSection)
    algorithm: AlgorithmSection = field(default_factory=AlgorithmSection)
    run: RunSection = field(default_factory=RunSection)
    base_dir: str = "."


_KEY_ALIASES = {"lambda": "lam"}


def _fill(section_cls, raw, where):
    kwargs = {}
    fields = {f for f in section_cls.__dataclass_fields__}
    for key, value in raw.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in fields:
            raise ValueError(f"unknown key {key!r} in [{where}]")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    return section_cls(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {"workload", "graph", "algorithm", "run"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    return ExperimentConfig(
        workload=_fill(WorkloadSection, raw.get("workload", {}), "workload"),
        graph=_fill(GraphSection, raw.get("graph", {}), "graph"),
        algorithm=_fill(AlgorithmSection, raw.get("algorithm", {}), "algorithm"),
        run=_fill(RunSection, raw.get("run", {}), "run"),
        base_dir=os.path.dirname(os.path.abspath(path)),
    )


def _derived_seed(seed, salt):
    return int(np.random.SeedSequence([int(seed), salt]).generate_state(1)[0])


def build_graph(cfg: ExperimentConfig):
    """The communication graph and weight matrix the engine will use.

    With Metropolis weights the raw digraph is first symmetrized (the
    reverse of every edge is added), which guarantees a valid doubly
    stochastic matrix; the balancing mode keeps the digraph as drawn.
    """
    g = cfg.graph
    if g.kind == "erdos-renyi":
        digraph = erdos_renyi_strongly_connected(
            g.agents, g.edge_prob, _derived_seed(cfg.run.seed, 101), g.retry_cap
        )
    elif g.kind == "file":
        if g.file is None:
            raise ValueError("[graph] kind='file' requires a 'file' key")
        path = os.path.join(cfg.base_dir, g.file)
        if not os.path.exists(path):
            raise FileNotFoundError(f"graph file not found: {path}")
        digraph = load_edge_list(path)
        if digraph.n_agents != g.agents:
            raise ValueError(
                f"graph file has {digraph.n_agents} agents, config says {g.agents}"
            )
    else:
        raise ValueError(f"unknown graph kind {g.kind!r}")

    if g.weights == "metropolis":
        digraph = symmetrize(digraph)
        weights = metropolis_weights(digraph)
    elif g.weights == "sinkhorn":
        weights = sinkhorn_weights(digraph)
    else:
        raise ValueError(f"unknown weight construction {g.weights!r}")
    return digraph, weights


def build_workload(cfg: ExperimentConfig):
    """Per-agent cut instances and set functions for the configured workload.

    Returns (instances, functions, image_side) where image_side is the
    image dimension for segmentation workloads and None otherwise.
    """
    w = cfg.workload
    seed = _derived_seed(cfg.run.seed, 202)
    if w.kind == "segmentation":
        if w.image is not None:
            path = os.path.join(cfg.base_dir, w.image)
            if not os.path.exists(path):
                raise FileNotFoundError(f"image file not found: {path}")
            image = seg.load_pgm(path)
            if image.shape[0] != image.shape[1]:
                raise ValueError(f"segmentation expects a square image, got {image.shape}")
        else:
            image = seg.disk_image(w.fixture_size, w.fixture_radius)
        model = seg.ProbabilityModel(w.mu_fg, w.mu_bg, w.spread, w.prob_floor)
        instances, functions = seg.build_segmentation_workload(
            image,
            cfg.graph.agents,
            w.layout,
            overlap=w.overlap,
            sigma=w.sigma,
            lam=w.lam,
            model=model,
            noise_amplitude=w.noise_amplitude,
            seed=seed,
            connectivity=w.connectivity,
        )
        return instances, functions, image.shape[0]
    if w.kind == "synthetic-cut":
        instances, functions, _ = synthetic.planted_cut_workload(
            w.ground_size,
            cfg.graph.agents,
            seed,
            margin=w.margin,
            edge_scale=w.edge_scale,
            edge_prob=w.edge_prob,
        )
        return instances, functions, None
    raise ValueError(f"unknown workload kind {w.kind!r}")


def make_schedules(cfg: ExperimentConfig):
    a = cfg.algorithm
    if a.stepsize == "auto":
        return None
    if a.stepsize in ("diminishing", "constant"):
        return [StepsizeSchedule(a.stepsize, a.c, a.gamma)]
    raise ValueError(f"unknown stepsize kind {a.stepsize!r}")


def make_run_config(cfg: ExperimentConfig, functions, digraph: Digraph, weights) -> RunConfig:
    n = functions[0].n
    a = cfg.algorithm
    if not 1 <= a.blocks <= n:
        raise ValueError(f"block count {a.blocks} incompatible with ground set {n}")
    return RunConfig(
        functions=functions,
        graph=digraph,
        weights=weights,
        partition=BlockPartition.contiguous(n, a.blocks),
        num_rounds=a.rounds,
        tau=a.tau,
        seed=cfg.run.seed,
        schedules=make_schedules(cfg),
        block_probs=None,
        p_min=a.p_min,
        record_every=cfg.run.record_every,
        snapshot_rounds=tuple(cfg.run.snapshots),
        update_from_average=a.update_from_average,
        threads=cfg.run.threads,
    )
