"""Random graph-cut workloads for experiments and verification.

Instances are built on a shared random undirected support graph; each agent
draws its own nonnegative pairwise and terminal weights, so the agents'
functions differ while their sum stays a plain weighted cut problem with a
known exhaustive optimum at desk scale.

Two flavors: fully random weights (for property tests over arbitrary cut
functions) and planted-set instances whose terminal weights carry a clear
per-element margin toward a hidden target subset, mirroring how real
segmentation energies look; the planted family is what the distributed
algorithm is expected to actually solve.
"""

from __future__ import annotations

import numpy as np

from .segmentation import CutInstance, CutSetFunction, local_cut_function

__all__ = [
    "random_cut_instance",
    "random_cut_function",
    "random_cut_workload",
    "planted_cut_workload",
]


def _random_support(n, rng, edge_prob):
    """Undirected edge support: a ring (keeps things coupled) plus chords."""
    ps = list(range(n - 1)) + ([n - 1] if n > 2 else [])
    qs = list(range(1, n)) + ([0] if n > 2 else [])
    pairs = set(zip(ps, qs))
    extra = rng.random((n, n)) < edge_prob
    for p in range(n):
        for q in range(p + 1, n):
            if extra[p, q]:
                pairs.add((p, q))
    pairs = sorted(pairs)
    return np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])


def random_cut_instance(n, rng, edge_prob: float = 0.35, unary_scale: float = 1.0):
    """One random cut instance with every element visible."""
    edges_p, edges_q = _random_support(n, rng, edge_prob)
    edge_w = rng.uniform(0.05, 1.0, size=edges_p.size)
    a_s = rng.uniform(0.0, unary_scale, size=n)
    a_t = rng.uniform(0.0, unary_scale, size=n)
    return CutInstance(
        n=n,
        visible=np.ones(n, dtype=bool),
        edges_p=edges_p,
        edges_q=edges_q,
        edge_w=edge_w,
        a_s=a_s,
        a_t=a_t,
    )


def random_cut_function(n, rng, edge_prob: float = 0.35) -> CutSetFunction:
    return local_cut_function(random_cut_instance(n, rng, edge_prob))


def random_cut_workload(n, n_agents, seed, edge_prob: float = 0.35, unary_scale: float = 1.0):
    """Per-agent random cut instances on a shared support graph.

    Returns (instances, functions); all agents share the edge support but
    draw independent weights from per-agent streams.
    """
    support_rng = np.random.default_rng([seed, 0])
    edges_p, edges_q = _random_support(n, support_rng, edge_prob)
    instances = []
    for i in range(n_agents):
        rng = np.random.default_rng([seed, i + 1])
        instances.append(
            CutInstance(
                n=n,
                visible=np.ones(n, dtype=bool),
                edges_p=edges_p,
                edges_q=edges_q,
                edge_w=rng.uniform(0.05, 1.0, size=edges_p.size),
                a_s=rng.uniform(0.0, unary_scale, size=n),
                a_t=rng.uniform(0.0, unary_scale, size=n),
            )
        )
    return instances, [local_cut_function(inst) for inst in instances]


def planted_cut_workload(
    n,
    n_agents,
    seed,
    margin: float = 1.0,
    edge_scale: float = 0.2,
    edge_prob: float = 0.35,
):
    """Cut instances with a hidden target subset and per-element margins.

    A target set is drawn once; every agent then sees noisy terminal weights
    favoring the target (elements inside it are cheap to assign to the
    object, expensive to leave out, and vice versa), plus mild pairwise
    smoothing. With the default margins the exhaustive minimizer is the
    target itself in the overwhelming majority of draws, which makes the
    family a calibrated end-to-end benchmark.

    Returns (instances, functions, target_mask).
    """
    support_rng = np.random.default_rng([seed, 0])
    edges_p, edges_q = _random_support(n, support_rng, edge_prob)
    target = support_rng.random(n) < 0.5
    instances = []
    for i in range(n_agents):
        rng = np.random.default_rng([seed, i + 1])
        strong = margin * rng.uniform(0.8, 1.2, size=n)
        weak = margin * rng.uniform(0.1, 0.3, size=n)
        instances.append(
            CutInstance(
                n=n,
                visible=np.ones(n, dtype=bool),
                edges_p=edges_p,
                edges_q=edges_q,
                edge_w=edge_scale * rng.uniform(0.2, 1.0, size=edges_p.size),
                a_s=np.where(target, strong, weak),
                a_t=np.where(target, weak, strong),
            )
        )
    return instances, [local_cut_function(inst) for inst in instances], target
