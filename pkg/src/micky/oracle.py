"""Max-flow min-cut reference solver for aggregated segmentation instances.

The agents' cut instances sum to one global s-t network: source arcs carry
the summed foreground penalties, sink arcs the background penalties, and
each undirected pixel pair carries the summed discontinuity weight in both
directions. The minimum cut of that network equals the global set-function
minimum plus the total source normalization, which makes the flow solver an
independent check on anything the distributed algorithm produces.

The solver runs BFS-shortest augmenting paths (level graph plus blocking
augmentations) with adjacency sorted by node index, so results are
deterministic. Capacities are reals; residuals at or below 1e-12 count as
saturated.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .segmentation import CutInstance
from .submodular import as_mask

__all__ = ["FlowNetwork", "build_flow_network", "max_flow_min_cut", "cut_value"]

RESIDUAL_FLOOR = 1e-12


class FlowNetwork:
    """s-t network over pixel nodes 0..n-1, with s = n and t = n + 1."""

    def __init__(self, n, source_cap, sink_cap, pair_p, pair_q, pair_cap):
        self.n = int(n)
        self.source_cap = np.asarray(source_cap, dtype=float)
        self.sink_cap = np.asarray(sink_cap, dtype=float)
        self.pair_p = np.asarray(pair_p, dtype=int)
        self.pair_q = np.asarray(pair_q, dtype=int)
        self.pair_cap = np.asarray(pair_cap, dtype=float)
        if self.source_cap.shape != (self.n,) or self.sink_cap.shape != (self.n,):
            raise ValueError("terminal capacity vectors must have length n")
        caps = [self.source_cap, self.sink_cap, self.pair_cap]
        if any(np.any(c < 0) or not np.all(np.isfinite(c)) for c in caps):
            raise ValueError("capacities must be finite and nonnegative")
        self.s = self.n
        self.t = self.n + 1

    def arcs(self):
        """Paired residual arcs plus per-node adjacency sorted by target."""
        num_nodes = self.n + 2
        to: list[int] = []
        cap: list[float] = []
        adj: list[list[int]] = [[] for _ in range(num_nodes)]

        def add(u, v, c_uv, c_vu):
            adj[u].append(len(to))
            to.append(v)
            cap.append(c_uv)
            adj[v].append(len(to))
            to.append(u)
            cap.append(c_vu)

        for p in np.flatnonzero(self.source_cap > 0):
            add(self.s, int(p), float(self.source_cap[p]), 0.0)
        for p in np.flatnonzero(self.sink_cap > 0):
            add(int(p), self.t, float(self.sink_cap[p]), 0.0)
        order = np.lexsort((self.pair_q, self.pair_p))
        for e in order:
            if self.pair_cap[e] > 0:
                # Undirected pair: full capacity in both directions.
                add(
                    int(self.pair_p[e]),
                    int(self.pair_q[e]),
                    float(self.pair_cap[e]),
                    float(self.pair_cap[e]),
                )
        for lst in adj:
            lst.sort(key=lambda a: (to[a], a))
        return to, cap, adj


def build_flow_network(instances) -> FlowNetwork:
    """Aggregate all agents' cut instances into one global network."""
    if not instances:
        raise ValueError("need at least one cut instance")
    n = instances[0].n
    if any(inst.n != n for inst in instances):
        raise ValueError("cut instances disagree on the ground set size")
    source_cap = np.zeros(n)
    sink_cap = np.zeros(n)
    pair_caps: dict[tuple[int, int], float] = {}
    for inst in instances:
        source_cap += inst.a_s
        sink_cap += inst.a_t
        for p, q, w in zip(inst.edges_p, inst.edges_q, inst.edge_w):
            key = (int(min(p, q)), int(max(p, q)))
            pair_caps[key] = pair_caps.get(key, 0.0) + float(w)
    pairs = sorted(pair_caps)
    pair_p = np.array([p for p, _ in pairs], dtype=int)
    pair_q = np.array([q for _, q in pairs], dtype=int)
    pair_cap = np.array([pair_caps[k] for k in pairs])
    return FlowNetwork(n, source_cap, sink_cap, pair_p, pair_q, pair_cap)


def _levels(num_nodes, to, cap, adj, s, t):
    level = [-1] * num_nodes
    level[s] = 0
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for a in adj[u]:
            v = to[a]
            if level[v] < 0 and cap[a] > RESIDUAL_FLOOR:
                level[v] = level[u] + 1
                queue.append(v)
    return level


def max_flow_min_cut(net: FlowNetwork):
    """Minimum s-t cut of the network: (source-side pixel mask, cut value).

    Phases of BFS level graphs with lowest-index-first augmentation; the
    returned set is the pixels reachable from s in the final residual graph,
    and the value is the max-flow value (equal by duality).
    """
    num_nodes = net.n + 2
    to, cap, adj = net.arcs()
    s, t = net.s, net.t
    flow = 0.0
    while True:
        level = _levels(num_nodes, to, cap, adj, s, t)
        if level[t] < 0:
            break
        ptr = [0] * num_nodes
        while True:
            pushed = _augment(to, cap, adj, level, ptr, s, t)
            if pushed <= 0.0:
                break
            flow += pushed
    level = _levels(num_nodes, to, cap, adj, s, t)
    reachable = np.array([lv >= 0 for lv in level[: net.n]], dtype=bool)
    return reachable, float(flow)


def _augment(to, cap, adj, level, ptr, s, t):
    """One shortest augmenting path via the current level graph, or 0.

    ``ptr`` holds per-node progress through the (index-sorted) adjacency so
    exhausted arcs are never rescanned within a phase.
    """
    path = []
    stack = [s]
    while stack:
        u = stack[-1]
        if u == t:
            bottleneck = min(cap[a] for a in path)
            for a in path:
                cap[a] -= bottleneck
                cap[a ^ 1] += bottleneck
            return bottleneck
        advanced = False
        while ptr[u] < len(adj[u]):
            a = adj[u][ptr[u]]
            v = to[a]
            if cap[a] > RESIDUAL_FLOOR and level[v] == level[u] + 1:
                stack.append(v)
                path.append(a)
                advanced = True
                break
            ptr[u] += 1
        if not advanced:
            level[u] = -1  # dead end in this phase
            stack.pop()
            if path:
                path.pop()
    return 0.0


def cut_value(net: FlowNetwork, subset) -> float:
    """Capacity crossing from {s} + subset to the rest; direct evaluation."""
    mask = as_mask(net.n, subset)
    value = float(net.source_cap[~mask].sum() + net.sink_cap[mask].sum())
    if net.pair_cap.size:
        crossing = mask[net.pair_p] ^ mask[net.pair_q]
        value += float(net.pair_cap[crossing].sum())
    return value
