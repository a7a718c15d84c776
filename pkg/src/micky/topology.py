"""Communication graphs and doubly stochastic weight matrices.

Agents exchange estimates over a directed graph; an edge (j, i) means agent j
sends to agent i. Every agent is implicitly a member of its own in- and
out-neighborhood, so self-loops are never stored. The averaging step of the
distributed algorithm needs a weight matrix W whose positive entries follow
the reception pattern, with all row and column sums equal to one; two
constructions are provided (Metropolis weights for symmetric graphs,
iterative row/column balancing for general strongly connected ones) plus an
independent checker.
"""

from __future__ import annotations

from collections import deque

import numpy as np

__all__ = [
    "Digraph",
    "is_strongly_connected",
    "erdos_renyi_strongly_connected",
    "symmetrize",
    "metropolis_weights",
    "sinkhorn_weights",
    "check_doubly_stochastic",
    "doubly_stochastic_violations",
    "save_edge_list",
    "load_edge_list",
    "save_weight_csv",
    "load_weight_csv",
]


class Digraph:
    """Directed communication graph on agents {0, ..., N-1}.

    Edges are ordered pairs (j, i) meaning "j sends to i". Self-loops are
    implicit and stripped on construction.
    """

    def __init__(self, n_agents: int, edges):
        n_agents = int(n_agents)
        if n_agents < 1:
            raise ValueError("need at least one agent")
        self.n_agents = n_agents
        cleaned = set()
        for j, i in edges:
            j, i = int(j), int(i)
            if not (0 <= j < n_agents and 0 <= i < n_agents):
                raise ValueError(f"edge ({j}, {i}) out of range for N={n_agents}")
            if j != i:
                cleaned.add((j, i))
        self.edges = frozenset(cleaned)
        self._in = [[] for _ in range(n_agents)]
        self._out = [[] for _ in range(n_agents)]
        for j, i in sorted(self.edges):
            self._in[i].append(j)
            self._out[j].append(i)

    def in_neighbors(self, i: int):
        """Senders to agent i, including i itself."""
        return sorted(set(self._in[i]) | {i})

    def out_neighbors(self, j: int):
        """Receivers of agent j, including j itself."""
        return sorted(set(self._out[j]) | {j})

    def reception_pattern(self):
        """Bool matrix P with P[i, j] true iff j is an in-neighbor of i."""
        p = np.eye(self.n_agents, dtype=bool)
        for j, i in self.edges:
            p[i, j] = True
        return p

    def is_symmetric(self) -> bool:
        return all((i, j) in self.edges for j, i in self.edges)

    def __eq__(self, other):
        return (
            isinstance(other, Digraph)
            and self.n_agents == other.n_agents
            and self.edges == other.edges
        )

    def __repr__(self):
        return f"Digraph(n_agents={self.n_agents}, edges={len(self.edges)})"


def _reachable(n, adjacency, start):
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def is_strongly_connected(g: Digraph) -> bool:
    """True iff every agent reaches every other along directed edges."""
    if g.n_agents == 1:
        return True
    fwd = [[] for _ in range(g.n_agents)]
    bwd = [[] for _ in range(g.n_agents)]
    for j, i in g.edges:
        fwd[j].append(i)
        bwd[i].append(j)
    return bool(_reachable(g.n_agents, fwd, 0).all() and _reachable(g.n_agents, bwd, 0).all())


def erdos_renyi_strongly_connected(
    n_agents: int, p: float, seed, max_tries: int = 1000
) -> Digraph:
    """Random digraph with i.i.d. edges, resampled until strongly connected.

    Each ordered pair (j, i), j != i, is an edge with probability p. Draws
    are deterministic in (n_agents, p, seed); every retry uses a fresh
    stream derived from the seed and the attempt number.
    """
    if n_agents < 2:
        raise ValueError("need at least two agents")
    if not 0.0 < p <= 1.0:
        raise ValueError("edge probability must lie in (0, 1]")
    for attempt in range(max_tries):
        rng = np.random.default_rng([seed, attempt])
        coins = rng.random((n_agents, n_agents)) < p
        np.fill_diagonal(coins, False)
        g = Digraph(n_agents, zip(*np.nonzero(coins)))
        if is_strongly_connected(g):
            return g
    raise RuntimeError(
        f"no strongly connected digraph found in {max_tries} tries "
        f"(N={n_agents}, p={p}); raise the retry cap or the edge probability"
    )


def symmetrize(g: Digraph) -> Digraph:
    """Add the reverse of every edge, making the graph bidirectional."""
    return Digraph(g.n_agents, set(g.edges) | {(i, j) for j, i in g.edges})


def metropolis_weights(g: Digraph) -> np.ndarray:
    """Metropolis weight matrix for a symmetric graph.

    w_ij = 1 / (1 + max(d_i, d_j)) for neighbors j != i, with the diagonal
    absorbing the remainder. Symmetric, hence doubly stochastic, and every
    positive entry is at least 1 / (1 + max degree + 1).
    """
    if not g.is_symmetric():
        raise ValueError("Metropolis weights require a symmetric edge set")
    n = g.n_agents
    deg = np.zeros(n, dtype=int)
    for j, i in g.edges:
        deg[i] += 1
    w = np.zeros((n, n))
    for j, i in g.edges:
        w[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


def sinkhorn_weights(
    g: Digraph, tol: float = 1e-9, max_iters: int = 10_000
) -> np.ndarray:
    """Doubly stochastic weights on a directed graph by iterative balancing.

    Starts from the 0/1 reception pattern plus the identity and alternates
    row and column normalization. The zero pattern is preserved. Patterns
    without doubly stochastic support cannot converge; callers may fall back
    to symmetrizing the graph.
    """
    if not is_strongly_connected(g) and g.edges:
        raise ValueError("balancing expects a strongly connected digraph")
    w = g.reception_pattern().astype(float)
    for _ in range(max_iters):
        w /= w.sum(axis=1, keepdims=True)
        w /= w.sum(axis=0, keepdims=True)
        row_err = np.abs(w.sum(axis=1) - 1.0).max()
        col_err = np.abs(w.sum(axis=0) - 1.0).max()
        if max(row_err, col_err) <= tol:
            return w
    raise RuntimeError(
        f"row/column balancing did not converge in {max_iters} iterations; "
        "the sparsity pattern may lack doubly stochastic support "
        "(consider symmetrizing the graph)"
    )


def doubly_stochastic_violations(w, g: Digraph, eta: float, tol: float = 1e-9):
    """All the ways w fails to be a valid averaging matrix for g.

    Checks: nonnegativity, positivity exactly on the reception pattern,
    every positive entry (diagonal included) at least eta, and unit row and
    column sums within tol. Returns a list of human-readable violations;
    empty means the matrix passes.
    """
    w = np.asarray(w, dtype=float)
    n = g.n_agents
    problems = []
    if w.shape != (n, n):
        return [f"weight matrix has shape {w.shape}, expected ({n}, {n})"]
    if np.any(w < 0):
        problems.append("negative entries present")
    pattern = g.reception_pattern()
    off = ~np.eye(n, dtype=bool)
    missing = off & pattern & (w <= 0)
    spurious = off & ~pattern & (w > 0)
    for i, j in zip(*np.nonzero(missing)):
        problems.append(f"w[{i},{j}] is zero but {j} is an in-neighbor of {i}")
    for i, j in zip(*np.nonzero(spurious)):
        problems.append(f"w[{i},{j}] is positive but ({j},{i}) is not an edge")
    if eta <= 0:
        problems.append("eta must be positive")
    else:
        low_diag = np.flatnonzero(np.diag(w) < eta)
        for i in low_diag:
            problems.append(f"diagonal w[{i},{i}]={w[i, i]:.3g} below eta={eta:.3g}")
        small = off & (w > 0) & (w < eta)
        for i, j in zip(*np.nonzero(small)):
            problems.append(f"positive w[{i},{j}]={w[i, j]:.3g} below eta={eta:.3g}")
    bad_rows = np.flatnonzero(np.abs(w.sum(axis=1) - 1.0) > tol)
    for i in bad_rows:
        problems.append(f"row {i} sums to {w[i].sum():.12g}, expected 1")
    bad_cols = np.flatnonzero(np.abs(w.sum(axis=0) - 1.0) > tol)
    for j in bad_cols:
        problems.append(f"column {j} sums to {w[:, j].sum():.12g}, expected 1")
    return problems


def check_doubly_stochastic(w, g: Digraph, eta: float, tol: float = 1e-9) -> bool:
    return not doubly_stochastic_violations(w, g, eta, tol)


def min_positive_entry(w) -> float:
    """Smallest positive weight; the eta actually achieved by a matrix."""
    w = np.asarray(w, dtype=float)
    positive = w[w > 0]
    return float(positive.min()) if positive.size else 0.0


def save_edge_list(g: Digraph, path):
    """Text format: first line N, then one 'j i' pair per line (0-based)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n_agents}\n")
        for j, i in sorted(g.edges):
            fh.write(f"{j} {i}\n")


def load_edge_list(path) -> Digraph:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"empty edge-list file: {path}")
    n = int(lines[0])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"malformed edge line {ln!r} in {path}")
        edges.append((int(parts[0]), int(parts[1])))
    return Digraph(n, edges)


def save_weight_csv(w, path):
    np.savetxt(path, np.asarray(w, dtype=float), delimiter=",", fmt="%.17g")


def load_weight_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))
