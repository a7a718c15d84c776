"""Submodular set functions and their continuous relaxation machinery.

Set functions live on the ground set {0, ..., n-1}. Subsets are represented
as boolean membership masks of length n (``numpy`` arrays), which keeps the
greedy chains, the relaxation evaluation, and the exhaustive checkers
vectorizable. A set function F is submodular when it has diminishing
marginal returns: for A subset of B and j outside B,

    F(A + j) - F(A) >= F(B + j) - F(B).

The convex relaxation of F used throughout is its piecewise-linear extension
to [0,1]^n, the support function of the base polyhedron

    B(F) = { w : sum_{l in X} w_l <= F(X) for all X, sum_l w_l = F(V) }.

Sorting the evaluation point in descending order and emitting successive
marginal gains (the greedy chain) produces a vertex of B(F) that is also a
subgradient of the extension at that point; ``block_greedy`` computes single
components of that vertex without running the whole chain.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SetFunction",
    "ModularFunction",
    "BlockPartition",
    "as_mask",
    "as_indices",
    "descending_order",
    "partial_sort",
    "full_greedy_subgradient",
    "block_greedy",
    "lovasz_extension",
    "threshold",
    "is_submodular",
    "in_base_polyhedron",
    "brute_force_min",
    "value_table",
]

# Absolute tolerance for all set-function value comparisons in the checkers.
# Weights in the workloads come from exp/log formulas, so exact equality is
# unattainable.
CHECK_TOL = 1e-9

# Exhaustive checkers enumerate all 2^n subsets; refuse anything bigger.
MAX_EXHAUSTIVE_N = 16
MAX_BRUTE_FORCE_N = 20


def as_mask(n, subset):
    """Normalize a subset given as a bool mask or an index collection."""
    arr = np.asarray(subset)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError(f"mask has shape {arr.shape}, expected ({n},)")
        return arr
    mask = np.zeros(n, dtype=bool)
    if arr.size:
        idx = arr.astype(int).ravel()
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError("subset index out of range")
        mask[idx] = True
    return mask


def as_indices(mask):
    """Sorted element indices of a boolean membership mask."""
    return np.flatnonzero(np.asarray(mask, dtype=bool))


class SetFunction:
    """Normalized set function on the ground set {0, ..., n-1}.

    Subclasses implement ``eval`` on boolean masks. ``marginal`` defaults to
    two evaluations; implementations with local structure (graph cuts) should
    override it, which is what makes the block-greedy routine cheap.
    A SetFunction must be read-only after construction so instances can be
    shared across threads.
    """

    def __init__(self, n: int):
        n = int(n)
        if n < 1:
            raise ValueError("ground set must have at least one element")
        self.n = n

    def eval(self, mask) -> float:
        """Value F(X) for the subset given as a boolean mask."""
        raise NotImplementedError

    def marginal(self, elem: int, mask) -> float:
        """Marginal gain F(S + elem) - F(S); ``elem`` must not be in S."""
        mask = np.asarray(mask, dtype=bool)
        if mask[elem]:
            raise ValueError(f"element {elem} already in the base set")
        with_elem = mask.copy()
        with_elem[elem] = True
        return self.eval(with_elem) - self.eval(mask)

    def subgradient_fast(self, order, pos):
        """Greedy-chain vertex for a fixed ordering; hook for fast overrides.

        ``order`` sorts the evaluation point descending, ``pos`` is its
        inverse permutation. Used by simulation metrics where vectorized
        implementations may reassociate floating-point sums; the exact
        reference path is ``full_greedy_subgradient``.
        """
        return _greedy_chain(self, order)


class ModularFunction(SetFunction):
    """F(X) = sum of per-element weights over X. Modular, hence submodular."""

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        super().__init__(weights.size)
        self.weights = weights

    def eval(self, mask) -> float:
        mask = np.asarray(mask, dtype=bool)
        return float(self.weights @ mask)

    def marginal(self, elem, mask) -> float:
        mask = np.asarray(mask, dtype=bool)
        if mask[elem]:
            raise ValueError(f"element {elem} already in the base set")
        return float(self.weights[elem])

    def subgradient_fast(self, order, pos):
        return self.weights.astype(float, copy=True)


class BlockPartition:
    """Ordered partition of {0, ..., n-1} into disjoint nonempty blocks."""

    def __init__(self, blocks, n: int):
        self.n = int(n)
        self.blocks = [np.sort(np.asarray(b, dtype=int)) for b in blocks]
        if any(b.size == 0 for b in self.blocks):
            raise ValueError("blocks must be nonempty")
        flat = np.concatenate(self.blocks) if self.blocks else np.array([], int)
        if not np.array_equal(np.sort(flat), np.arange(self.n)):
            raise ValueError("blocks must partition the ground set")
        self.num_blocks = len(self.blocks)

    @classmethod
    def contiguous(cls, n: int, num_blocks: int) -> "BlockPartition":
        """n indices split into near-equal contiguous runs."""
        if not 1 <= num_blocks <= n:
            raise ValueError("need 1 <= num_blocks <= n")
        return cls(np.array_split(np.arange(n), num_blocks), n)

    @classmethod
    def singletons(cls, n: int) -> "BlockPartition":
        return cls([[i] for i in range(n)], n)

    def block_of(self, elem: int) -> int:
        for b, block in enumerate(self.blocks):
            if elem in block:
                return b
        raise ValueError(f"element {elem} out of range")

    def __len__(self):
        return self.num_blocks


def descending_order(y):
    """Indices sorting y in descending order, ties broken by ascending index.

    The single deterministic tie-break rule shared by every sorting-based
    routine here; it makes block components agree bit for bit with the full
    greedy chain.
    """
    y = np.asarray(y, dtype=float)
    return np.argsort(-y, kind="stable")


def partial_sort(y, elem: int):
    """Prefix of the descending ordering of y that ends at ``elem``.

    Returns indices m_1, ..., m_p with y_{m_1} >= ... >= y_{m_p}, m_p = elem,
    and every index outside the prefix has value <= y_elem.
    """
    y = np.asarray(y, dtype=float)
    if not 0 <= elem < y.size:
        raise ValueError(f"element {elem} out of range for n={y.size}")
    order = descending_order(y)
    cut = int(np.flatnonzero(order == elem)[0])
    return order[: cut + 1]


def _greedy_chain(F: SetFunction, order):
    """Marginal gains of F along a chain of growing prefixes of ``order``."""
    mask = np.zeros(F.n, dtype=bool)
    w = np.empty(F.n, dtype=float)
    for m in order:
        w[m] = F.marginal(int(m), mask)
        mask[m] = True
    return w


def full_greedy_subgradient(F: SetFunction, y):
    """Greedy subgradient of the relaxation of F at y.

    Sorts y descending (ascending-index tie-break) and emits the marginal
    gain of each element over the preceding prefix. The result is a vertex
    of the base polyhedron and satisfies w . y = extension value at y.
    """
    y = np.asarray(y, dtype=float)
    if y.size != F.n:
        raise ValueError(f"point has length {y.size}, expected {F.n}")
    return _greedy_chain(F, descending_order(y))


def block_greedy(F: SetFunction, y, block):
    """Selected components of the greedy subgradient of F at y.

    For each element l of ``block`` the component is the marginal gain of l
    over the prefix of the descending ordering of y that precedes l, i.e.
    exactly the l-th component of ``full_greedy_subgradient(F, y)``. The
    components are independent per element; a single shared sort is used
    because it yields bit-identical output to one partial sort per element.

    Returns gains aligned with the order of ``block``.
    """
    y = np.asarray(y, dtype=float)
    if y.size != F.n:
        raise ValueError(f"point has length {y.size}, expected {F.n}")
    block = np.asarray(block, dtype=int)
    if block.size == 0:
        raise ValueError("block must be nonempty")
    if block.min() < 0 or block.max() >= F.n:
        raise ValueError("block index out of range")

    order = descending_order(y)
    pos = np.empty(F.n, dtype=int)
    pos[order] = np.arange(F.n)

    # Sweep the ordering once, growing the prefix mask, visiting the block's
    # elements in the order they appear in the chain.
    visit = np.argsort(pos[block], kind="stable")
    mask = np.zeros(F.n, dtype=bool)
    cursor = 0
    g = np.empty(block.size, dtype=float)
    for j in visit:
        target = pos[block[j]]
        while cursor < target:
            mask[order[cursor]] = True
            cursor += 1
        g[j] = F.marginal(int(block[j]), mask)
    return g


def lovasz_extension(F: SetFunction, x) -> float:
    """Piecewise-linear extension of F evaluated at x.

    With m_1, ..., m_n sorting x descending, the extension is

        f(x) = sum_j x_{m_j} (F({m_1..m_j}) - F({m_1..m_{j-1}})),

    accumulated here in the equivalent level-set form
    sum_j F({m_1..m_j}) (x_{m_j} - x_{m_{j+1}}), which keeps f(1_X) = F(X)
    exact in floating point (a single nonzero coefficient survives). The
    two forms coincide because eval(empty) = 0 by the normalization contract.
    Evaluated through ``F.eval`` on the prefix chain, independently of any
    ``marginal`` override, so it cross-checks the greedy subgradient path.
    """
    x = np.asarray(x, dtype=float)
    if x.size != F.n:
        raise ValueError(f"point has length {x.size}, expected {F.n}")
    order = descending_order(x)
    mask = np.zeros(F.n, dtype=bool)
    total = 0.0
    for j, m in enumerate(order):
        mask[m] = True
        weight = x[m] - (x[order[j + 1]] if j + 1 < F.n else 0.0)
        if weight != 0.0:
            total += F.eval(mask) * weight
    return float(total)


def threshold(x, tau: float):
    """Round a point of [0,1]^n to the set {l : x_l > tau} (strict)."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return np.asarray(x, dtype=float) > tau


def value_table(F: SetFunction):
    """All 2^n values of F, indexed by subset bitmask (bit l = element l)."""
    n = F.n
    members = ((np.arange(2**n, dtype=np.uint32)[:, None] >> np.arange(n)) & 1).astype(bool)
    return np.array([F.eval(row) for row in members], dtype=float)


def _subset_min_transform(values, n):
    """m[B] = min over A subset of B of values[A], by per-bit sweeps."""
    m = values.copy()
    masks = np.arange(2**n, dtype=np.int64)
    for b in range(n):
        has = np.flatnonzero(masks & (1 << b))
        m[has] = np.minimum(m[has], m[has ^ (1 << b)])
    return m


def is_submodular(F: SetFunction, tol: float = CHECK_TOL) -> bool:
    """Exhaustive diminishing-returns check.

    Verifies F(A + j) - F(A) >= F(B + j) - F(B) - tol for every A subset of
    B and j outside B, via the subset-minimum transform of the per-element
    marginal tables. Exponential cost, guarded at n <= 16.
    """
    if F.n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive check limited to n <= {MAX_EXHAUSTIVE_N}, got {F.n}")
    n = F.n
    values = value_table(F)
    masks = np.arange(2**n, dtype=np.int64)
    for j in range(n):
        bit = 1 << j
        without_j = (masks & bit) == 0
        marg = values[masks | bit] - values  # meaningful where j is absent
        best = _subset_min_transform(marg, n)
        if np.any(marg[without_j] > best[without_j] + tol):
            return False
    return True


def in_base_polyhedron(F: SetFunction, w, tol: float = CHECK_TOL) -> bool:
    """Exhaustive membership test of w in the base polyhedron of F.

    Requires sum_{l in X} w_l <= F(X) + tol for every subset X, and the
    total sum to match F(V) within tol. Guarded at n <= 16.
    """
    if F.n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive check limited to n <= {MAX_EXHAUSTIVE_N}, got {F.n}")
    w = np.asarray(w, dtype=float)
    if w.size != F.n:
        raise ValueError(f"point has length {w.size}, expected {F.n}")
    n = F.n
    values = value_table(F)
    sums = np.zeros(2**n)
    masks = np.arange(2**n, dtype=np.int64)
    for b in range(n):
        sums[(masks & (1 << b)) != 0] += w[b]
    if abs(sums[-1] - values[-1]) > tol:
        return False
    return bool(np.all(sums <= values + tol))


def brute_force_min(F: SetFunction):
    """Exhaustive minimizer of F; deterministic oracle for small instances.

    Ties on the exact minimum value are broken by smallest cardinality, then
    by lexicographically smallest membership indicator. Returns (mask, value).
    """
    if F.n > MAX_BRUTE_FORCE_N:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_FORCE_N}, got {F.n}")
    n = F.n
    values = value_table(F)
    best = values.min()
    candidates = np.flatnonzero(values == best)
    sizes = np.array([bin(int(m)).count("1") for m in candidates])
    # Indicator lex order: element 0 is the most significant digit.
    lex = np.array(
        [int(format(int(m), f"0{n}b")[::-1], 2) for m in candidates], dtype=np.int64
    )
    pick = candidates[np.lexsort((lex, sizes))[0]]
    mask = np.array([(int(pick) >> l) & 1 for l in range(n)], dtype=bool)
    return mask, float(best)
