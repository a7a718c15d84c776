"""Binary image segmentation as a sum of private graph-cut functions.

A D x D grayscale image is segmented by cutting an s-t graph over its
pixels: terminal weights encode per-pixel foreground/background penalties,
lattice weights penalize intensity discontinuities between neighbors. Each
agent sees only a tile of the image, computes weights from its own (noisy)
local intensities, and wraps them in a private cut function

    F_i(X) = sum_{p in X, q not in X} a^i_pq
           + sum_{q not in X} a^i_sq + sum_{p in X} a^i_pt
           - sum_q a^i_sq

whose normalization term makes F_i(empty) = 0. Cut functions are submodular,
so the sum over agents is a valid instance for the distributed minimizer.

Orientation note: a_{s,p} is paid exactly for the pixels left out of X and
a_{p,t} for the pixels inside it, so with a_{s,p} = -lam log P(foreground)
the minimizing set collects the background-looking pixels; the segmented
object is the complement of the solution set.

Pixels are indexed row-major: p = row * D + col, zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .submodular import SetFunction, as_mask

__all__ = [
    "load_pgm",
    "save_pgm",
    "disk_image",
    "disk_mask",
    "add_noise",
    "partition_image",
    "pairwise_weight",
    "unary_weights",
    "ProbabilityModel",
    "CutInstance",
    "CutSetFunction",
    "build_cut_instance",
    "local_cut_function",
    "build_segmentation_workload",
    "mask_from_set",
    "dump_instance_csv",
]


# ---------------------------------------------------------------------------
# PGM I/O (P2 ASCII and P5 binary, maxval 255)


def _read_pgm_tokens(data: bytes):
    """Header tokens of a PNM file, skipping '#' comments."""
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            start = i
            while i < len(data) and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
                i += 1
            tokens.append(data[start:i])
    return tokens, i


def load_pgm(path) -> np.ndarray:
    """Grayscale image from a PGM file, intensities scaled to gray/255."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, offset = _read_pgm_tokens(data)
    if len(tokens) < 4:
        raise ValueError(f"truncated PGM header in {path}")
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"unsupported magic {magic!r} in {path}, expected P2 or P5")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ValueError(f"malformed PGM header in {path}") from exc
    if width < 1 or height < 1:
        raise ValueError(f"bad dimensions {width}x{height} in {path}")
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval} in {path}, expected 255")
    if magic == b"P5":
        raw = data[offset + 1 : offset + 1 + width * height]
        if len(raw) < width * height:
            raise ValueError(f"truncated P5 pixel data in {path}")
        gray = np.frombuffer(raw, dtype=np.uint8).astype(int)
    else:
        try:
            gray = np.array(data[offset:].split(), dtype=int)
        except ValueError as exc:
            raise ValueError(f"non-numeric P2 pixel data in {path}") from exc
        if gray.size != width * height:
            raise ValueError(
                f"expected {width * height} pixels in {path}, found {gray.size}"
            )
    if gray.size and (gray.min() < 0 or gray.max() > 255):
        raise ValueError(f"pixel value out of [0, 255] in {path}")
    return (gray / 255.0).reshape(height, width)


def save_pgm(image, path, binary: bool = False):
    """Write intensities in [0, 1] as a maxval-255 PGM (P2 by default)."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("image must be 2-D")
    if image.size and (image.min() < -1e-12 or image.max() > 1 + 1e-12):
        raise ValueError("intensities must lie in [0, 1]")
    gray = np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    height, width = gray.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
            fh.write(gray.tobytes())
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"P2\n{width} {height}\n255\n")
            for row in gray:
                fh.write(" ".join(str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Synthetic fixture and perturbations


def disk_image(d: int, radius: float = 0.3, fg: float = 0.8, bg: float = 0.2):
    """Bright disk on a dark field; the stock self-contained test image."""
    rr, cc = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    center = (d - 1) / 2.0
    inside = (rr - center) ** 2 + (cc - center) ** 2 <= (radius * d) ** 2
    return np.where(inside, fg, bg)


def disk_mask(d: int, radius: float = 0.3):
    """Analytic ground-truth foreground mask matching ``disk_image``."""
    rr, cc = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    center = (d - 1) / 2.0
    return ((rr - center) ** 2 + (cc - center) ** 2 <= (radius * d) ** 2).ravel()


def add_noise(image, amplitude: float, seed) -> np.ndarray:
    """Uniform perturbation in [-amplitude, amplitude], clamped to [0, 1]."""
    if amplitude < 0:
        raise ValueError("noise amplitude must be nonnegative")
    image = np.asarray(image, dtype=float)
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, size=image.shape)
    return np.clip(image + noise, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Per-agent visibility


def partition_image(d: int, n_agents: int, layout, overlap: int = 0):
    """Rectangular tiles assigning pixels to agents.

    ``layout`` is (tile_rows, tile_cols) with tile_rows * tile_cols equal to
    the number of agents; agents take tiles in row-major order. ``overlap``
    dilates each tile by that many pixels across interior borders. Returns
    one boolean pixel mask of length d*d per agent.
    """
    rows, cols = int(layout[0]), int(layout[1])
    if rows * cols != n_agents:
        raise ValueError(f"layout {rows}x{cols} does not cover {n_agents} agents")
    if rows > d or cols > d:
        raise ValueError(f"layout {rows}x{cols} too fine for a {d}x{d} image")
    if overlap < 0:
        raise ValueError("overlap must be nonnegative")
    row_edges = np.linspace(0, d, rows + 1, dtype=int)
    col_edges = np.linspace(0, d, cols + 1, dtype=int)
    masks = []
    for a in range(rows):
        for b in range(cols):
            r0, r1 = row_edges[a], row_edges[a + 1]
            c0, c1 = col_edges[b], col_edges[b + 1]
            if r0 > 0:
                r0 -= overlap
            if r1 < d:
                r1 += overlap
            if c0 > 0:
                c0 -= overlap
            if c1 < d:
                c1 += overlap
            grid = np.zeros((d, d), dtype=bool)
            grid[max(r0, 0) : min(r1, d), max(c0, 0) : min(c1, d)] = True
            masks.append(grid.ravel())
    return masks


# ---------------------------------------------------------------------------
# Edge weights


def pairwise_weight(i_p, i_q, sigma: float):
    """Discontinuity penalty exp(-(I_p - I_q)^2 / (2 sigma^2))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    diff = np.asarray(i_p, dtype=float) - np.asarray(i_q, dtype=float)
    return np.exp(-(diff**2) / (2.0 * sigma**2))


@dataclass(frozen=True)
class ProbabilityModel:
    """Two-Gaussian intensity likelihood for pixel foreground membership.

    P(foreground | I) with equal spread for both classes reduces to a
    logistic in the intensity; outputs are clamped to [floor, 1 - floor] so
    the -log penalties stay finite.
    """

    mu_fg: float = 0.8
    mu_bg: float = 0.2
    spread: float = 0.2
    floor: float = 1e-6

    def __post_init__(self):
        if self.spread <= 0:
            raise ValueError("spread must be positive")
        if not 0 < self.floor < 0.5:
            raise ValueError("floor must lie in (0, 0.5)")

    def p_foreground(self, intensity):
        intensity = np.asarray(intensity, dtype=float)
        z = (2 * intensity - self.mu_fg - self.mu_bg) * (self.mu_bg - self.mu_fg)
        p = 1.0 / (1.0 + np.exp(z / (2.0 * self.spread**2)))
        return np.clip(p, self.floor, 1.0 - self.floor)


def unary_weights(intensity, model: ProbabilityModel, lam: float):
    """Terminal penalties (a_s, a_t) = (-lam log P(fg), -lam log P(bg)).

    lam = 0 is allowed and zeroes the unary terms, leaving a pure boundary
    cut. The model's probability clamp keeps both penalties finite.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    p_fg = model.p_foreground(intensity)
    return -lam * np.log(p_fg), -lam * np.log(1.0 - p_fg)


# ---------------------------------------------------------------------------
# Cut instances and their set functions


@dataclass(frozen=True)
class CutInstance:
    """One agent's weighted view of the segmentation graph.

    ``edges_p``/``edges_q``/``edge_w`` list the undirected pairwise terms
    the agent can score (both endpoints visible); ``a_s``/``a_t`` are dense
    terminal-weight vectors, zero outside the agent's visible pixels.
    """

    n: int
    visible: np.ndarray
    edges_p: np.ndarray
    edges_q: np.ndarray
    edge_w: np.ndarray
    a_s: np.ndarray
    a_t: np.ndarray
    sigma: float = 0.1
    lam: float = 1.0

    def __post_init__(self):
        if np.any(self.edge_w < 0) or np.any(self.a_s < 0) or np.any(self.a_t < 0):
            raise ValueError("cut weights must be nonnegative")
        if self.a_s.shape != (self.n,) or self.a_t.shape != (self.n,):
            raise ValueError("terminal weight vectors must have length n")

    @property
    def normalization(self) -> float:
        """Total source mass; the constant subtracted so F(empty) = 0."""
        return float(self.a_s.sum())


class CutSetFunction(SetFunction):
    """Graph-cut set function with O(degree) marginals.

    F(X) = (weight of pairwise edges cut by X) + sum_{p in X} (a_t - a_s)_p,
    which is the boundary-plus-terminal form with the source normalization
    folded in. Marginals touch only the element's incident edges, so the
    block-greedy routine costs two effective evaluations instead of a pass
    over the whole edge set.
    """

    def __init__(self, n, edges_p, edges_q, edge_w, a_s, a_t):
        super().__init__(n)
        self._p = np.asarray(edges_p, dtype=int)
        self._q = np.asarray(edges_q, dtype=int)
        self._w = np.asarray(edge_w, dtype=float)
        self.a_s = np.asarray(a_s, dtype=float)
        self.a_t = np.asarray(a_t, dtype=float)
        if self._p.shape != self._q.shape or self._p.shape != self._w.shape:
            raise ValueError("edge arrays must have matching shapes")
        if self._p.size and (
            min(self._p.min(), self._q.min()) < 0
            or max(self._p.max(), self._q.max()) >= n
        ):
            raise ValueError("edge endpoint out of range")
        if np.any(self._p == self._q):
            raise ValueError("self-loop pairwise edges are not allowed")
        self._delta = self.a_t - self.a_s
        # CSR-style adjacency over the undirected pairwise edges.
        counts = np.bincount(self._p, minlength=n) + np.bincount(self._q, minlength=n)
        self._indptr = np.zeros(n + 1, dtype=int)
        np.cumsum(counts, out=self._indptr[1:])
        self._nbr = np.empty(self._indptr[-1], dtype=int)
        self._nbr_w = np.empty(self._indptr[-1], dtype=float)
        fill = self._indptr[:-1].copy()
        for p, q, w in zip(self._p, self._q, self._w):
            self._nbr[fill[p]], self._nbr_w[fill[p]] = q, w
            fill[p] += 1
            self._nbr[fill[q]], self._nbr_w[fill[q]] = p, w
            fill[q] += 1

    @classmethod
    def from_instance(cls, instance: CutInstance) -> "CutSetFunction":
        return cls(
            instance.n,
            instance.edges_p,
            instance.edges_q,
            instance.edge_w,
            instance.a_s,
            instance.a_t,
        )

    def eval(self, mask) -> float:
        mask = np.asarray(mask, dtype=bool)
        cut = float(self._w @ (mask[self._p] ^ mask[self._q])) if self._w.size else 0.0
        return cut + float(self._delta @ mask)

    def marginal(self, elem, mask) -> float:
        mask = np.asarray(mask, dtype=bool)
        if mask[elem]:
            raise ValueError(f"element {elem} already in the base set")
        lo, hi = self._indptr[elem], self._indptr[elem + 1]
        nbr = self._nbr[lo:hi]
        w = self._nbr_w[lo:hi]
        # Edges to outside elements become cut, edges into S stop being cut.
        return float(w @ (1.0 - 2.0 * mask[nbr]) + self._delta[elem])

    def subgradient_fast(self, order, pos):
        w = self._delta.astype(float, copy=True)
        if self._w.size:
            signed = np.where(pos[self._q] > pos[self._p], self._w, -self._w)
            np.add.at(w, self._p, signed)
            np.add.at(w, self._q, -signed)
        return w


def build_cut_instance(
    image,
    visible,
    sigma: float = 0.1,
    lam: float = 1.0,
    model: ProbabilityModel | None = None,
    connectivity: int = 4,
) -> CutInstance:
    """Cut weights one agent derives from its local view of the image.

    Pairwise lattice terms are created only where the agent sees both
    endpoints; terminal terms only on visible pixels. 4-connectivity by
    default, 8-connectivity adds the diagonal neighbor pairs.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ValueError("expected a square image")
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    d = image.shape[0]
    n = d * d
    visible = as_mask(n, visible)
    model = model or ProbabilityModel()

    flat = image.ravel()
    steps = [(0, 1), (1, 0)]
    if connectivity == 8:
        steps += [(1, 1), (1, -1)]
    ps, qs = [], []
    for dr, dc in steps:
        rows = np.arange(d - dr)
        cols = np.arange(-min(dc, 0), d - max(dc, 0))
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        p = rr * d + cc
        q = (rr + dr) * d + (cc + dc)
        keep = visible[p] & visible[q]
        ps.append(p[keep])
        qs.append(q[keep])
    edges_p = np.concatenate(ps) if ps else np.array([], int)
    edges_q = np.concatenate(qs) if qs else np.array([], int)
    edge_w = pairwise_weight(flat[edges_p], flat[edges_q], sigma)

    a_s = np.zeros(n)
    a_t = np.zeros(n)
    a_s[visible], a_t[visible] = unary_weights(flat[visible], model, lam)
    return CutInstance(
        n=n,
        visible=visible,
        edges_p=edges_p,
        edges_q=edges_q,
        edge_w=edge_w,
        a_s=a_s,
        a_t=a_t,
        sigma=sigma,
        lam=lam,
    )


def local_cut_function(instance: CutInstance) -> CutSetFunction:
    """The agent's private submodular objective for its cut instance."""
    return CutSetFunction.from_instance(instance)


def build_segmentation_workload(
    image,
    n_agents: int,
    layout,
    overlap: int = 0,
    sigma: float = 0.1,
    lam: float = 1.0,
    model: ProbabilityModel | None = None,
    noise_amplitude: float = 0.05,
    seed=0,
    connectivity: int = 4,
):
    """Per-agent cut instances and set functions for a shared image.

    Every agent re-observes its tile through independent uniform noise
    (seeded per agent), modeling locally differing intensity estimates.
    Returns (instances, functions).
    """
    image = np.asarray(image, dtype=float)
    d = image.shape[0]
    tiles = partition_image(d, n_agents, layout, overlap)
    instances = []
    for i, tile in enumerate(tiles):
        local = add_noise(image, noise_amplitude, seed=[seed, i])
        instances.append(
            build_cut_instance(local, tile, sigma, lam, model, connectivity)
        )
    return instances, [local_cut_function(inst) for inst in instances]


def mask_from_set(subset, d: int) -> np.ndarray:
    """Binary image with 1 on the subset's pixels, 0 elsewhere."""
    mask = as_mask(d * d, subset)
    return mask.reshape(d, d).astype(float)


def dump_instance_csv(instance: CutInstance, unary_path, edge_path):
    """Debug dump: per-pixel terminal weights and the pairwise edge list."""
    n = instance.n
    with open(unary_path, "w", encoding="utf-8") as fh:
        fh.write("pixel,a_s,a_t\n")
        for p in range(n):
            fh.write(f"{p},{instance.a_s[p]:.17g},{instance.a_t[p]:.17g}\n")
    with open(edge_path, "w", encoding="utf-8") as fh:
        fh.write("p,q,a_pq\n")
        for p, q, w in zip(instance.edges_p, instance.edges_q, instance.edge_w):
            fh.write(f"{p},{q},{w:.17g}\n")
