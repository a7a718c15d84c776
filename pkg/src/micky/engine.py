"""Synchronous-round simulator of the distributed block-greedy minimizer.

Each agent keeps a local estimate x_i in [0,1]^n plus a copy of every
in-neighbor's estimate. One round, executed by all agents in lockstep:

  1. apply the block updates received from the previous round to the
     neighbor copies (all other components stay untouched);
  2. average: y_i = sum_j w_ij x_j|i over in-neighbors, self included;
  3. draw a block from the agent's private stream, compute that block of
     the greedy subgradient of the agent's own function at y_i;
  4. move only the drawn block: x_block <- clamp(y_block - alpha_k g),
     leaving every other component of x_i exactly as it was;
  5. broadcast the new block values to the out-neighbors, for delivery at
     the start of the next round.

Initial estimates are uniform on [0,1]^n and shared in full once, so with
synchronous lossless delivery every stored copy equals the true neighbor
state at every round; the simulator asserts that exactly. After K rounds
each agent rounds its estimate to the set {l : x_l > tau}.

Determinism: one master seed spawns one independent stream per agent
(covering the initial estimate and the block draws), so a run is a pure
function of its config, regardless of how many worker threads execute the
agents within a round.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .submodular import (
    BlockPartition,
    SetFunction,
    block_greedy,
    descending_order,
    full_greedy_subgradient,
    threshold,
)
from .topology import Digraph, doubly_stochastic_violations, min_positive_entry

__all__ = [
    "StepsizeSchedule",
    "RunConfig",
    "RoundMessage",
    "EngineState",
    "RunTrace",
    "AveragedTrace",
    "stepsize",
    "init",
    "step",
    "run",
    "consensus_error",
    "expected_metrics",
    "estimate_subgradient_bound",
]

DEFAULT_P_MIN = 1e-3


@dataclass(frozen=True)
class StepsizeSchedule:
    """Stepsize sequence alpha_k, constant or diminishing c/(k+1)^gamma.

    Diminishing schedules require gamma in (0.5, 1] so the sequence is
    square-summable but not summable, and non-increasing. Constant
    schedules converge only to a neighborhood of the optimum.
    """

    kind: str  # "diminishing" | "constant"
    c: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("diminishing", "constant"):
            raise ValueError(f"unknown stepsize kind {self.kind!r}")
        if self.c <= 0:
            raise ValueError("stepsize scale c must be positive")
        if self.kind == "diminishing" and not 0.5 < self.gamma <= 1.0:
            raise ValueError(
                "diminishing stepsize needs gamma in (0.5, 1] "
                "(otherwise the squared sequence is not summable)"
            )

    def at(self, k: int) -> float:
        if k < 0:
            raise ValueError("round index must be nonnegative")
        if self.kind == "constant":
            return self.c
        return self.c / (k + 1) ** self.gamma


def stepsize(schedule: StepsizeSchedule, k: int) -> float:
    return schedule.at(k)


def estimate_subgradient_bound(fn: SetFunction, rng, samples: int = 3) -> float:
    """Sampled bound on greedy-subgradient magnitude, for stepsize scaling."""
    best = 0.0
    for _ in range(samples):
        w = full_greedy_subgradient(fn, rng.random(fn.n))
        best = max(best, float(np.abs(w).max()))
    return best


@dataclass(frozen=True)
class RoundMessage:
    """One broadcast: the sender's freshly updated block values."""

    sender: int
    block_id: int
    values: np.ndarray
    round: int


@dataclass
class RunConfig:
    """Everything a run depends on: problem, network, and algorithm knobs."""

    functions: list
    graph: Digraph
    weights: np.ndarray
    partition: BlockPartition
    num_rounds: int
    tau: float = 0.5
    seed: int = 0
    schedules: list | None = None  # None: per-agent auto 1/G_est over (k+1)
    block_probs: list | None = None  # None: uniform over blocks
    p_min: float = DEFAULT_P_MIN
    record_every: int = 10
    snapshot_rounds: tuple = ()
    # Base point of the projected block step. True steps the drawn block off
    # the freshly averaged y_i, which is what contracts the agents toward
    # consensus; False steps off the agent's own x_i, leaving estimates
    # unmixed (kept for comparison, does not consense).
    update_from_average: bool = True
    threads: int = 1


@dataclass
class EngineState:
    config: RunConfig
    round: int
    x: np.ndarray  # (N, n) current estimates
    copies: list  # per agent: {in-neighbor id -> vector copy}
    rngs: list
    schedules: list
    block_probs_cum: list
    pending: list = field(default_factory=list)  # messages sent last round
    last_block: np.ndarray | None = None

    @property
    def n_agents(self):
        return self.x.shape[0]


@dataclass
class RunTrace:
    """Metrics at recorded rounds plus final thresholded sets.

    ``f_value`` is the global relaxation cost at each agent's estimate,
    ``f_best`` its running minimum over recorded rounds, ``set_cost`` the
    global set-function value of the tau-thresholded estimate. Message
    block sizes are logged for every round to audit bandwidth.
    """

    rounds: np.ndarray
    consensus_err: np.ndarray  # (R, N)
    f_value: np.ndarray  # (R, N)
    f_best: np.ndarray  # (R, N)
    set_cost: np.ndarray  # (R, N)
    block_selected: np.ndarray  # (R, N), -1 before the first draw
    final_x: np.ndarray  # (N, n)
    final_sets: list  # per-agent boolean masks
    message_sizes: np.ndarray  # (K, N) components broadcast per round
    snapshots: dict  # round -> (N, n) array


def _validate(config: RunConfig):
    n_agents = config.graph.n_agents
    if len(config.functions) != n_agents:
        raise ValueError(
            f"{len(config.functions)} functions for {n_agents} agents"
        )
    n = config.functions[0].n
    if any(fn.n != n for fn in config.functions):
        raise ValueError("all agents must share one ground set")
    if config.partition.n != n:
        raise ValueError("partition does not match the ground set size")
    if not 0.0 <= config.tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    if config.num_rounds < 0:
        raise ValueError("round budget must be nonnegative")
    if config.record_every < 1:
        raise ValueError("record cadence must be at least 1")
    if config.threads < 1:
        raise ValueError("thread count must be at least 1")
    w = np.asarray(config.weights, dtype=float)
    eta = min_positive_entry(w)
    problems = doubly_stochastic_violations(w, config.graph, eta if eta > 0 else 1.0)
    if problems:
        raise ValueError(
            "weight matrix is not a valid averaging matrix: " + "; ".join(problems)
        )


def _resolve_schedules(config: RunConfig):
    if config.schedules is not None:
        schedules = list(config.schedules)
        if len(schedules) == 1 and config.graph.n_agents > 1:
            schedules = schedules * config.graph.n_agents
        if len(schedules) != config.graph.n_agents:
            raise ValueError("need one stepsize schedule per agent")
        return schedules
    # Scale-aware default: alpha_k = c_i / (k+1) with c_i = 2 / G_i, where
    # G_i is estimated from a few sampled subgradients on a stream separate
    # from the block draws. Capped below 1 so every alpha stays in (0, 1).
    schedules = []
    for i, fn in enumerate(config.functions):
        rng = np.random.default_rng([config.seed, i, 1])
        bound = estimate_subgradient_bound(fn, rng)
        c = min(2.0 / max(bound, 1e-12), 0.99)
        schedules.append(StepsizeSchedule("diminishing", c, 1.0))
    return schedules


def _resolve_block_probs(config: RunConfig):
    num_blocks = config.partition.num_blocks
    if config.block_probs is None:
        probs = [np.full(num_blocks, 1.0 / num_blocks)] * config.graph.n_agents
    else:
        probs = [np.asarray(p, dtype=float) for p in config.block_probs]
        if len(probs) == 1 and config.graph.n_agents > 1:
            probs = probs * config.graph.n_agents
        if len(probs) != config.graph.n_agents:
            raise ValueError("need one block-probability vector per agent")
    for p in probs:
        if p.shape != (num_blocks,):
            raise ValueError("block probability vector has the wrong length")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("block probabilities must sum to 1")
        if p.min() < config.p_min:
            raise ValueError(
                f"block probability {p.min():.3g} below the floor {config.p_min:.3g}"
            )
    return [np.cumsum(p) for p in probs]


def init(config: RunConfig) -> EngineState:
    """Validated initial state: random estimates, full copies, round 0."""
    _validate(config)
    n = config.functions[0].n
    n_agents = config.graph.n_agents
    rngs = [np.random.default_rng([config.seed, i, 0]) for i in range(n_agents)]
    x = np.stack([rngs[i].random(n) for i in range(n_agents)])
    copies = [
        {j: x[j].copy() for j in config.graph.in_neighbors(i)}
        for i in range(n_agents)
    ]
    return EngineState(
        config=config,
        round=0,
        x=x,
        copies=copies,
        rngs=rngs,
        schedules=_resolve_schedules(config),
        block_probs_cum=_resolve_block_probs(config),
        pending=[],
        last_block=np.full(n_agents, -1, dtype=int),
    )


def _deliver(state: EngineState):
    """Write last round's block broadcasts into the recipients' copies."""
    graph = state.config.graph
    partition = state.config.partition
    for msg in state.pending:
        block = partition.blocks[msg.block_id]
        for i in graph.out_neighbors(msg.sender):
            state.copies[i][msg.sender][block] = msg.values
    state.pending = []


def _agent_update(state: EngineState, i: int):
    """One agent's averaging, block draw, and projected block step."""
    cfg = state.config
    y = np.zeros_like(state.x[i])
    for j, copy in state.copies[i].items():
        y += cfg.weights[i, j] * copy
    u = state.rngs[i].random()
    block_id = int(np.searchsorted(state.block_probs_cum[i], u, side="right"))
    block_id = min(block_id, cfg.partition.num_blocks - 1)
    block = cfg.partition.blocks[block_id]
    g = block_greedy(cfg.functions[i], y, block)
    alpha = state.schedules[i].at(state.round)
    base = y if cfg.update_from_average else state.x[i]
    new_values = np.clip(base[block] - alpha * g, 0.0, 1.0)
    return block_id, new_values


def step(state: EngineState):
    """Advance one synchronous round in place; returns the broadcasts.

    Agents within the round are independent given the previous round's
    messages, so they may execute on a thread pool; results are committed
    in agent order behind a barrier, which keeps runs bit-identical across
    thread counts.
    """
    _deliver(state)
    cfg = state.config
    agents = range(state.n_agents)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda i: _agent_update(state, i), agents))
    else:
        results = [_agent_update(state, i) for i in agents]

    messages = []
    for i, (block_id, new_values) in enumerate(results):
        block = cfg.partition.blocks[block_id]
        state.x[i][block] = new_values
        state.last_block[i] = block_id
        messages.append(
            RoundMessage(
                sender=i,
                block_id=block_id,
                values=new_values.copy(),
                round=state.round,
            )
        )
    state.pending = messages
    state.round += 1
    return messages


def consensus_error(x: np.ndarray) -> np.ndarray:
    """Per-agent distance to the instantaneous network average."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    mean = x.mean(axis=0)
    return np.linalg.norm(x - mean, axis=1)


def _assert_copy_fidelity(state: EngineState):
    """Copies must equal the true neighbor states, exactly, at every check."""
    for i in range(state.n_agents):
        for j, copy in state.copies[i].items():
            if not np.array_equal(copy, state.x[j]):
                raise AssertionError(
                    f"copy of agent {j} held by agent {i} diverged at round "
                    f"{state.round}; synchronous delivery is broken"
                )


def _global_relaxation_cost(functions, x_i):
    """Sum over agents of the relaxation value at one estimate.

    Uses the support-function identity: the greedy vertex w for the ordering
    of x satisfies w . x = extension value, so one shared sort serves every
    agent's function.
    """
    order = descending_order(x_i)
    pos = np.empty(x_i.size, dtype=int)
    pos[order] = np.arange(x_i.size)
    return float(sum(fn.subgradient_fast(order, pos) @ x_i for fn in functions))


def _global_set_cost(functions, mask):
    return float(sum(fn.eval(mask) for fn in functions))


def run(config: RunConfig) -> RunTrace:
    """Execute the full round budget and threshold the final estimates."""
    state = init(config)
    k_total = config.num_rounds
    record_rounds = sorted(
        {0, k_total} | {k for k in range(0, k_total + 1, config.record_every)}
    )
    snapshot_rounds = set(int(r) for r in config.snapshot_rounds)

    rows = {
        "consensus": [],
        "f_value": [],
        "f_best": [],
        "set_cost": [],
        "block": [],
    }
    snapshots = {}
    f_best = np.full(state.n_agents, np.inf)
    message_sizes = np.zeros((k_total, state.n_agents), dtype=int)

    def record(k):
        nonlocal f_best
        # Flush in-flight broadcasts first: delivery between rounds is
        # unobservable, and it makes the fidelity check exact.
        _deliver(state)
        _assert_copy_fidelity(state)
        rows["consensus"].append(consensus_error(state.x))
        f_val = np.array(
            [_global_relaxation_cost(config.functions, state.x[i]) for i in range(state.n_agents)]
        )
        f_best = np.minimum(f_best, f_val)
        rows["f_value"].append(f_val)
        rows["f_best"].append(f_best.copy())
        rows["set_cost"].append(
            np.array(
                [
                    _global_set_cost(config.functions, threshold(state.x[i], config.tau))
                    for i in range(state.n_agents)
                ]
            )
        )
        rows["block"].append(state.last_block.copy())

    later_records = set(record_rounds) - {0}
    if 0 in snapshot_rounds:
        snapshots[0] = state.x.copy()
    record(0)
    for k in range(k_total):
        messages = step(state)
        for msg in messages:
            message_sizes[k, msg.sender] = msg.values.size
        if state.round in snapshot_rounds:
            snapshots[state.round] = state.x.copy()
        if state.round in later_records:
            record(state.round)

    final_sets = [threshold(state.x[i], config.tau) for i in range(state.n_agents)]
    return RunTrace(
        rounds=np.array(record_rounds, dtype=int),
        consensus_err=np.stack(rows["consensus"]),
        f_value=np.stack(rows["f_value"]),
        f_best=np.stack(rows["f_best"]),
        set_cost=np.stack(rows["set_cost"]),
        block_selected=np.stack(rows["block"]),
        final_x=state.x.copy(),
        final_sets=final_sets,
        message_sizes=message_sizes,
        snapshots=snapshots,
    )


@dataclass
class AveragedTrace:
    """Pointwise Monte Carlo means across runs with derived seeds."""

    rounds: np.ndarray
    consensus_err: np.ndarray  # (R, N) mean over runs
    f_best: np.ndarray  # (R, N) mean over runs
    traces: list  # the underlying per-seed traces


def expected_metrics(config: RunConfig, num_seeds: int) -> AveragedTrace:
    """Average consensus-error and best-cost traces over derived seeds."""
    if num_seeds < 1:
        raise ValueError("need at least one seed")
    traces = []
    for s in range(num_seeds):
        derived = int(np.random.SeedSequence([config.seed, s]).generate_state(1)[0])
        traces.append(run(replace(config, seed=derived)))
    return AveragedTrace(
        rounds=traces[0].rounds,
        consensus_err=np.mean([t.consensus_err for t in traces], axis=0),
        f_best=np.mean([t.f_best for t in traces], axis=0),
        traces=traces,
    )
