import numpy as np
import pytest

from micky.engine import (
    RunConfig,
    StepsizeSchedule,
    consensus_error,
    expected_metrics,
    init,
    run,
    step,
    stepsize,
)
from micky.submodular import BlockPartition, ModularFunction, as_indices, threshold
from micky.topology import Digraph, metropolis_weights, symmetrize
from micky.synthetic import planted_cut_workload

from conftest import make_cut


def single_agent_config(fn, **kwargs):
    g = Digraph(1, [])
    defaults = dict(
        functions=[fn],
        graph=g,
        weights=np.array([[1.0]]),
        partition=BlockPartition.singletons(fn.n),
        num_rounds=100,
        tau=0.5,
        seed=3,
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


def two_agent_config(functions, **kwargs):
    g = Digraph(2, [(0, 1), (1, 0)])
    defaults = dict(
        functions=functions,
        graph=g,
        weights=metropolis_weights(g),
        partition=BlockPartition.contiguous(functions[0].n, 1),
        num_rounds=1,
        tau=0.5,
        seed=5,
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


def test_stepsize_values():
    dim = StepsizeSchedule("diminishing", 1.0, 1.0)
    assert stepsize(dim, 0) == 1.0
    assert stepsize(dim, 9) == pytest.approx(0.1)
    const = StepsizeSchedule("constant", 0.1)
    assert all(stepsize(const, k) == 0.1 for k in range(5))


def test_stepsize_summability_boundary():
    # gamma in (0.5, 1] keeps the squared sequence summable.
    with pytest.raises(ValueError):
        StepsizeSchedule("diminishing", 1.0, 0.4)
    with pytest.raises(ValueError):
        StepsizeSchedule("diminishing", 1.0, 1.2)
    with pytest.raises(ValueError):
        StepsizeSchedule("diminishing", -1.0, 1.0)
    StepsizeSchedule("diminishing", 1.0, 0.51)  # valid


def test_harmonic_partial_sums_behave():
    sched = StepsizeSchedule("diminishing", 1.0, 1.0)
    alphas = np.array([sched.at(k) for k in range(100_000)])
    assert alphas.sum() > 10  # diverges (slowly)
    assert (alphas**2).sum() < np.pi**2 / 6 + 1e-9  # converges


def test_single_agent_modular_converges_to_empty_set():
    # Constant positive marginals push every component to the floor.
    fn = ModularFunction(np.ones(3))
    cfg = single_agent_config(
        fn, schedules=[StepsizeSchedule("constant", 0.5)], num_rounds=200
    )
    trace = run(cfg)
    assert all(not s.any() for s in trace.final_sets)
    assert np.all(trace.final_x == 0.0)


def test_zero_rounds_thresholds_initial_state():
    fn = ModularFunction(np.ones(4))
    cfg = single_agent_config(fn, num_rounds=0)
    trace = run(cfg)
    state = init(cfg)
    expected = threshold(state.x[0], cfg.tau)
    assert np.array_equal(trace.final_sets[0], expected)
    assert np.array_equal(trace.final_x, state.x)


def test_one_round_matches_hand_computation():
    # Independent re-computation of one synchronous round with one block.
    functions = [make_cut(2, 21), make_cut(2, 22)]
    cfg = two_agent_config(functions, schedules=[StepsizeSchedule("constant", 0.3)])
    state = init(cfg)
    x0 = state.x.copy()
    w = cfg.weights

    expected = np.empty_like(x0)
    for i in range(2):
        y = w[i, 0] * x0[0] + w[i, 1] * x0[1]
        order = np.argsort(-y, kind="stable")
        g = np.empty(2)
        mask = np.zeros(2, dtype=bool)
        for m in order:
            g[m] = functions[i].marginal(m, mask)
            mask[m] = True
        expected[i] = np.clip(y - 0.3 * g, 0.0, 1.0)

    step(state)
    assert np.allclose(state.x, expected, atol=1e-12)


def test_messages_carry_single_blocks():
    _, functions, _ = planted_cut_workload(9, 2, seed=1)
    cfg = two_agent_config(
        functions, partition=BlockPartition.contiguous(9, 3), num_rounds=5
    )
    state = init(cfg)
    for _ in range(5):
        messages = step(state)
        assert len(messages) == 2
        for msg in messages:
            block = cfg.partition.blocks[msg.block_id]
            assert msg.values.size == block.size < 9
            assert np.all((msg.values >= 0) & (msg.values <= 1))


def test_box_feasibility_and_unselected_components_untouched():
    _, functions, _ = planted_cut_workload(6, 2, seed=2)
    cfg = two_agent_config(
        functions, partition=BlockPartition.singletons(6), num_rounds=50
    )
    state = init(cfg)
    for _ in range(50):
        before = state.x.copy()
        messages = step(state)
        assert np.all((state.x >= 0) & (state.x <= 1))
        for msg in messages:
            block = cfg.partition.blocks[msg.block_id]
            untouched = np.ones(6, dtype=bool)
            untouched[block] = False
            assert np.array_equal(state.x[msg.sender][untouched], before[msg.sender][untouched])


def test_run_is_deterministic():
    _, functions, _ = planted_cut_workload(8, 3, seed=3)
    g = symmetrize(Digraph(3, [(0, 1), (1, 2)]))
    cfg = dict(
        functions=functions,
        graph=g,
        weights=metropolis_weights(g),
        partition=BlockPartition.contiguous(8, 4),
        num_rounds=300,
        tau=0.5,
        seed=17,
    )
    a = run(RunConfig(**cfg))
    b = run(RunConfig(**cfg))
    assert np.array_equal(a.final_x, b.final_x)
    assert np.array_equal(a.consensus_err, b.consensus_err)
    assert np.array_equal(a.f_value, b.f_value)
    assert np.array_equal(a.block_selected, b.block_selected)


def test_thread_count_does_not_change_results():
    _, functions, _ = planted_cut_workload(10, 4, seed=4)
    g = symmetrize(Digraph(4, [(0, 1), (1, 2), (2, 3)]))
    base = dict(
        functions=functions,
        graph=g,
        weights=metropolis_weights(g),
        partition=BlockPartition.contiguous(10, 5),
        num_rounds=200,
        tau=0.5,
        seed=23,
    )
    serial = run(RunConfig(**base, threads=1))
    threaded = run(RunConfig(**base, threads=4))
    assert np.array_equal(serial.final_x, threaded.final_x)
    assert np.array_equal(serial.f_value, threaded.f_value)
    assert np.array_equal(serial.block_selected, threaded.block_selected)


def test_f_best_is_non_increasing():
    _, functions, _ = planted_cut_workload(8, 2, seed=5)
    cfg = two_agent_config(
        functions, partition=BlockPartition.singletons(8), num_rounds=400
    )
    trace = run(cfg)
    assert np.all(np.diff(trace.f_best, axis=0) <= 0 + 1e-15)
    assert np.all(trace.f_best <= trace.f_value + 1e-15)


def test_consensus_error_examples():
    assert np.allclose(consensus_error(np.array([[1.0, 0.0], [1.0, 0.0]])), 0.0)
    errs = consensus_error(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert np.allclose(errs, [0.5, 0.5])
    x = np.random.default_rng(0).random((5, 7))
    assert np.allclose((x - x.mean(axis=0)).sum(axis=0), 0.0, atol=1e-12)


def test_init_validates_weight_matrix():
    fn = ModularFunction(np.ones(3))
    g = Digraph(2, [(0, 1), (1, 0)])
    bad = np.array([[0.9, 0.1], [0.5, 0.5]])
    cfg = RunConfig(
        functions=[fn, ModularFunction(np.ones(3))],
        graph=g,
        weights=bad,
        partition=BlockPartition.singletons(3),
        num_rounds=1,
    )
    with pytest.raises(ValueError, match="averaging matrix"):
        init(cfg)


def test_init_validates_tau_and_partition():
    fn = ModularFunction(np.ones(3))
    with pytest.raises(ValueError):
        init(single_agent_config(fn, tau=1.5))
    with pytest.raises(ValueError):
        init(single_agent_config(fn, partition=BlockPartition.singletons(4)))


def test_init_determinism_and_initial_share():
    _, functions, _ = planted_cut_workload(6, 2, seed=6)
    cfg = two_agent_config(functions)
    a, b = init(cfg), init(cfg)
    assert np.array_equal(a.x, b.x)
    for i in range(2):
        for j, copy in a.copies[i].items():
            assert np.array_equal(copy, a.x[j])


def test_block_probability_floor_is_enforced():
    fn = ModularFunction(np.ones(4))
    cfg = single_agent_config(
        fn,
        partition=BlockPartition.singletons(4),
        block_probs=[np.array([0.9995, 0.0001, 0.0002, 0.0002])],
    )
    with pytest.raises(ValueError, match="floor"):
        init(cfg)


def test_custom_block_probabilities_are_respected():
    fn = ModularFunction(np.ones(4))
    cfg = single_agent_config(
        fn,
        partition=BlockPartition.contiguous(4, 2),
        block_probs=[np.array([0.999, 0.001])],
        p_min=1e-3,
        num_rounds=200,
        schedules=[StepsizeSchedule("constant", 0.01)],
    )
    trace = run(cfg)
    # Over 200 rounds the heavy block dominates overwhelmingly.
    sizes = trace.message_sizes[:, 0]
    assert np.mean(sizes == 2) > 0.95


def test_expected_metrics_single_seed_equals_its_run():
    _, functions, _ = planted_cut_workload(6, 2, seed=7)
    cfg = two_agent_config(
        functions, partition=BlockPartition.singletons(6), num_rounds=50
    )
    avg = expected_metrics(cfg, num_seeds=1)
    assert np.array_equal(avg.consensus_err, avg.traces[0].consensus_err)
    assert np.array_equal(avg.f_best, avg.traces[0].f_best)


def test_expected_metrics_averages_and_monotonicity():
    _, functions, _ = planted_cut_workload(6, 2, seed=8)
    cfg = two_agent_config(
        functions, partition=BlockPartition.singletons(6), num_rounds=300
    )
    avg = expected_metrics(cfg, num_seeds=4)
    assert np.all(np.diff(avg.f_best, axis=0) <= 1e-15)
    early = avg.consensus_err[1].max()  # k=10, after mixing starts
    late = avg.consensus_err[-1].max()
    assert late <= early


def test_literal_update_variant_runs_but_does_not_mix():
    # The x-based variant leaves unselected agents' estimates unmixed; it is
    # exposed for comparison and must still honor all invariants.
    _, functions, _ = planted_cut_workload(6, 2, seed=9)
    cfg = two_agent_config(
        functions,
        partition=BlockPartition.singletons(6),
        num_rounds=100,
        update_from_average=False,
    )
    trace = run(cfg)
    assert np.all((trace.final_x >= 0) & (trace.final_x <= 1))
    assert np.all(np.diff(trace.f_best, axis=0) <= 1e-15)
