import numpy as np
import pytest

from bedwarden.des_core import RngStream
from bedwarden.replay import ReplayMemory, Transition


def make_transition(tag: int) -> Transition:
    obs = np.array([float(tag), 0.0])
    return Transition(obs, tag % 3, -float(tag), obs + 1, False)


def fill(mem: ReplayMemory, n: int):
    for i in range(n):
        mem.push(make_transition(i))


# -- ring semantics -------------------------------------------------------


def test_push_evicts_oldest_at_capacity():
    mem = ReplayMemory(capacity=5)
    fill(mem, 6)
    assert len(mem) == 5
    stored = {int(mem[i].state[0]) for i in range(len(mem))}
    assert stored == {1, 2, 3, 4, 5}


def test_pushed_transition_roundtrips():
    mem = ReplayMemory(capacity=4)
    t = make_transition(7)
    mem.push(t)
    got = mem[0]
    assert (got.state == t.state).all()
    assert got.action == t.action
    assert got.reward == t.reward
    assert (got.next_state == t.next_state).all()
    assert got.terminal == t.terminal


def test_first_push_prioritized_gets_max_default_priority():
    mem = ReplayMemory(capacity=4, mode="prioritized")
    mem.push(make_transition(0))
    assert mem._priorities[0] == 1.0


def test_overwritten_transition_never_sampled():
    mem = ReplayMemory(capacity=3)
    fill(mem, 9)
    rng = RngStream(0)
    for _ in range(50):
        _, batch = mem.sample_uniform(3, rng)
        assert all(int(t.state[0]) in {6, 7, 8} for t in batch)


# -- uniform sampling -------------------------------------------------------


def test_sample_uniform_degenerate_single_item():
    mem = ReplayMemory(capacity=4)
    fill(mem, 1)
    _, batch = mem.sample_uniform(3, RngStream(1))
    assert len(batch) == 3
    assert all(int(t.state[0]) == 0 for t in batch)


def test_sample_uniform_empty_memory_raises():
    mem = ReplayMemory(capacity=4)
    with pytest.raises(ValueError, match="empty"):
        mem.sample_uniform(3, RngStream(0))


def test_sample_uniform_empirical_frequencies():
    mem = ReplayMemory(capacity=16)
    fill(mem, 10)
    rng = RngStream(5)
    indices, _ = mem.sample_uniform(100_000, rng)
    freqs = np.bincount(indices, minlength=10) / 100_000
    assert ((0.095 <= freqs) & (freqs <= 0.105)).all()


def test_sample_uniform_reproducible():
    mem = ReplayMemory(capacity=16)
    fill(mem, 10)
    a, _ = mem.sample_uniform(32, RngStream(9))
    b, _ = mem.sample_uniform(32, RngStream(9))
    assert (a == b).all()


# -- prioritized sampling -----------------------------------------------------


def test_prioritized_probabilities_simple_case():
    mem = ReplayMemory(capacity=4, mode="prioritized", alpha=1.0)
    fill(mem, 2)
    mem.update_priorities([0, 1], [1.0 - mem.priority_epsilon, 3.0 - mem.priority_epsilon])
    rng = RngStream(2)
    indices, _, _ = mem.sample_prioritized(200_000, rng, beta=1.0)
    freq1 = (indices == 1).mean()
    assert freq1 == pytest.approx(0.75, abs=0.005)


def test_prioritized_weights_hand_computed():
    # priorities [1, 3], alpha=1, beta=1, N=2: raw weights [2, 2/3],
    # batch-normalised [1, 1/3].
    mem = ReplayMemory(capacity=4, mode="prioritized", alpha=1.0)
    fill(mem, 2)
    mem.update_priorities([0, 1], [1.0 - mem.priority_epsilon, 3.0 - mem.priority_epsilon])
    rng = RngStream(3)
    for _ in range(20):
        indices, _, weights = mem.sample_prioritized(8, rng, beta=1.0)
        if 0 in indices and 1 in indices:
            assert weights[indices == 0] == pytest.approx(1.0)
            assert weights[indices == 1] == pytest.approx(1.0 / 3.0)


def test_alpha_zero_degenerates_to_uniform_unit_weights():
    mem = ReplayMemory(capacity=8, mode="prioritized", alpha=0.0)
    fill(mem, 8)
    mem.update_priorities(range(8), np.linspace(0.1, 5.0, 8))
    rng = RngStream(4)
    indices, _, weights = mem.sample_prioritized(10_000, rng, beta=0.7)
    assert (weights == 1.0).all()
    freqs = np.bincount(indices, minlength=8) / 10_000
    assert np.abs(freqs - 1 / 8).max() < 0.02


def test_equal_priorities_give_unit_weights():
    mem = ReplayMemory(capacity=8, mode="prioritized")
    fill(mem, 8)
    indices, _, weights = mem.sample_prioritized(32, RngStream(1), beta=0.5)
    assert (weights == 1.0).all()


def test_importance_weights_bounded_with_unit_max():
    mem = ReplayMemory(capacity=32, mode="prioritized")
    fill(mem, 32)
    rng = RngStream(6)
    mem.update_priorities(range(32), rng.generator.random(32) * 4 + 0.01)
    for _ in range(50):
        _, _, weights = mem.sample_prioritized(16, rng, beta=0.6)
        assert weights.max() == pytest.approx(1.0)
        assert (weights > 0).all()
        assert (weights <= 1.0).all()


def test_prioritized_requires_prioritized_mode():
    mem = ReplayMemory(capacity=8, mode="uniform")
    fill(mem, 8)
    with pytest.raises(ValueError, match="prioritized"):
        mem.sample_prioritized(4, RngStream(0), beta=0.4)


def test_prioritized_sampling_matches_analytic_distribution():
    mem = ReplayMemory(capacity=16, mode="prioritized", alpha=0.6)
    fill(mem, 16)
    rng = RngStream(7)
    deltas = np.linspace(0.05, 4.0, 16)
    mem.update_priorities(range(16), deltas)
    scaled = (deltas + mem.priority_epsilon) ** mem.alpha
    expected = scaled / scaled.sum()
    indices, _, _ = mem.sample_prioritized(200_000, rng, beta=0.4)
    freqs = np.bincount(indices, minlength=16) / 200_000
    assert np.abs(freqs - expected).max() < 0.005


# -- priority updates --------------------------------------------------------


def test_zero_td_error_floors_at_epsilon():
    mem = ReplayMemory(capacity=4, mode="prioritized")
    fill(mem, 1)
    mem.update_priorities([0], [0.0])
    assert mem._priorities[0] == mem.priority_epsilon


def test_update_priorities_idempotent():
    mem = ReplayMemory(capacity=4, mode="prioritized")
    fill(mem, 2)
    mem.update_priorities([0, 1], [1.5, 2.5])
    first = mem._priorities[:2].copy()
    mem.update_priorities([0, 1], [1.5, 2.5])
    assert (mem._priorities[:2] == first).all()


def test_update_priorities_index_out_of_range():
    mem = ReplayMemory(capacity=4, mode="prioritized")
    fill(mem, 2)
    with pytest.raises(IndexError):
        mem.update_priorities([5], [1.0])


# -- bootstrap sampling --------------------------------------------------------


def test_bootstrap_single_item_repeats():
    mem = ReplayMemory(capacity=4)
    fill(mem, 1)
    batch = mem.sample_bootstrap(5, RngStream(0))
    assert len(batch) == 5
    assert all(int(t.state[0]) == 0 for t in batch)


def test_bootstrap_empty_memory_raises():
    mem = ReplayMemory(capacity=4)
    with pytest.raises(ValueError, match="empty"):
        mem.sample_bootstrap(2, RngStream(0))


def test_bootstrap_distinct_streams_give_distinct_batches():
    mem = ReplayMemory(capacity=1000)
    fill(mem, 1000)
    a = mem.sample_bootstrap(64, RngStream(101))
    b = mem.sample_bootstrap(64, RngStream(202))
    tags_a = [int(t.state[0]) for t in a]
    tags_b = [int(t.state[0]) for t in b]
    assert tags_a != tags_b


def test_bootstrap_same_seed_identical():
    mem = ReplayMemory(capacity=100)
    fill(mem, 100)
    a = mem.sample_bootstrap(16, RngStream(55))
    b = mem.sample_bootstrap(16, RngStream(55))
    assert [int(t.state[0]) for t in a] == [int(t.state[0]) for t in b]
