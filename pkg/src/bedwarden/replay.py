"""Experience memory with uniform, prioritized, and bootstrap sampling.

A fixed-capacity ring buffer of transitions. Prioritized mode keeps a raw
priority per slot (|TD error| + epsilon) and applies the alpha exponent at
sampling time; importance weights are normalised so the largest weight in
every batch is exactly 1. Linear-scan cumulative sampling is plenty at
this capacity; a sum-tree would only change constants, not the contract.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .des_core import RngStream

__all__ = ["Transition", "ReplayMemory"]


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayMemory:
    """Ring-buffer transition store; mode is "uniform" or "prioritized"."""

    def __init__(self, capacity: int = 50_000, mode: str = "uniform",
                 alpha: float = 0.6, priority_epsilon: float = 1e-6):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if mode not in ("uniform", "prioritized"):
            raise ValueError(f"unknown replay mode {mode!r}")
        self.capacity = capacity
        self.mode = mode
        self.alpha = alpha
        self.priority_epsilon = priority_epsilon
        self._items: list[Transition] = []
        self._cursor = 0
        self._priorities = np.zeros(capacity)
        self._max_priority = 1.0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, transition: Transition):
        """Store a transition, evicting the oldest once at capacity.

        In prioritized mode new items enter at the running maximum priority
        so they are sampled at least once before their TD error is known.
        """
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._cursor] = transition
        self._priorities[self._cursor] = self._max_priority
        self._cursor = (self._cursor + 1) % self.capacity

    def __getitem__(self, index: int) -> Transition:
        return self._items[index]

    def _gather(self, indices) -> list[Transition]:
        return [self._items[i] for i in indices]

    def sample_uniform(self, batch_size: int, rng: RngStream):
        """Indices and transitions drawn uniformly with replacement.

        Sampling is with replacement, so batches larger than the store are
        valid; only an empty memory is an error.
        """
        if not self._items:
            raise ValueError("cannot sample from an empty memory")
        indices = rng.integers(0, len(self._items), size=batch_size)
        return indices, self._gather(indices)

    def sample_prioritized(self, batch_size: int, rng: RngStream, beta: float):
        """Proportional prioritized sample with importance weights.

        P(i) = p_i^alpha / sum_j p_j^alpha; w_i = (N P(i))^-beta, normalised
        by the largest weight in the batch.
        """
        if self.mode != "prioritized":
            raise ValueError("memory was not built in prioritized mode")
        size = len(self._items)
        if size == 0:
            raise ValueError("cannot sample from an empty memory")
        scaled = self._priorities[:size] ** self.alpha
        probs = scaled / scaled.sum()
        indices = rng.choice(size, size=batch_size, p=probs)
        weights = (size * probs[indices]) ** -beta
        weights = weights / weights.max()
        return indices, self._gather(indices), weights

    def update_priorities(self, indices, td_errors):
        """Set priority |delta| + epsilon for each sampled slot."""
        td_errors = np.atleast_1d(np.asarray(td_errors, dtype=np.float64))
        for index, delta in zip(indices, td_errors):
            if not 0 <= index < len(self._items):
                raise IndexError(f"replay index {index} out of range [0, {len(self._items)})")
            priority = abs(float(delta)) + self.priority_epsilon
            self._priorities[index] = priority
            self._max_priority = max(self._max_priority, priority)

    def sample_bootstrap(self, batch_size: int, rng: RngStream) -> list[Transition]:
        """Uniform with-replacement resample of the current contents."""
        if not self._items:
            raise ValueError("cannot bootstrap-sample an empty memory")
        indices = rng.integers(0, len(self._items), size=batch_size)
        return self._gather(indices)
