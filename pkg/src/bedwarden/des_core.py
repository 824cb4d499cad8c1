"""Minimal discrete-event simulation kernel.

A simulated clock (in days), a time-ordered event queue with run-until
semantics, and seedable random streams. This is deliberately small: only
delayed callbacks are supported, no resources or interrupts.
"""

from __future__ import annotations

import heapq
import math
from typing import Callable

import numpy as np

__all__ = ["RngStream", "EventQueue"]


class RngStream:
    """Seedable random stream backed by numpy's PCG64 generator.

    Identical seeds yield bitwise-identical draw sequences, so a whole
    simulation trajectory is a pure function of (config, seed). Each
    environment instance owns one stream; agents own separate streams so
    environment trajectories stay comparable across agents.
    """

    def __init__(self, seed):
        self.seed = seed
        self._seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seed_seq))

    def uniform(self) -> float:
        """One draw from the uniform distribution on [0, 1)."""
        return float(self.generator.random())

    def exponential(self, mean: float) -> float:
        """Inverse-CDF exponential draw, -mean * ln(u) with u in (0, 1).

        Redraws on the (probability 2**-53) event u == 0 so the result is
        always strictly positive.
        """
        if mean <= 0:
            raise ValueError(f"exponential mean must be positive, got {mean}")
        u = self.uniform()
        while u == 0.0:
            u = self.uniform()
        return -mean * math.log(u)

    def integers(self, low: int, high: int | None = None, size=None):
        """Uniform integers in [low, high), mirroring numpy's Generator."""
        return self.generator.integers(low, high, size=size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def choice(self, n: int, size: int, p=None):
        """Sample `size` indices from range(n), optionally weighted by `p`."""
        return self.generator.choice(n, size=size, p=p, replace=True)

    def spawn(self, n: int) -> list["RngStream"]:
        """Derive `n` independent child streams (deterministic in the seed)."""
        return [RngStream(child) for child in self._seed_seq.spawn(n)]


class EventQueue:
    """Time-ordered event queue with a monotone clock.

    Events fire in (fire_time, sequence_id) order; ties in fire time break
    by scheduling order. run_until(target) fires every event scheduled
    strictly before `target` and leaves the clock exactly at `target`.
    An event landing exactly on `target` fires during a later run whose
    target lies beyond it -- the same boundary rule as process-style DES
    engines, so a change enacted exactly on a step boundary becomes visible
    one step later.
    """

    def __init__(self):
        self.now = 0.0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, delay: float, callback: Callable[[], None]) -> int:
        """Enqueue `callback` to fire `delay` days from now; returns an event id."""
        if delay < 0:
            raise ValueError(f"cannot schedule an event in the past: delay={delay}")
        event_id = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._heap, (self.now + delay, event_id, callback))
        return event_id

    def run_until(self, target: float) -> float:
        """Fire all events before `target` in order and advance the clock to it."""
        if target < self.now:
            raise ValueError(f"clock cannot rewind: now={self.now}, target={target}")
        while self._heap and self._heap[0][0] < target:
            fire_time, _, callback = heapq.heappop(self._heap)
            self.now = fire_time
            callback()
        self.now = target
        return self.now
