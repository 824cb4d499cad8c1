"""The Gym-style environment contract every simulation in this package implements.

An environment exposes reset/step/render plus the attributes `actions`,
`action_size`, `observation_size` and `state`, so any agent loop written
against the usual episodic interface can drive it.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "EnvSpec",
    "StepResult",
    "Environment",
    "EnvironmentError_",
    "IllegalActionError",
    "EpisodeOverError",
]


class EnvironmentError_(Exception):
    """Base class for environment contract violations."""


class IllegalActionError(EnvironmentError_):
    """Raised when an agent submits an action the environment rejects."""


class EpisodeOverError(EnvironmentError_):
    """Raised when step is called after the terminal state (reset first)."""


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an environment's action and observation spaces."""

    action_size: int
    observation_size: int
    actions: tuple

    def __post_init__(self):
        if self.action_size != len(self.actions):
            raise ValueError("action_size must equal len(actions)")


class StepResult(NamedTuple):
    """The (observation, reward, terminal, info) tuple returned by step."""

    observation: np.ndarray
    reward: float
    terminal: bool
    info: dict


class Environment(ABC):
    """Abstract episodic simulation driven through reset/step/render."""

    @abstractmethod
    def reset(self, seed: int | None = None) -> np.ndarray:
        """Return the simulation to its starting state and return the first observation.

        Callable at any time, including mid-episode; a seed reseeds the
        environment's random stream for a reproducible episode.
        """

    @abstractmethod
    def step(self, action: int) -> StepResult:
        """Apply the action, advance the simulation one time step, return the result."""

    @abstractmethod
    def render(self) -> str:
        """Return a one-line human-readable view of the current state (no mutation)."""

    @property
    @abstractmethod
    def spec(self) -> EnvSpec: ...

    @property
    def actions(self):
        return self.spec.actions

    @property
    def action_size(self) -> int:
        return self.spec.action_size

    @property
    def observation_size(self) -> int:
        return self.spec.observation_size

    def legal_action_mask(self) -> np.ndarray:
        """Boolean mask over action indices; True where the action is currently legal.

        Environments without legality constraints inherit the all-legal default.
        """
        return np.ones(self.action_size, dtype=bool)
