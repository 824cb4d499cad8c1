"""Hospital bed-capacity simulation, Gym-style environment interface, and
a family of Deep Q-Learning agents with a training harness."""

from .des_core import EventQueue, RngStream
from .env_api import EnvSpec, Environment, EpisodeOverError, IllegalActionError, StepResult
from .hospital_env import ConfigError, HospitalConfig, HospitalEnv

__version__ = "0.1.0"

__all__ = [
    "EventQueue",
    "RngStream",
    "EnvSpec",
    "Environment",
    "EpisodeOverError",
    "IllegalActionError",
    "StepResult",
    "ConfigError",
    "HospitalConfig",
    "HospitalEnv",
    "__version__",
]
