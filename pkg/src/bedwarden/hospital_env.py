"""Hospital bed-capacity simulation.

Patients arrive as a Poisson-like stream whose rate depends on the day of
week, stay for an exponentially distributed number of days, and leave. The
agent requests signed changes to the staffed-bed count; a change is only
enacted after `delay_to_change_beds` days. Reward penalises the distance
between spare beds and a target reserve, so it is always zero or negative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from .des_core import EventQueue, RngStream
from .env_api import EnvSpec, Environment, EpisodeOverError, IllegalActionError, StepResult

__all__ = [
    "HospitalConfig",
    "HospitalEnv",
    "ConfigError",
    "calculate_reward",
    "get_observations",
    "islegal",
    "DEFAULT_ACTION_DELTAS",
]

DEFAULT_ACTION_DELTAS = (-10, -5, -2, -1, 0, 1, 2, 5, 10)

# Arrival-rate modulation: +20% on weekdays (0-4), -50% on weekends (5-6).
WEEKDAY_ARRIVAL_FACTOR = 1.2
WEEKEND_ARRIVAL_FACTOR = 0.5


class ConfigError(ValueError):
    """Raised for invalid or unknown configuration values."""


@dataclass(frozen=True)
class HospitalConfig:
    """Simulation parameters; all times are in days.

    `weekday_one_hot` widens the observation from a scalar weekday feature
    to a 7-entry one-hot block (observation length 11 instead of 5).
    """

    arrivals_per_day: float = 50.0
    los: float = 7.0
    sim_duration: float = 365.0
    time_step: float = 1.0
    delay_to_change_beds: float = 2.0
    target_reserve: float = 0.05
    action_deltas: tuple = DEFAULT_ACTION_DELTAS
    weekday_one_hot: bool = False

    def __post_init__(self):
        object.__setattr__(self, "action_deltas", tuple(int(d) for d in self.action_deltas))
        for name in ("arrivals_per_day", "los", "sim_duration", "time_step"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.delay_to_change_beds < 0:
            raise ConfigError(f"delay_to_change_beds must be >= 0, got {self.delay_to_change_beds}")
        if not 0 <= self.target_reserve < 1:
            raise ConfigError(f"target_reserve must lie in [0, 1), got {self.target_reserve}")
        if 0 not in self.action_deltas:
            raise ConfigError("action_deltas must contain 0 (a no-op action must exist)")
        steps = self.sim_duration / self.time_step
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError("sim_duration must be an integer multiple of time_step")

    @property
    def occupancy_scale(self) -> float:
        """Long-run expected occupancy, used to normalise observations."""
        return self.arrivals_per_day * self.los

    @property
    def steps_per_episode(self) -> int:
        return round(self.sim_duration / self.time_step)

    @classmethod
    def from_dict(cls, values: dict) -> "HospitalConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)} (known: {sorted(known)})")
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "HospitalConfig":
        try:
            with open(path) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(values)


def calculate_reward(state: dict, config: HospitalConfig) -> float:
    """Negative absolute distance between spare beds and the target reserve.

    The target is `target_reserve` times the current patient count, kept
    real-valued (no rounding).
    """
    target_spare = config.target_reserve * state["patients"]
    return -abs(state["spare_beds"] - target_spare)


def get_observations(state: dict, config: HospitalConfig) -> np.ndarray:
    """Normalised observation vector derived from the state dictionary.

    Bed/patient counts scale by the long-run occupancy; weekday scales to
    [0, 1] (or expands to one-hot when configured).
    """
    scale = config.occupancy_scale
    counts = [
        state["beds"] / scale,
        state["patients"] / scale,
        state["spare_beds"] / scale,
        state["pending_bed_change"] / scale,
    ]
    if config.weekday_one_hot:
        day = np.zeros(7)
        day[state["weekday"]] = 1.0
        return np.concatenate([day, counts]).astype(np.float64)
    return np.array([state["weekday"] / 6.0] + counts, dtype=np.float64)


def islegal(state: dict, delta: int) -> bool:
    """A bed-change request is legal iff it cannot commit beds below zero."""
    return state["beds"] + state["pending_bed_change"] + delta >= 0


class HospitalEnv(Environment):
    """The bed-capacity simulation behind the episodic reset/step/render interface.

    One instance owns one event queue and one random stream; instances are
    independent and safe to run in parallel with each other.
    """

    def __init__(self, config: HospitalConfig | None = None, seed: int = 0):
        self.config = config or HospitalConfig()
        self._spec = EnvSpec(
            action_size=len(self.config.action_deltas),
            observation_size=11 if self.config.weekday_one_hot else 5,
            actions=self.config.action_deltas,
        )
        self._rng = RngStream(seed)
        self.debug_hook = None  # called as debug_hook(state) after every state change
        self.reset()

    @property
    def spec(self) -> EnvSpec:
        return self._spec

    @property
    def now(self) -> float:
        return self._events.now

    @property
    def arrivals_by_weekday(self) -> np.ndarray:
        """Arrival counts per weekday since the last reset (diagnostics)."""
        return self._arrivals_by_weekday

    # -- episodic interface -------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = RngStream(seed)
        self._events = EventQueue()
        self.state = {
            "weekday": 0,
            "beds": 0,
            "patients": 0,
            "spare_beds": 0,
            "pending_bed_change": 0,
        }
        self._terminal = False
        self._steps_taken = 0
        self._arrivals_by_weekday = np.zeros(7, dtype=np.int64)
        self._clamp_log = []
        self._events.schedule(0.0, self._admission_loop)
        self._load_patients()
        return self.get_observations()

    def step(self, action: int) -> StepResult:
        if self._terminal:
            raise EpisodeOverError("episode is over; call reset before stepping again")
        if not 0 <= action < self.action_size:
            raise IllegalActionError(
                f"action index {action} out of range [0, {self.action_size})"
            )
        delta = self.config.action_deltas[action]
        if not self.islegal(delta):
            raise IllegalActionError(
                f"illegal bed change {delta:+d}: beds={self.state['beds']}, "
                f"pending_bed_change={self.state['pending_bed_change']}"
            )
        self._adjust_pending_bed_change(delta)
        self._events.schedule(self.config.delay_to_change_beds, lambda: self._adjust_bed_numbers(delta))
        self._steps_taken += 1
        self._events.run_until(self._steps_taken * self.config.time_step)
        self._refresh_derived()
        observation = self.get_observations()
        self._terminal = self.now >= self.config.sim_duration - 1e-9
        reward = self.calculate_reward()
        info = {}
        if self._clamp_log:
            info["clamped_bed_changes"] = self._clamp_log
            self._clamp_log = []
        return StepResult(observation, reward, self._terminal, info)

    def render(self) -> str:
        st = self.state
        return (
            f"t={self.now:g} weekday={st['weekday']} beds={st['beds']} "
            f"patients={st['patients']} spare_beds={st['spare_beds']} "
            f"pending_bed_change={st['pending_bed_change']}"
        )

    # -- reward / observation / legality ------------------------------------

    def calculate_reward(self) -> float:
        return calculate_reward(self.state, self.config)

    def get_observations(self) -> np.ndarray:
        return get_observations(self.state, self.config)

    def islegal(self, delta: int) -> bool:
        return islegal(self.state, delta)

    def legal_action_mask(self) -> np.ndarray:
        return np.array([self.islegal(d) for d in self.config.action_deltas], dtype=bool)

    # -- internal processes --------------------------------------------------

    def _refresh_derived(self):
        st = self.state
        st["spare_beds"] = st["beds"] - st["patients"]
        st["weekday"] = int(self.now) % 7
        if self.debug_hook is not None:
            self.debug_hook(st)

    def _adjust_pending_bed_change(self, delta: int):
        self.state["pending_bed_change"] += delta
        self._refresh_derived()

    def _adjust_bed_numbers(self, delta: int):
        # Fires delay_to_change_beds after the request. Legal sequences can
        # never drive beds negative here (requests enact in FIFO order), but
        # the clamp keeps the invariant beds >= 0 unconditionally.
        st = self.state
        enacted = delta
        if st["beds"] + delta < 0:
            enacted = -st["beds"]
            self._clamp_log.append(
                {"time": self.now, "requested": delta, "enacted": enacted}
            )
        st["beds"] += enacted
        st["pending_bed_change"] -= delta
        self._refresh_derived()

    def _load_patients(self):
        # Initial load: long-term average occupancy, with beds opened in
        # lockstep so the hospital starts with zero spare beds.
        count = round(self.config.arrivals_per_day * self.config.los)
        for _ in range(count):
            self._start_patient_spell(is_initial_load=True)
            self.state["beds"] += 1
            self._refresh_derived()

    def _admission_loop(self):
        # One arrival now, then wait an inter-arrival gap whose mean reflects
        # the weekday at the moment of sampling.
        self._start_patient_spell(is_initial_load=False)
        weekday = int(self.now) % 7
        self._arrivals_by_weekday[weekday] += 1
        factor = WEEKDAY_ARRIVAL_FACTOR if weekday < 5 else WEEKEND_ARRIVAL_FACTOR
        gap = self._rng.exponential(1.0 / (self.config.arrivals_per_day * factor))
        self._events.schedule(gap, self._admission_loop)

    def _start_patient_spell(self, is_initial_load: bool):
        self.state["patients"] += 1
        self._refresh_derived()
        stay = self._rng.exponential(self.config.los)
        if is_initial_load:
            # Only the residual fraction of the stay remains for patients
            # already in the hospital at t=0.
            stay *= self._rng.uniform()
        self._events.schedule(stay, self._end_patient_spell)

    def _end_patient_spell(self):
        self.state["patients"] -= 1
        self._refresh_derived()
