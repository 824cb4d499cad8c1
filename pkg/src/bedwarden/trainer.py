"""Training and evaluation harness.

Runs the outer episode loop (reset, act, step, remember, learn; target
sync between episodes), records per-episode metrics and a per-step trace
of the last episode, and provides three non-learning baselines as
yardsticks. Memory and networks persist across episodes; only the
environment is reset.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .agents import AgentConfig, DQAgent
from .des_core import RngStream
from .hospital_env import HospitalConfig, HospitalEnv
from .replay import Transition

__all__ = [
    "TrainConfig",
    "EpisodeMetrics",
    "TraceRecord",
    "TrainResult",
    "train",
    "evaluate",
    "run_baseline",
    "write_metrics",
    "BASELINE_POLICIES",
    "METRICS_COLUMNS",
    "TRACE_COLUMNS",
]

METRICS_COLUMNS = ("episode", "epsilon", "mean_reward", "total_reward",
                   "final_beds", "final_patients", "seconds")
TRACE_COLUMNS = ("day", "weekday", "beds", "patients", "spare_beds",
                 "pending_bed_change", "action_delta", "reward")

BASELINE_POLICIES = ("random_legal", "always_zero", "rule_based")


@dataclass
class TrainConfig:
    episodes: int = 100
    env: HospitalConfig = field(default_factory=HospitalConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    env_seed: int = 0
    agent_seed: int = 1
    render_every: int | None = None
    out_dir: str | None = None
    trace_all: bool = False
    timing_in_csv: bool = False

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")


@dataclass
class EpisodeMetrics:
    episode: int
    epsilon: float
    mean_reward: float
    total_reward: float
    final_beds: int
    final_patients: int
    seconds: float


@dataclass
class TraceRecord:
    day: float
    weekday: int
    beds: int
    patients: int
    spare_beds: int
    pending_bed_change: int
    action_delta: int
    reward: float


class TrainResult(NamedTuple):
    metrics: list[EpisodeMetrics]
    agent: DQAgent
    trace: list[TraceRecord]


def _episode_loop(env, obs, choose_action, on_transition=None, render=False):
    """Drive one already-reset episode to terminal; returns (rewards, trace)."""
    rewards = []
    trace = []
    terminal = False
    while not terminal:
        action = choose_action(obs)
        result = env.step(action)
        if on_transition is not None:
            on_transition(Transition(obs, action, result.reward, result.observation, result.terminal))
        if render:
            print(env.render())
        rewards.append(result.reward)
        trace.append(TraceRecord(
            day=env.now,
            weekday=env.state["weekday"],
            beds=env.state["beds"],
            patients=env.state["patients"],
            spare_beds=env.state["spare_beds"],
            pending_bed_change=env.state["pending_bed_change"],
            action_delta=env.config.action_deltas[action],
            reward=result.reward,
        ))
        obs = result.observation
        terminal = result.terminal
    return rewards, trace


def _metrics_from_episode(episode, epsilon, rewards, env, seconds):
    return EpisodeMetrics(
        episode=episode,
        epsilon=epsilon,
        mean_reward=float(np.mean(rewards)),
        total_reward=float(np.sum(rewards)),
        final_beds=env.state["beds"],
        final_patients=env.state["patients"],
        seconds=seconds,
    )


def train(config: TrainConfig) -> TrainResult:
    """Train an agent on the hospital environment.

    Episode e resets the environment with seed env_seed + e, so runs are a
    pure function of (config, seeds). Returns per-episode metrics, the
    trained agent, and the step trace of the last episode (or of every
    episode concatenated when trace_all is set). When out_dir is set, also
    writes metrics.csv, trace.csv and a checkpoint/ directory.
    """
    env = HospitalEnv(config.env, seed=config.env_seed)
    agent = DQAgent(config.agent, env.observation_size, env.action_size, seed=config.agent_seed)
    metrics: list[EpisodeMetrics] = []
    kept_trace: list[TraceRecord] = []

    for episode in range(config.episodes):
        started = time.perf_counter()
        obs = env.reset(seed=config.env_seed + episode)
        agent.begin_episode()
        render = config.render_every is not None and episode % config.render_every == 0
        step_counter = {"n": 0}

        def choose(observation):
            return agent.select_action(observation, env.legal_action_mask(), explore=True)

        def on_transition(transition):
            agent.remember(transition)
            step_counter["n"] += 1
            if step_counter["n"] % agent.config.learn_every == 0:
                agent.learn_step()

        rewards, trace = _episode_loop(env, obs, choose, on_transition, render)
        if (episode + 1) % agent.config.target_sync == 0:
            agent.sync_target()
        metrics.append(_metrics_from_episode(
            episode, agent.epsilon, rewards, env, time.perf_counter() - started))
        if config.trace_all:
            kept_trace.extend(trace)
        else:
            kept_trace = trace

    if config.out_dir is not None:
        out_dir = Path(config.out_dir)
        write_metrics(metrics, kept_trace, out_dir, include_timing=config.timing_in_csv)
        agent.save(out_dir / "checkpoint")
    return TrainResult(metrics, agent, kept_trace)


def evaluate(checkpoint_dir, env_config: HospitalConfig, episodes: int, seed: int) -> list[EpisodeMetrics]:
    """Greedy evaluation of a saved agent: no exploration, no learning.

    Noise is zeroed and bootstrapped heads are bagged via evaluate_q; the
    checkpoint is never modified.
    """
    agent = DQAgent.load(checkpoint_dir)
    env = HospitalEnv(env_config, seed=seed)
    if env.observation_size != agent.observation_size or env.action_size != agent.action_size:
        raise ValueError(
            f"checkpoint expects obs/action sizes ({agent.observation_size}, "
            f"{agent.action_size}), environment has ({env.observation_size}, {env.action_size})"
        )
    metrics = []
    for episode in range(episodes):
        started = time.perf_counter()
        obs = env.reset(seed=seed + episode)

        def choose(observation):
            q = agent.evaluate_q(observation)
            q = np.where(env.legal_action_mask(), q, -np.inf)
            return int(np.argmax(q))

        rewards, _ = _episode_loop(env, obs, choose)
        metrics.append(_metrics_from_episode(
            episode, 0.0, rewards, env, time.perf_counter() - started))
    return metrics


def _rule_based_action(env: HospitalEnv) -> int:
    # Request the legal delta closest to the gap between the reserve-target
    # bed count and the beds already committed (current + pending).
    st = env.state
    desired = st["patients"] * (1.0 + env.config.target_reserve) - st["beds"] - st["pending_bed_change"]
    legal = [(abs(delta - desired), delta, i)
             for i, delta in enumerate(env.config.action_deltas) if env.islegal(delta)]
    legal.sort()
    return legal[0][2]


def run_baseline(policy: str, env_config: HospitalConfig, episodes: int, seed: int):
    """Run a non-learning baseline policy; returns (metrics, last-episode trace)."""
    if policy not in BASELINE_POLICIES:
        raise ValueError(f"unknown baseline {policy!r}; valid: {', '.join(BASELINE_POLICIES)}")
    env = HospitalEnv(env_config, seed=seed)
    policy_rng = RngStream([seed, 0xBA5E])
    zero_action = env_config.action_deltas.index(0)
    metrics = []
    trace: list[TraceRecord] = []
    for episode in range(episodes):
        started = time.perf_counter()
        obs = env.reset(seed=seed + episode)

        def choose(_observation):
            if policy == "always_zero":
                return zero_action
            if policy == "rule_based":
                return _rule_based_action(env)
            legal = np.flatnonzero(env.legal_action_mask())
            return int(legal[policy_rng.integers(0, legal.size)])

        rewards, trace = _episode_loop(env, obs, choose)
        metrics.append(_metrics_from_episode(
            episode, 0.0, rewards, env, time.perf_counter() - started))
    return metrics, trace


def _format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_metrics(metrics, trace, out_dir, include_timing: bool = False):
    """Write metrics.csv and trace.csv under out_dir.

    Floats are written with full round-trip precision. The seconds column
    holds wall-clock timings only when include_timing is set; by default it
    is zeroed so the file stays bitwise-reproducible for fixed seeds.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.csv"
    trace_path = out_dir / "trace.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for m in metrics:
            seconds = m.seconds if include_timing else 0.0
            writer.writerow([
                _format_number(m.episode),
                _format_number(m.epsilon),
                _format_number(m.mean_reward),
                _format_number(m.total_reward),
                _format_number(m.final_beds),
                _format_number(m.final_patients),
                _format_number(seconds),
            ])
        fh.flush()
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in trace:
            writer.writerow([
                _format_number(r.day),
                _format_number(r.weekday),
                _format_number(r.beds),
                _format_number(r.patients),
                _format_number(r.spare_beds),
                _format_number(r.pending_bed_change),
                _format_number(r.action_delta),
                _format_number(r.reward),
            ])
        fh.flush()
    return metrics_path, trace_path
