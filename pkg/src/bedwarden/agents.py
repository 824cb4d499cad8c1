"""Deep Q-Learning agent family.

One agent class covers the whole family through feature flags: double-Q
targets are always on (action selection by the policy net, evaluation by
the target net); dueling and noisy change the network internals;
prioritized changes the replay sampling; bootstrapped trains several
heads on bootstrap batches from a shared memory and bags their Q values
at evaluation. The named variants are fixed flag combinations; "combined"
honours whatever subset the config enables.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .des_core import RngStream
from .neural import AdamState, Architecture, QNetwork, copy_parameters, huber_loss, load_weights, save_weights
from .replay import ReplayMemory, Transition

__all__ = ["AgentConfig", "DQAgent", "epsilon_at", "VARIANTS", "AGENT_METADATA_FORMAT"]

AGENT_METADATA_FORMAT = "bedwarden-agent-1"

# variant -> (dueling, noisy, prioritized, bootstrapped)
VARIANTS = {
    "d2qn": (False, False, False, False),
    "d3qn": (True, False, False, False),
    "noisy_d3qn": (True, True, False, False),
    "per_d3qn": (True, False, True, False),
    "bootstrapped_d3qn": (True, False, False, True),
    "combined": None,
}


@dataclass
class AgentConfig:
    """Hyperparameters of a Q-learning agent.

    For variant "combined" the four feature flags are honoured as given
    (None means off); for the named variants they are derived and any
    explicit flag values are ignored.
    """

    variant: str = "d3qn"
    gamma: float = 0.99
    batch_size: int = 64
    learn_every: int = 1
    target_sync: int = 1
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 0.97
    n_heads: int = 5
    hidden: tuple = (48, 48)
    learning_rate: float = 3e-4
    memory_capacity: int = 50_000
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    per_beta_episodes: int = 100
    priority_epsilon: float = 1e-6
    dueling: bool | None = None
    noisy: bool | None = None
    prioritized: bool | None = None
    bootstrapped: bool | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"unknown agent variant {self.variant!r}; valid: {', '.join(VARIANTS)}"
            )
        if not 0 <= self.epsilon_min <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_min <= epsilon_start <= 1")
        if not 0 < self.epsilon_decay <= 1:
            raise ValueError("epsilon_decay must lie in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        self.hidden = tuple(int(h) for h in self.hidden)
        flags = VARIANTS[self.variant]
        if flags is None:
            flags = tuple(bool(v) for v in (self.dueling, self.noisy, self.prioritized, self.bootstrapped))
        self.dueling, self.noisy, self.prioritized, self.bootstrapped = flags

    @property
    def head_count(self) -> int:
        return self.n_heads if self.bootstrapped else 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "AgentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown agent config keys: {sorted(unknown)}")
        return cls(**values)


def epsilon_at(config: AgentConfig, episode: int) -> float:
    """Exploration rate for an episode index (0-based).

    Noisy variants rely on parameter noise instead of epsilon-greedy, so
    their epsilon is pinned to zero.
    """
    if episode < 0:
        raise ValueError("episode must be >= 0")
    if config.noisy:
        return 0.0
    return max(config.epsilon_min, config.epsilon_start * config.epsilon_decay**episode)


class DQAgent:
    """A Q-learning agent: policy/target nets, replay memory, exploration state."""

    def __init__(self, config: AgentConfig, observation_size: int, action_size: int, seed: int = 0):
        self.config = config
        self.observation_size = observation_size
        self.action_size = action_size
        self.seed = seed
        arch = Architecture(
            input_size=observation_size,
            action_size=action_size,
            hidden=config.hidden,
            dueling=config.dueling,
            noisy=config.noisy,
        )
        root = RngStream(seed)
        init_rng, self._rng, *self._head_rngs = root.spawn(2 + config.head_count)
        self.policy_nets = [QNetwork(arch, init_rng) for _ in range(config.head_count)]
        self.target_nets = [QNetwork(arch, init_rng) for _ in range(config.head_count)]
        for policy, target in zip(self.policy_nets, self.target_nets):
            copy_parameters(policy, target)
        self.optimizers = [
            AdamState(net.parameters(), learning_rate=config.learning_rate)
            for net in self.policy_nets
        ]
        self.memory = ReplayMemory(
            capacity=config.memory_capacity,
            mode="prioritized" if config.prioritized else "uniform",
            alpha=config.per_alpha,
            priority_epsilon=config.priority_epsilon,
        )
        self.episode = -1
        self.steps = 0
        self.epsilon = config.epsilon_start if not config.noisy else 0.0
        self.active_head = 0

    # -- episode lifecycle ---------------------------------------------------

    def begin_episode(self):
        """Advance the episode counter, refresh epsilon, pick the acting head."""
        self.episode += 1
        self.epsilon = epsilon_at(self.config, self.episode)
        if self.config.bootstrapped:
            self.active_head = int(self._rng.integers(0, self.config.head_count))
        else:
            self.active_head = 0

    def remember(self, transition: Transition):
        self.memory.push(transition)

    # -- acting ----------------------------------------------------------------

    def select_action(self, obs: np.ndarray, legal_mask: np.ndarray | None = None,
                      explore: bool = True) -> int:
        """Epsilon-greedy over legal actions; greedy reads the active policy head.

        Illegal actions are masked out of both the random draw and the
        argmax, so the agent can never emit one.
        """
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.observation_size,):
            raise ValueError(f"expected observation of length {self.observation_size}")
        if legal_mask is None:
            legal_mask = np.ones(self.action_size, dtype=bool)
        legal = np.flatnonzero(legal_mask)
        if legal.size == 0:
            raise ValueError("no legal action available")
        if explore and self.epsilon > 0 and self._rng.uniform() < self.epsilon:
            return int(legal[self._rng.integers(0, legal.size)])
        net = self.policy_nets[self.active_head]
        if self.config.noisy:
            if explore:
                net.resample_noise(self._rng)
            else:
                net.zero_noise()
        q = net.forward(obs[None, :])[0]
        q = np.where(legal_mask, q, -np.inf)
        return int(np.argmax(q))

    def evaluate_q(self, obs: np.ndarray) -> np.ndarray:
        """Deterministic Q vector: noise zeroed, heads averaged (bagging)."""
        obs = np.asarray(obs, dtype=np.float64)
        qs = []
        for net in self.policy_nets:
            if self.config.noisy:
                net.zero_noise()
            qs.append(net.forward(obs[None, :])[0])
        return np.mean(qs, axis=0)

    # -- learning ----------------------------------------------------------------

    def compute_targets(self, batch: list[Transition], head: int = 0) -> np.ndarray:
        """Double-Q targets: y = r, or r + gamma * Q_target(s', argmax_a Q_policy(s', a)).

        Noise is zeroed on both networks so targets are deterministic.
        """
        if not batch:
            raise ValueError("cannot compute targets for an empty batch")
        policy, target = self.policy_nets[head], self.target_nets[head]
        if self.config.noisy:
            policy.zero_noise()
            target.zero_noise()
        next_states = np.stack([t.next_state for t in batch])
        rewards = np.array([t.reward for t in batch])
        nonterminal = np.array([not t.terminal for t in batch], dtype=np.float64)
        best_actions = np.argmax(policy.forward(next_states), axis=1)
        rows = np.arange(len(batch))
        next_q = target.forward(next_states)[rows, best_actions]
        return rewards + self.config.gamma * next_q * nonterminal

    def _beta(self) -> float:
        horizon = max(1, self.config.per_beta_episodes - 1)
        frac = min(1.0, max(0, self.episode) / horizon)
        return self.config.per_beta0 + (1.0 - self.config.per_beta0) * frac

    def learn_step(self):
        """One gradient update per head; no-op until memory reaches batch size."""
        cfg = self.config
        if len(self.memory) < cfg.batch_size:
            return
        for head in range(cfg.head_count):
            indices = None
            weights = None
            if cfg.bootstrapped:
                batch = self.memory.sample_bootstrap(cfg.batch_size, self._head_rngs[head])
            elif cfg.prioritized:
                indices, batch, weights = self.memory.sample_prioritized(
                    cfg.batch_size, self._head_rngs[head], beta=self._beta()
                )
            else:
                indices, batch = self.memory.sample_uniform(cfg.batch_size, self._head_rngs[head])
            targets = self.compute_targets(batch, head)

            net = self.policy_nets[head]
            if cfg.noisy:
                net.resample_noise(self._rng)
            states = np.stack([t.state for t in batch])
            actions = np.array([t.action for t in batch])
            q = net.forward(states)
            rows = np.arange(len(batch))
            predictions = q[rows, actions]
            td_errors = predictions - targets
            _, grad = huber_loss(predictions, targets)
            if weights is not None:
                grad = grad * weights
            grad_q = np.zeros_like(q)
            grad_q[rows, actions] = grad
            net.backward(grad_q)
            self.optimizers[head].step(net.parameters(), net.gradients())
            if cfg.prioritized:
                self.memory.update_priorities(indices, td_errors)

    def sync_target(self):
        """Hard-copy each policy head into its own target head."""
        for policy, target in zip(self.policy_nets, self.target_nets):
            copy_parameters(policy, target)

    # -- persistence -----------------------------------------------------------

    def save(self, directory):
        """Write one weight file per policy head plus a metadata file."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        metadata = {
            "format": AGENT_METADATA_FORMAT,
            "variant": self.config.variant,
            "config": self.config.to_dict(),
            "episode": self.episode,
            "observation_size": self.observation_size,
            "action_size": self.action_size,
            "head_count": self.config.head_count,
        }
        with open(directory / "agent.json", "w") as fh:
            json.dump(metadata, fh, indent=2)
        for head, net in enumerate(self.policy_nets):
            save_weights(net, directory / f"policy_head_{head}.json")

    @classmethod
    def load(cls, directory) -> "DQAgent":
        directory = Path(directory)
        try:
            with open(directory / "agent.json") as fh:
                metadata = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read agent checkpoint {directory}: {exc}") from exc
        if metadata.get("format") != AGENT_METADATA_FORMAT:
            raise ValueError(f"unsupported agent checkpoint format {metadata.get('format')!r}")
        config = AgentConfig.from_dict(metadata["config"])
        agent = cls(config, metadata["observation_size"], metadata["action_size"])
        agent.episode = metadata["episode"]
        for head in range(config.head_count):
            net = load_weights(directory / f"policy_head_{head}.json")
            if net.architecture != agent.policy_nets[head].architecture:
                raise ValueError("checkpoint architecture does not match agent config")
            agent.policy_nets[head] = net
            copy_parameters(net, agent.target_nets[head])
        return agent
