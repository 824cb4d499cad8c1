"""Small dense-network stack for the Q-learning agents.

Plain and noisy (factorised Gaussian) dense layers, an optional dueling
head, Huber loss and Adam, all in float64 numpy with analytic backprop.
Networks are tiny, so determinism and gradient-check fidelity matter more
than speed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .des_core import RngStream

__all__ = [
    "Architecture",
    "DenseLayer",
    "NoisyDenseLayer",
    "QNetwork",
    "AdamState",
    "huber_loss",
    "copy_parameters",
    "save_weights",
    "load_weights",
    "WeightFormatError",
    "WEIGHTS_FORMAT",
]

WEIGHTS_FORMAT = "bedwarden-weights-1"

NOISY_SIGMA_INIT = 0.5  # sigma0 / sqrt(fan_in) initialisation for noisy layers


class WeightFormatError(ValueError):
    """Raised when a weight file is malformed or does not match expectations."""


def _kaiming_uniform(rng: RngStream, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return (rng.generator.random(shape) * 2.0 - 1.0) * bound


def _scale_noise(eps: np.ndarray) -> np.ndarray:
    # f(x) = sign(x) * sqrt(|x|), the factorised-noise transform.
    return np.sign(eps) * np.sqrt(np.abs(eps))


class DenseLayer:
    """Fully connected layer y = act(x W^T + b), weights stored [out x in]."""

    noisy = False

    def __init__(self, in_size: int, out_size: int, activation: str, rng: RngStream):
        if activation not in ("relu", "identity"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.in_size = in_size
        self.out_size = out_size
        self.activation = activation
        self.weights = _kaiming_uniform(rng, in_size, (out_size, in_size))
        self.biases = np.zeros(out_size)
        self.grads = {}
        self._cache = None

    def parameters(self):
        return [("weights", self.weights), ("biases", self.biases)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.weights.T + self.biases
        self._cache = (x, z)
        return np.maximum(z, 0.0) if self.activation == "relu" else z

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        x, z = self._cache
        dz = grad_out * (z > 0) if self.activation == "relu" else grad_out
        self.grads = {"weights": dz.T @ x, "biases": dz.sum(axis=0)}
        return dz @ self.weights


class NoisyDenseLayer:
    """Dense layer with learned factorised Gaussian noise on weights and biases.

    Effective weight = mu_w + sigma_w * (f(eps_out) outer f(eps_in)) with
    f(x) = sign(x) sqrt(|x|). With all eps at zero the layer collapses to
    the deterministic mu-only layer.
    """

    noisy = True

    def __init__(self, in_size: int, out_size: int, activation: str, rng: RngStream):
        if activation not in ("relu", "identity"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.in_size = in_size
        self.out_size = out_size
        self.activation = activation
        self.mu_w = _kaiming_uniform(rng, in_size, (out_size, in_size))
        self.sigma_w = np.full((out_size, in_size), NOISY_SIGMA_INIT / np.sqrt(in_size))
        self.mu_b = np.zeros(out_size)
        self.sigma_b = np.full(out_size, NOISY_SIGMA_INIT / np.sqrt(in_size))
        self.eps_in = np.zeros(in_size)
        self.eps_out = np.zeros(out_size)
        self.grads = {}
        self._cache = None

    def parameters(self):
        return [
            ("mu_w", self.mu_w),
            ("sigma_w", self.sigma_w),
            ("mu_b", self.mu_b),
            ("sigma_b", self.sigma_b),
        ]

    def resample_noise(self, rng: RngStream):
        self.eps_in = rng.standard_normal(self.in_size)
        self.eps_out = rng.standard_normal(self.out_size)

    def zero_noise(self):
        self.eps_in = np.zeros(self.in_size)
        self.eps_out = np.zeros(self.out_size)

    def _noise_terms(self):
        f_in = _scale_noise(self.eps_in)
        f_out = _scale_noise(self.eps_out)
        return np.outer(f_out, f_in), f_out

    def forward(self, x: np.ndarray) -> np.ndarray:
        noise_w, noise_b = self._noise_terms()
        weights = self.mu_w + self.sigma_w * noise_w
        biases = self.mu_b + self.sigma_b * noise_b
        z = x @ weights.T + biases
        self._cache = (x, z, weights, noise_w, noise_b)
        return np.maximum(z, 0.0) if self.activation == "relu" else z

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        x, z, weights, noise_w, noise_b = self._cache
        dz = grad_out * (z > 0) if self.activation == "relu" else grad_out
        dw = dz.T @ x
        db = dz.sum(axis=0)
        self.grads = {
            "mu_w": dw,
            "sigma_w": dw * noise_w,
            "mu_b": db,
            "sigma_b": db * noise_b,
        }
        return dz @ weights


@dataclass(frozen=True)
class Architecture:
    """Shape descriptor of a Q-network; also the weight-file header."""

    input_size: int
    action_size: int
    hidden: tuple = (48, 48)
    dueling: bool = False
    noisy: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_size < 1 or self.action_size < 1 or not self.hidden:
            raise ValueError("input_size, action_size and hidden sizes must be positive")

    @classmethod
    def from_dict(cls, values: dict) -> "Architecture":
        return cls(**values)


class QNetwork:
    """Observation -> per-action Q values.

    Body: dense hidden layers with relu. Head: one linear output layer, or
    a dueling pair of streams combined as Q = V + A - mean(A). With
    `noisy`, every layer after the first hidden layer uses factorised
    Gaussian noise.
    """

    def __init__(self, architecture: Architecture, rng: RngStream):
        self.architecture = architecture
        arch = architecture

        def make_layer(i, in_size, out_size, activation):
            cls = NoisyDenseLayer if (arch.noisy and i > 0) else DenseLayer
            return cls(in_size, out_size, activation, rng)

        sizes = (arch.input_size,) + arch.hidden
        self.body = [
            make_layer(i, sizes[i], sizes[i + 1], "relu") for i in range(len(arch.hidden))
        ]
        last = arch.hidden[-1]
        if arch.dueling:
            self.value_layer = make_layer(len(self.body), last, 1, "identity")
            self.advantage_layer = make_layer(len(self.body), last, arch.action_size, "identity")
            self._head = (self.value_layer, self.advantage_layer)
        else:
            self.output_layer = make_layer(len(self.body), last, arch.action_size, "identity")
            self._head = (self.output_layer,)
        self._forward_done = False

    @property
    def layers(self):
        return list(self.body) + list(self._head)

    def parameter_items(self):
        items = []
        for i, layer in enumerate(self.body):
            items.extend((f"body{i}.{name}", arr) for name, arr in layer.parameters())
        if self.architecture.dueling:
            items.extend((f"value.{n}", a) for n, a in self.value_layer.parameters())
            items.extend((f"advantage.{n}", a) for n, a in self.advantage_layer.parameters())
        else:
            items.extend((f"output.{n}", a) for n, a in self.output_layer.parameters())
        return items

    def parameters(self):
        return [arr for _, arr in self.parameter_items()]

    def gradients(self):
        grads = []
        for layer in self.layers:
            grads.extend(layer.grads[name] for name, _ in layer.parameters())
        return grads

    def forward(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.architecture.input_size:
            raise ValueError(
                f"expected batch of shape [B, {self.architecture.input_size}], got {batch.shape}"
            )
        h = batch
        for layer in self.body:
            h = layer.forward(h)
        if self.architecture.dueling:
            value = self.value_layer.forward(h)
            advantage = self.advantage_layer.forward(h)
            q = value + advantage - advantage.mean(axis=1, keepdims=True)
        else:
            q = self.output_layer.forward(h)
        self._forward_done = True
        return q

    def backward(self, grad_q: np.ndarray):
        """Accumulate parameter gradients for the loss gradient dL/dQ."""
        if not self._forward_done:
            raise RuntimeError("backward called before forward")
        if self.architecture.dueling:
            grad_adv = grad_q - grad_q.mean(axis=1, keepdims=True)
            grad_value = grad_q.sum(axis=1, keepdims=True)
            grad_h = self.value_layer.backward(grad_value)
            grad_h = grad_h + self.advantage_layer.backward(grad_adv)
        else:
            grad_h = self.output_layer.backward(grad_q)
        for layer in reversed(self.body):
            grad_h = layer.backward(grad_h)
        self._forward_done = False

    # -- noise control -----------------------------------------------------

    def _noisy_layers(self):
        layers = [layer for layer in self.layers if layer.noisy]
        if not layers:
            raise RuntimeError("network has no noisy layers")
        return layers

    def resample_noise(self, rng: RngStream):
        for layer in self._noisy_layers():
            layer.resample_noise(rng)

    def zero_noise(self):
        for layer in self._noisy_layers():
            layer.zero_noise()


def huber_loss(pred: np.ndarray, target: np.ndarray, kappa: float = 1.0):
    """Mean Huber loss and its gradient with respect to `pred`.

    Quadratic within |error| <= kappa, linear outside; the gradient is the
    clamped error divided by the element count.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    error = pred - target
    abs_error = np.abs(error)
    quadratic = 0.5 * error**2
    linear = kappa * (abs_error - 0.5 * kappa)
    loss = float(np.mean(np.where(abs_error <= kappa, quadratic, linear)))
    grad = np.clip(error, -kappa, kappa) / error.size
    return loss, grad


class AdamState:
    """Bias-corrected Adam with per-parameter moment accumulators."""

    def __init__(self, params, learning_rate: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        """One Adam update, applied to `params` in place."""
        if len(params) != len(self.m):
            raise ValueError("parameter count does not match optimizer state")
        for p, g, m in zip(params, grads, self.m):
            if p.shape != g.shape or p.shape != m.shape:
                raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def copy_parameters(src: QNetwork, dst: QNetwork):
    """Deep-copy learned parameters from src to dst (architectures must match)."""
    if src.architecture != dst.architecture:
        raise ValueError(
            f"architecture mismatch: {src.architecture} vs {dst.architecture}"
        )
    for (_, s), (_, d) in zip(src.parameter_items(), dst.parameter_items()):
        d[...] = s


def save_weights(net: QNetwork, path):
    """Write architecture and parameters as self-describing JSON."""
    payload = {
        "format": WEIGHTS_FORMAT,
        "architecture": asdict(net.architecture),
        "parameters": {name: arr.tolist() for name, arr in net.parameter_items()},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_weights(path) -> QNetwork:
    """Rebuild a QNetwork from a weight file written by save_weights."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"cannot read weight file {path}: {exc}") from exc
    if payload.get("format") != WEIGHTS_FORMAT:
        raise WeightFormatError(
            f"unsupported weight format {payload.get('format')!r} (expected {WEIGHTS_FORMAT})"
        )
    try:
        arch = Architecture.from_dict(payload["architecture"])
        stored = payload["parameters"]
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFormatError(f"malformed weight file {path}: {exc}") from exc
    net = QNetwork(arch, RngStream(0))
    for name, arr in net.parameter_items():
        if name not in stored:
            raise WeightFormatError(f"weight file {path} is missing parameter {name}")
        values = np.asarray(stored[name], dtype=np.float64)
        if values.shape != arr.shape:
            raise WeightFormatError(
                f"parameter {name} has shape {values.shape}, expected {arr.shape}"
            )
        arr[...] = values
    return net
