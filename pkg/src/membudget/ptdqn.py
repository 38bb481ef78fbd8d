"""DQN with the value function split into permanent and transient parts.

``Q(s, .) = Qp(s, .) + Qt(s, .)``.  Every environment step the transient
net takes a semi-gradient TD step on the combined value.  Every ``K``
steps the permanent net is regressed onto the combined value over the
replay buffer (targets fixed at the start of consolidation), then the
transient output layer is scaled by ``lambda``.  With no permanent units
the algorithm is plain DQN.

Networks are small numpy MLPs trained with plain SGD; there are no target
networks.  Hidden units of both nets plus replay slots make up the memory
budget.

Checkpoint format (all little-endian)::

    b"MBQP"  uint32 version (=1)  uint32 n_nets (=2)
    per net: uint32 n_layers, n_layers+1 uint32 widths,
             then per layer W (fan_in x fan_out float64, row-major), b (fan_out float64)

A net with a zero-width hidden layer is stored with its widths only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from membudget.core import ContractViolation, make_rng
from membudget.jellybean_env import JellyBeanWorld, VIEW
from membudget.memory_ledger import PtSplit

OBS_DIM = VIEW * VIEW * 3
N_ACTIONS = 4
_MAGIC = b"MBQP"
_VERSION = 1


class Mlp:
    """ReLU hidden layers, linear output.

    A net with any zero-width hidden layer has no parameters and maps every
    input to zeros.
    """

    def __init__(self, widths: Sequence[int], rng: Optional[np.random.Generator] = None):
        self.widths = tuple(int(w) for w in widths)
        if len(self.widths) < 2:
            raise ValueError("need at least input and output widths")
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        if self.empty:
            return
        rng = rng if rng is not None else make_rng(0)
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def empty(self) -> bool:
        return any(w == 0 for w in self.widths[1:-1])

    @property
    def hidden_units(self) -> int:
        return sum(self.widths[1:-1])

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        net = Mlp.__new__(Mlp)
        net.widths = self.widths
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.widths[0]:
            raise ContractViolation(
                f"input width {x.shape[-1]} does not match network input {self.widths[0]}")
        return x

    def forward(self, x) -> np.ndarray:
        x = self._check(x)
        if self.empty:
            return np.zeros(x.shape[:-1] + (self.widths[-1],))
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h

    __call__ = forward

    def forward_cache(self, x: np.ndarray):
        x = self._check(x)
        if self.empty:
            return np.zeros((x.shape[0], self.widths[-1])), None
        inputs = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h, inputs

    def backward(self, inputs, dout: np.ndarray) -> list[np.ndarray]:
        """Gradients in ``params()`` order, given d(loss)/d(output)."""
        if inputs is None:
            return []
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        delta = dout
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = inputs[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                # inputs[i] is relu(pre-activation); its positivity is the relu mask
                delta = (delta @ self.weights[i].T) * (inputs[i] > 0)
        return grads

    def sgd(self, grads: list[np.ndarray], lr: float) -> None:
        for p, g in zip(self.params(), grads):
            p -= lr * g

    def scale_output(self, factor: float) -> None:
        if not self.empty:
            self.weights[-1] *= factor
            self.biases[-1] *= factor


@dataclass
class QPair:
    permanent: Mlp
    transient: Mlp

    def __call__(self, x) -> np.ndarray:
        return self.permanent(x) + self.transient(x)

    @classmethod
    def from_split(cls, split: PtSplit, rng: np.random.Generator,
                   input_dim: int = OBS_DIM) -> "QPair":
        perm = Mlp((input_dim, *split.permanent_widths, N_ACTIONS), rng)
        trans = Mlp((input_dim, *split.transient_widths, N_ACTIONS), rng)
        return cls(perm, trans)


class ReplayBuffer:
    """FIFO ring of (obs, action, reward, next_obs)."""

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM):
        if capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.size = 0
        self._next = 0
        self.added = 0

    def __len__(self):
        return self.size

    def add(self, obs, action: int, reward: float, next_obs) -> None:
        i = self._next
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.added += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> "Batch":
        idx = rng.choice(self.size, size=min(batch_size, self.size), replace=False)
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx])

    def contents(self) -> "Batch":
        """Stored experiences, oldest first."""
        order = (np.arange(self.size) + (self._next if self.size == self.capacity else 0)) \
            % self.capacity
        return Batch(self.obs[order], self.actions[order], self.rewards[order],
                     self.next_obs[order])


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray

    def __len__(self):
        return len(self.actions)


def act(pair: QPair, obs, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy on the combined value; greedy ties go to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ContractViolation(f"epsilon {epsilon} outside [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(pair(obs)))


def td_targets(pair: QPair, batch: Batch, gamma: float) -> np.ndarray:
    return batch.rewards + gamma * pair(batch.next_obs).max(axis=1)


def transient_loss_and_grads(pair: QPair, obs: np.ndarray, actions: np.ndarray,
                             targets: np.ndarray):
    """Loss ``mean(0.5 * (Q(s,a) - y)**2)`` and its gradient for the transient params.

    Returns (loss, per-sample squared errors, grads).
    """
    n = len(actions)
    rows = np.arange(n)
    q_t, cache = pair.transient.forward_cache(obs)
    q = pair.permanent(obs) + q_t
    diff = q[rows, actions] - targets
    dout = np.zeros_like(q)
    dout[rows, actions] = diff / n
    grads = pair.transient.backward(cache, dout)
    return 0.5 * float(np.mean(diff ** 2)), diff ** 2, grads


def transient_update(pair: QPair, batch: Batch, gamma: float, lr: float) -> np.ndarray:
    """One SGD step on the transient net; returns per-experience squared TD errors."""
    if len(batch) == 0:
        raise ContractViolation("empty batch")
    targets = td_targets(pair, batch, gamma)
    _, sq, grads = transient_loss_and_grads(pair, batch.obs, batch.actions, targets)
    pair.transient.sgd(grads, lr)
    return sq


def consolidation_loss_and_grads(net: Mlp, obs: np.ndarray, targets: np.ndarray):
    """Loss ``mean over samples of 0.5 * sum over actions (net(s) - Y)**2``."""
    out, cache = net.forward_cache(obs)
    diff = out - targets
    grads = net.backward(cache, diff / len(obs))
    return 0.5 * float(np.mean(np.sum(diff ** 2, axis=1))), grads


def consolidate(pair: QPair, buffer: ReplayBuffer, lr_perm: float, lam: float, steps: int,
                batch_size: int = 16, rng: Optional[np.random.Generator] = None) -> list[float]:
    """Distil the combined value into the permanent net, then decay the transient output.

    Does nothing when the permanent net has no units.  Returns the
    regression loss of each minibatch.
    """
    if pair.permanent.empty:
        return []
    if len(buffer) == 0:
        raise ContractViolation("consolidation needs a non-empty buffer")
    rng = rng if rng is not None else make_rng(0)
    frozen = pair.permanent.copy()
    losses = []
    for _ in range(steps):
        batch = buffer.sample(batch_size, rng)
        targets = frozen(batch.obs) + pair.transient(batch.obs)
        loss, grads = consolidation_loss_and_grads(pair.permanent, batch.obs, targets)
        pair.permanent.sgd(grads, lr_perm)
        losses.append(loss)
    pair.transient.scale_output(lam)
    return losses


@dataclass
class AgentConfig:
    gamma: float = 0.9
    lr_transient: float = 0.01
    lr_permanent: float = 0.01
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 2000
    batch_size: int = 16
    consolidation_period: int = 15_000
    consolidation_steps: int = 20
    transient_decay: float = 0.0
    smoothing_window: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.transient_decay <= 1.0:
            raise ValueError("transient_decay must lie in [0, 1]")
        if self.batch_size < 1 or self.consolidation_period < 1:
            raise ValueError("batch_size and consolidation_period must be >= 1")

    def epsilon(self, t: int) -> float:
        if t >= self.epsilon_decay_steps:
            return self.epsilon_end
        frac = t / self.epsilon_decay_steps
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


def smooth(rewards: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over at most ``window`` most recent steps."""
    rewards = np.asarray(rewards, dtype=float)
    csum = np.concatenate(([0.0], np.cumsum(rewards)))
    idx = np.arange(1, len(rewards) + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


@dataclass
class ContinualResult:
    rewards: np.ndarray
    smoothed: np.ndarray
    pair: Optional[QPair] = field(default=None, repr=False)


def run_continual(env: JellyBeanWorld, split: PtSplit, config: AgentConfig, total_steps: int,
                  seed: int, learn: bool = True) -> ContinualResult:
    """Interact for ``total_steps`` and return the per-step reward trace.

    With ``learn=False`` the agent acts uniformly at random, which gives
    the random-walk baseline.
    """
    rng = make_rng(seed)
    pair = QPair.from_split(split, rng)
    buffer = ReplayBuffer(split.buffer_capacity)
    obs = env.reset().ravel()
    rewards = np.zeros(total_steps)
    for t in range(total_steps):
        eps = config.epsilon(t) if learn else 1.0
        a = act(pair, obs, eps, rng)
        next_obs, r = env.step(a)
        next_obs = next_obs.ravel()
        rewards[t] = r
        if learn:
            buffer.add(obs, a, r, next_obs)
            if len(buffer) >= config.batch_size:
                transient_update(pair, buffer.sample(config.batch_size, rng),
                                 config.gamma, config.lr_transient)
            if (t + 1) % config.consolidation_period == 0:
                consolidate(pair, buffer, config.lr_permanent, config.transient_decay,
                            config.consolidation_steps, config.batch_size, rng)
        obs = next_obs
    return ContinualResult(rewards, smooth(rewards, config.smoothing_window), pair)


def save_checkpoint(pair: QPair, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<II", _VERSION, 2))
        for net in (pair.permanent, pair.transient):
            n_layers = len(net.widths) - 1
            fh.write(struct.pack(f"<I{n_layers + 1}I", n_layers, *net.widths))
            for w, b in zip(net.weights, net.biases):
                fh.write(w.astype("<f8").tobytes(order="C"))
                fh.write(b.astype("<f8").tobytes())


def load_checkpoint(path) -> QPair:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint")
    version, n_nets = struct.unpack_from("<II", data, 4)
    if version != _VERSION or n_nets != 2:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    nets = []
    for _ in range(n_nets):
        (n_layers,) = struct.unpack_from("<I", data, off)
        off += 4
        widths = struct.unpack_from(f"<{n_layers + 1}I", data, off)
        off += 4 * (n_layers + 1)
        net = Mlp.__new__(Mlp)
        net.widths = tuple(widths)
        net.weights, net.biases = [], []
        if not net.empty:
            for fan_in, fan_out in zip(widths[:-1], widths[1:]):
                w = np.frombuffer(data, "<f8", fan_in * fan_out, off).reshape(fan_in, fan_out)
                off += 8 * fan_in * fan_out
                b = np.frombuffer(data, "<f8", fan_out, off)
                off += 8 * fan_out
                net.weights.append(w.astype(np.float64))
                net.biases.append(b.astype(np.float64))
        nets.append(net)
    return QPair(*nets)
