"""Reinforcement-learning solvers over compiled decision processes.

Two algorithms, one protocol: episodes start at the initial state, end at
the terminal state or after ``max_steps_per_episode`` steps, and admissible
actions are exactly the state's outbound slots (anything else is never
offered to the agent).  Exploration is epsilon-greedy with a linear decay
over the first chunk of training, greedy ties break to the lowest action
index, and every ``eval_interval`` episodes the current greedy policy plays
one evaluation episode whose total reward is appended to the learning
curve.  All randomness derives from named, purpose-split streams of the one
configured seed, so a run is exactly repeatable.

``tabular`` keeps one value per action slot (the hot episode loop lives in
``_kernels``); ``dqn`` trains the plain-numpy network from
:mod:`cybermdp.network` with uniform experience replay (a ring buffer, so
eviction is oldest-first), a hard-synced target copy, and vanilla SGD.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol as TypingProtocol

import numpy as np

from . import _kernels
from .mdp import Mdp
from .network import QNetwork, sgd_step, td_loss_and_gradients

ALGORITHMS = ("tabular", "dqn")


@dataclass(frozen=True)
class TrainConfig:
    """Training protocol knobs shared by both solvers.

    ``gamma`` of None means "use the process's own gamma"; setting it
    overrides the learning target only.  ``learning_rate_decay`` is a
    per-state-action polynomial decay exponent for the tabular solver
    (effective alpha = learning_rate / visit_count ** decay; 0 keeps alpha
    constant).  The epsilon schedule is linear from ``epsilon_start`` down
    to ``epsilon_end`` over the first ``epsilon_decay_episodes`` episodes
    (default: the first 80% of training), flat afterwards.
    """

    episodes: int
    algorithm: str = "tabular"
    max_steps_per_episode: int = 2500
    eval_interval: int = 4
    gamma: float | None = None
    learning_rate: float = 0.1
    learning_rate_decay: float = 0.0
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int | None = None
    replay_capacity: int = 10_000
    batch_size: int = 32
    target_sync_interval: int = 250
    hidden_layers: tuple[int, ...] = (64, 64)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ValueError("episodes must be positive")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.max_steps_per_episode < 1:
            raise ValueError("max_steps_per_episode must be positive")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be positive")
        if self.gamma is not None and not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.learning_rate_decay < 0.0:
            raise ValueError("learning_rate_decay must be non-negative")
        for name in ("epsilon_start", "epsilon_end"):
            eps = getattr(self, name)
            if not 0.0 <= eps <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        if self.epsilon_decay_episodes is not None and self.epsilon_decay_episodes < 1:
            raise ValueError("epsilon_decay_episodes must be positive")
        if self.replay_capacity < 1:
            raise ValueError("replay_capacity must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.batch_size > self.replay_capacity:
            raise ValueError("batch_size must not exceed replay_capacity")
        if self.target_sync_interval < 1:
            raise ValueError("target_sync_interval must be positive")
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("hidden layer sizes must be positive")
        object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))

    def epsilon_at(self, episode: int) -> float:
        """Exploration rate for a 0-based episode index."""

        span = self.epsilon_decay_episodes
        if span is None:
            span = max(1, int(round(0.8 * self.episodes)))
        frac = min(1.0, episode / span)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac

    def resolve_gamma(self, mdp: Mdp) -> float:
        return self.gamma if self.gamma is not None else mdp.gamma


@dataclass(frozen=True)
class Transition:
    """One environment step; done holds exactly when the terminal state was
    entered (a failed attempt that stays put is never done)."""

    state: int
    action: int
    reward: float
    next_state: int
    done: bool


def epsilon_greedy(q_row: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Pick an action index from one state's action values.

    With probability epsilon: uniform over the row; otherwise the argmax,
    ties to the lowest index.  Raises on an empty row (no admissible
    actions) and on epsilon outside [0, 1].
    """

    q_row = np.asarray(q_row)
    if q_row.size == 0:
        raise ValueError("no admissible actions")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(0, q_row.size))
    return int(np.argmax(q_row))


def q_update(
    q_value: float,
    reward: float,
    max_next: float,
    alpha: float,
    gamma: float,
    done: bool,
) -> float:
    """One tabular backup: q + alpha * (r + gamma * max_next * (1 - done) - q)."""

    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    target = reward + gamma * max_next * (0.0 if done else 1.0)
    return q_value + alpha * (target - q_value)


class QFunction(TypingProtocol):
    """Anything that can score a state's admissible actions."""

    def action_values(self, state: int) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class TabularQ:
    """Flat per-slot action values aligned with an Mdp's action arrays."""

    action_offsets: np.ndarray
    values: np.ndarray

    def action_values(self, state: int) -> np.ndarray:
        lo = int(self.action_offsets[state])
        hi = int(self.action_offsets[state + 1])
        return self.values[lo:hi]


@dataclass(frozen=True, eq=False)
class DqnQ:
    """Network-backed action values, trimmed to each state's slot count."""

    net: QNetwork
    action_counts: np.ndarray

    def action_values(self, state: int) -> np.ndarray:
        return self.net.q_row(state)[: int(self.action_counts[state])]


class ReplayBuffer:
    """Uniform experience replay over a fixed-size ring (oldest evicted)."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._states = np.zeros(capacity, dtype=np.int64)
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._rewards = np.zeros(capacity, dtype=np.float64)
        self._next_states = np.zeros(capacity, dtype=np.int64)
        self._done = np.zeros(capacity, dtype=bool)
        self._size = 0
        self._cursor = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        i = self._cursor
        self._states[i] = t.state
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._next_states[i] = t.next_state
        self._done[i] = t.done
        self._cursor = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform sample with replacement; arrays (s, a, r, s2, done)."""

        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return (
            self._states[idx],
            self._actions[idx],
            self._rewards[idx],
            self._next_states[idx],
            self._done[idx],
        )


LearningCurve = tuple[tuple[int, float], ...]


@dataclass(frozen=True, eq=False)
class TrainResult:
    """Trained value function plus the evaluation learning curve
    ((episode number, greedy total reward) pairs)."""

    q: QFunction
    curve: LearningCurve


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    """Purpose-split generators: (init, train, eval)."""

    root = np.random.SeedSequence(seed)
    children = root.spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def _greedy_eval_total(
    mdp: Mdp, q_values: np.ndarray, max_steps: int, rng: np.random.Generator
) -> float:
    out_state = np.empty(max_steps, dtype=np.int64)
    out_slot = np.empty(max_steps, dtype=np.int64)
    out_reward = np.empty(max_steps, dtype=np.float64)
    out_next = np.empty(max_steps, dtype=np.int64)
    _, total, _ = _kernels.greedy_rollout_kernel(
        mdp.action_offsets,
        mdp.action_dest,
        mdp.action_success,
        mdp.action_reward,
        q_values,
        mdp.initial_state,
        mdp.terminal_state,
        max_steps,
        rng,
        out_state,
        out_slot,
        out_reward,
        out_next,
    )
    return float(total)


def _train_tabular(mdp: Mdp, cfg: TrainConfig) -> TrainResult:
    _, rng_train, rng_eval = _streams(cfg.seed)
    gamma = cfg.resolve_gamma(mdp)
    q = np.zeros(mdp.num_action_slots, dtype=np.float64)
    counts = np.zeros(mdp.num_action_slots, dtype=np.float64)
    curve: list[tuple[int, float]] = []
    for episode in range(cfg.episodes):
        _kernels.q_episode_kernel(
            mdp.action_offsets,
            mdp.action_dest,
            mdp.action_success,
            mdp.action_reward,
            gamma,
            mdp.terminal_state,
            q,
            counts,
            cfg.learning_rate,
            cfg.learning_rate_decay,
            cfg.epsilon_at(episode),
            cfg.max_steps_per_episode,
            mdp.initial_state,
            rng_train,
        )
        if (episode + 1) % cfg.eval_interval == 0:
            total = _greedy_eval_total(mdp, q, cfg.max_steps_per_episode, rng_eval)
            curve.append((episode + 1, total))
    q.setflags(write=False)
    return TrainResult(
        q=TabularQ(action_offsets=mdp.action_offsets, values=q),
        curve=tuple(curve),
    )


def _dqn_eval_total(
    mdp: Mdp,
    net: QNetwork,
    action_counts: np.ndarray,
    max_steps: int,
    rng: np.random.Generator,
) -> float:
    total = 0.0
    s = mdp.initial_state
    for _ in range(max_steps):
        n_a = int(action_counts[s])
        if n_a == 0:
            break
        a = int(np.argmax(net.q_row(s)[:n_a]))
        slot = int(mdp.action_offsets[s]) + a
        if rng.random() < mdp.action_success[slot]:
            s2 = int(mdp.action_dest[slot])
            total += float(mdp.action_reward[slot])
        else:
            s2 = s
        s = s2
        if s == mdp.terminal_state:
            break
    return total


def _train_dqn(mdp: Mdp, cfg: TrainConfig) -> TrainResult:
    rng_init, rng_train, rng_eval = _streams(cfg.seed)
    gamma = cfg.resolve_gamma(mdp)
    action_counts = np.diff(mdp.action_offsets)
    max_actions = int(action_counts.max()) if action_counts.size else 1
    net = QNetwork(
        num_states=mdp.num_states,
        num_actions=max_actions,
        hidden_sizes=cfg.hidden_layers,
        rng=rng_init,
    )
    target = net.copy()
    replay = ReplayBuffer(cfg.replay_capacity)
    # (num_states, max_actions) admissibility mask, indexed by next state.
    mask = np.arange(max_actions)[None, :] < action_counts[:, None]
    steps_done = 0
    curve: list[tuple[int, float]] = []
    for episode in range(cfg.episodes):
        epsilon = cfg.epsilon_at(episode)
        s = mdp.initial_state
        for _ in range(cfg.max_steps_per_episode):
            n_a = int(action_counts[s])
            if n_a == 0:
                break
            a = epsilon_greedy(net.q_row(s)[:n_a], epsilon, rng_train)
            slot = int(mdp.action_offsets[s]) + a
            if rng_train.random() < mdp.action_success[slot]:
                s2 = int(mdp.action_dest[slot])
                reward = float(mdp.action_reward[slot])
            else:
                s2 = s
                reward = 0.0
            done = s2 == mdp.terminal_state
            replay.push(Transition(s, a, reward, s2, done))
            if len(replay) >= cfg.batch_size:
                states, actions, rewards, next_states, dones = replay.sample(
                    cfg.batch_size, rng_train
                )
                _, grads = td_loss_and_gradients(
                    net,
                    target,
                    states,
                    actions,
                    rewards,
                    next_states,
                    dones,
                    mask[next_states],
                    gamma,
                )
                sgd_step(net, grads, cfg.learning_rate)
            steps_done += 1
            if steps_done % cfg.target_sync_interval == 0:
                target.load_from(net)
            s = s2
            if done:
                break
        if (episode + 1) % cfg.eval_interval == 0:
            total = _dqn_eval_total(
                mdp, net, action_counts, cfg.max_steps_per_episode, rng_eval
            )
            curve.append((episode + 1, total))
    return TrainResult(
        q=DqnQ(net=net, action_counts=action_counts), curve=tuple(curve)
    )


def train(mdp: Mdp, cfg: TrainConfig) -> TrainResult:
    """Train one agent on one process under the shared episode protocol."""

    if cfg.algorithm == "tabular":
        return _train_tabular(mdp, cfg)
    return _train_dqn(mdp, cfg)
