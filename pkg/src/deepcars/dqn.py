"""DQN and Double-DQN training: epsilon-greedy rollouts, experience replay,
periodic target-network sync, and two-cadence real-time validation with
best-model checkpointing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import net
from .encoders import dqn_state_size, encode_dqn
from .env import DeepCarsEnv, EnvConfig
from .metrics import RunMetrics, WINDOW_EPISODES, accuracy
from .net import MlpParams, NumericError
from .replay import Batch, ReplayBuffer, Transition

# validation episodes draw from a stream disjoint from training seeds
VALIDATION_SEED_XOR = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class DqnHyperparams:
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 50_000
    batch_size: int = 32
    replay_capacity: int = 50_000
    target_sync_period: int = 1_000
    train_steps: int = 500_000
    learn_start: int = 1_000
    double_q: bool = False
    hidden_layers: tuple = (16, 16)
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    fast_validation_period: int = 2_000
    fast_validation_episodes: int = 20
    deep_validation_period: int = 20_000
    deep_validation_episodes: int = 100

    def __post_init__(self):
        positive = (
            "epsilon_decay_steps",
            "batch_size",
            "replay_capacity",
            "target_sync_period",
            "learn_start",
            "fast_validation_period",
            "fast_validation_episodes",
            "deep_validation_period",
            "deep_validation_episodes",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.train_steps < 0:
            raise ValueError(f"train_steps must be >= 0, got {self.train_steps}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not self.hidden_layers or any(h < 1 for h in self.hidden_layers):
            raise ValueError(f"hidden_layers must be positive, got {self.hidden_layers}")


@dataclass(eq=False)
class Checkpoint:
    params: MlpParams
    mean_validation_reward: float
    training_step: int


class ValidationResult(NamedTuple):
    mean_reward: float
    accuracy_pct: float | None
    passed: int
    collided: int


def epsilon_at(hp: DqnHyperparams, step_index: int) -> float:
    """Linear schedule over step indices starting at 0."""
    if step_index >= hp.epsilon_decay_steps:
        return hp.epsilon_end
    frac = step_index / hp.epsilon_decay_steps
    return hp.epsilon_start + (hp.epsilon_end - hp.epsilon_start) * frac


def td_targets(
    batch: Batch,
    online: MlpParams,
    target: MlpParams,
    gamma: float,
    double_q: bool,
) -> np.ndarray:
    """Per-sample scalar targets: y = r for terminals, else the bootstrapped value.

    Standard DQN evaluates the target net's own best action; Double DQN picks
    the action with the online net and evaluates it with the target net
    (argmax ties resolve to the lowest action code in both cases).
    """
    q_target = net.forward(target, batch.next_states)
    if not np.all(np.isfinite(q_target)):
        raise NumericError("target network produced non-finite Q-values")
    if double_q:
        q_online = net.forward(online, batch.next_states)
        if not np.all(np.isfinite(q_online)):
            raise NumericError("online network produced non-finite Q-values")
        chosen = np.argmax(q_online, axis=1)
    else:
        chosen = np.argmax(q_target, axis=1)
    bootstrap = q_target[np.arange(len(chosen)), chosen]
    return np.where(batch.terminals, batch.rewards, batch.rewards + gamma * bootstrap)


def greedy_action(params: MlpParams, state_vec: np.ndarray) -> int:
    return int(np.argmax(net.forward(params, state_vec)))


def _roll_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63))


def validate(
    params: MlpParams, config: EnvConfig, episodes: int, seed: int
) -> ValidationResult:
    """Greedy rollouts on fresh environment instances; parameters untouched."""
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    rng = np.random.default_rng(seed)
    env = DeepCarsEnv(config)
    total_reward = 0.0
    passed = 0
    collided = 0
    for _ in range(episodes):
        state = env.reset(_roll_seed(rng))
        vec = encode_dqn(state)
        while True:
            out = env.step(greedy_action(params, vec))
            total_reward += out.reward
            passed += out.cars_passed_this_step
            if out.terminal:
                collided += out.next_state.collided_count
                break
            vec = encode_dqn(out.next_state)
    return ValidationResult(
        mean_reward=total_reward / episodes,
        accuracy_pct=accuracy(passed, collided),
        passed=passed,
        collided=collided,
    )


def evaluate_params(
    params: MlpParams, config: EnvConfig, steps: int, seed: int
) -> RunMetrics:
    """Greedy rollout for a fixed number of environment steps."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    rng = np.random.default_rng(seed)
    metrics = RunMetrics()
    env = DeepCarsEnv(config)
    vec = encode_dqn(env.reset(_roll_seed(rng)))
    episode = 0
    for t in range(1, steps + 1):
        out = env.step(greedy_action(params, vec))
        metrics.add_step(t, episode, out.reward, 0.0)
        metrics.passed += out.cars_passed_this_step
        if out.terminal:
            if out.reward < 0:
                metrics.collided += out.next_state.collided_count
            episode += 1
            vec = encode_dqn(env.reset(_roll_seed(rng)))
        else:
            vec = encode_dqn(out.next_state)
    return metrics


class DqnTrainer:
    """Owns one training run; `train_step()` advances it by one environment step."""

    def __init__(self, config: EnvConfig, hp: DqnHyperparams, seed: int):
        self.config = config
        self.hp = hp
        self.seed = seed
        state_dim = dqn_state_size(config)
        dims = [state_dim, *hp.hidden_layers, 3]

        seq = np.random.SeedSequence(seed).spawn(4)
        init_seed = int(np.random.default_rng(seq[0]).integers(0, 2**63))
        self.action_rng = np.random.default_rng(seq[1])
        self.episode_rng = np.random.default_rng(seq[2])
        self.replay_rng = np.random.default_rng(seq[3])
        self._val_master = seed ^ VALIDATION_SEED_XOR

        self.online = net.init_params(dims, init_seed)
        self.target = net.clone(self.online)
        self.opt = net.make_optimizer(self.online, hp.optimizer, hp.learning_rate)
        self.buffer = ReplayBuffer(hp.replay_capacity, state_dim)
        self.metrics = RunMetrics()
        self.best: Checkpoint | None = None

        self.env = DeepCarsEnv(config)
        self._vec = encode_dqn(self.env.reset(_roll_seed(self.episode_rng)))
        self.step_index = 0
        self.episode = 0
        self._episode_reward = 0.0
        self._window: list[float] = []

    # -- one full Algorithm-style iteration ---------------------------------

    def train_step(self) -> None:
        hp = self.hp
        t = self.step_index + 1
        eps = epsilon_at(hp, self.step_index)

        if self.action_rng.random() < eps:
            a = int(self.action_rng.integers(0, 3))
        else:
            a = greedy_action(self.online, self._vec)

        out = self.env.step(a)
        next_vec = encode_dqn(out.next_state)
        collision = out.terminal and out.reward < 0
        # timeouts bootstrap: they end the episode but are not true terminals
        self.buffer.push(Transition(self._vec, a, out.reward, next_vec, collision))

        self.metrics.add_step(t, self.episode, out.reward, eps)
        self.metrics.passed += out.cars_passed_this_step
        if collision:
            self.metrics.collided += out.next_state.collided_count
        self._episode_reward += out.reward

        if out.terminal:
            self._window.append(self._episode_reward)
            if len(self._window) == WINDOW_EPISODES:
                self.metrics.add_window(
                    self.episode // WINDOW_EPISODES, float(np.mean(self._window))
                )
                self._window = []
            self.episode += 1
            self._episode_reward = 0.0
            self._vec = encode_dqn(self.env.reset(_roll_seed(self.episode_rng)))
        else:
            self._vec = next_vec

        if len(self.buffer) >= hp.learn_start:
            self._gradient_step()

        if t % hp.target_sync_period == 0:
            net.clone_into(self.online, self.target)

        if t % hp.deep_validation_period == 0:
            self._validation_phase(t, hp.deep_validation_episodes)
        elif t % hp.fast_validation_period == 0:
            self._validation_phase(t, hp.fast_validation_episodes)

        self.step_index = t

    def _gradient_step(self) -> None:
        hp = self.hp
        batch = self.buffer.sample(hp.batch_size, self.replay_rng)
        if batch is None:
            return
        y = td_targets(batch, self.online, self.target, hp.gamma, hp.double_q)
        q = net.forward(self.online, batch.states)
        rows = np.arange(len(y))
        # squared TD error, averaged over the batch, on the taken actions only
        dout = np.zeros_like(q)
        dout[rows, batch.actions] = 2.0 * (q[rows, batch.actions] - y) / len(y)
        grad = net.backward(self.online, batch.states, dout)
        net.gradient_step(self.online, grad, self.opt)

    def _validation_phase(self, step: int, episodes: int) -> None:
        seed = int(
            np.random.default_rng(
                np.random.SeedSequence([self._val_master, step])
            ).integers(0, 2**63)
        )
        result = validate(self.online, self.config, episodes, seed)
        is_best = self.best is None or (
            result.mean_reward > self.best.mean_validation_reward
        )
        if is_best:
            self.best = Checkpoint(
                params=net.clone(self.online),
                mean_validation_reward=result.mean_reward,
                training_step=step,
            )
        self.metrics.add_validation(step, result.mean_reward, result.accuracy_pct, is_best)

    def run(self) -> tuple[Checkpoint, MlpParams, RunMetrics]:
        while self.step_index < self.hp.train_steps:
            self.train_step()
        if self.best is None:
            # short runs that never hit a validation period still get a checkpoint
            self._validation_phase(self.step_index, self.hp.fast_validation_episodes)
        return self.best, self.online, self.metrics


def train_dqn(
    config: EnvConfig, hp: DqnHyperparams, seed: int
) -> tuple[Checkpoint, MlpParams, RunMetrics]:
    """Full training loop; returns (best checkpoint, final params, metrics)."""
    return DqnTrainer(config, hp, seed).run()
