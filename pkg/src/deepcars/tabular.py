"""Tabular epsilon-greedy Q-learning over the discrete distance-vector state."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoders import TabularState, encode_tabular
from .env import DeepCarsEnv, EnvConfig
from .metrics import RunMetrics, WINDOW_EPISODES
from .net import NumericError

_ZERO_Q = np.zeros(3)
_ZERO_Q.setflags(write=False)


@dataclass(frozen=True)
class TabularHyperparams:
    gamma: float = 0.9
    alpha: float = 0.1
    epsilon: float = 0.2
    train_steps: int = 50_000

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.train_steps < 0:
            raise ValueError(f"train_steps must be >= 0, got {self.train_steps}")


class QTable:
    """Map from TabularState to a 3-entry action-value array; absent keys read zero."""

    def __init__(self):
        self.entries: dict[TabularState, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def values(self, state: TabularState) -> np.ndarray:
        """Q-values for `state` without inserting it; absent states share a
        read-only zero array."""
        return self.entries.get(state, _ZERO_Q)

    def _writable(self, state: TabularState) -> np.ndarray:
        q = self.entries.get(state)
        if q is None:
            q = np.zeros(3)
            self.entries[state] = q
        return q


def q_update(
    table: QTable,
    s: TabularState,
    a: int,
    r: float,
    s_next: TabularState,
    terminal: bool,
    hp: TabularHyperparams,
) -> None:
    """Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') * [not terminal] - Q(s,a))."""
    if not math.isfinite(r):
        raise NumericError(f"non-finite reward {r}")
    q = table._writable(s)
    bootstrap = 0.0 if terminal else hp.gamma * float(table.values(s_next).max())
    q[a] += hp.alpha * (r + bootstrap - q[a])
    if not math.isfinite(q[a]):
        raise NumericError("Q-value became non-finite")


def select_action(
    table: QTable, s: TabularState, epsilon: float, rng: np.random.Generator
) -> int:
    """Uniform-random with probability epsilon, else argmax with lowest-code ties."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, 3))
    return int(np.argmax(table.values(s)))


def _roll_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63))


def train_tabular(
    config: EnvConfig, hp: TabularHyperparams, seed: int
) -> tuple[QTable, RunMetrics]:
    """Run epsilon-greedy Q-learning for hp.train_steps environment steps."""
    seq = np.random.SeedSequence(seed).spawn(2)
    action_rng = np.random.default_rng(seq[0])
    episode_rng = np.random.default_rng(seq[1])

    table = QTable()
    metrics = RunMetrics()
    env = DeepCarsEnv(config)
    state = env.reset(_roll_seed(episode_rng))
    s = encode_tabular(state)

    episode = 0
    episode_reward = 0.0
    window_rewards: list[float] = []
    for t in range(1, hp.train_steps + 1):
        a = select_action(table, s, hp.epsilon, action_rng)
        out = env.step(a)
        s_next = encode_tabular(out.next_state)
        collision = out.terminal and out.reward < 0
        # a timeout is not a true terminal state: keep the bootstrap term
        q_update(table, s, a, out.reward, s_next, collision, hp)

        metrics.add_step(t, episode, out.reward, hp.epsilon)
        metrics.passed += out.cars_passed_this_step
        if collision:
            # a collision ends the episode, so the episode counter is the delta
            metrics.collided += out.next_state.collided_count
        episode_reward += out.reward

        if out.terminal:
            window_rewards.append(episode_reward)
            if len(window_rewards) == WINDOW_EPISODES:
                metrics.add_window(
                    episode // WINDOW_EPISODES, float(np.mean(window_rewards))
                )
                window_rewards = []
            episode += 1
            episode_reward = 0.0
            state = env.reset(_roll_seed(episode_rng))
            s = encode_tabular(state)
        else:
            s = s_next
    return table, metrics


def evaluate_tabular(
    table: QTable, config: EnvConfig, steps: int, seed: int
) -> RunMetrics:
    """Greedy rollout for `steps` environment steps; fresh episode seeds from `seed`."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    episode_rng = np.random.default_rng(seed)
    metrics = RunMetrics()
    env = DeepCarsEnv(config)
    state = env.reset(_roll_seed(episode_rng))
    s = encode_tabular(state)
    episode = 0
    for t in range(1, steps + 1):
        a = select_action(table, s, 0.0, episode_rng)
        out = env.step(a)
        metrics.add_step(t, episode, out.reward, 0.0)
        metrics.passed += out.cars_passed_this_step
        if out.terminal and out.reward < 0:
            metrics.collided += out.next_state.collided_count
        if out.terminal:
            episode += 1
            state = env.reset(_roll_seed(episode_rng))
            s = encode_tabular(state)
        else:
            s = encode_tabular(out.next_state)
    return metrics


# ---------------------------------------------------------------------------
# persistence: one line per state, "<ints> | <q0> <q1> <q2>"


def save_qtable(table: QTable, path) -> None:
    with open(path, "w") as fh:
        for state in sorted(table.entries):
            ints = " ".join(
                str(v) for v in (state.ego_lane_id, *state.distances)
            )
            qs = " ".join(repr(float(q)) for q in table.entries[state])
            fh.write(f"{ints} | {qs}\n")


def load_qtable(path) -> QTable:
    table = QTable()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            left, sep, right = line.partition("|")
            if not sep:
                raise ValueError(f"{path}:{lineno}: missing '|' separator")
            try:
                ints = [int(v) for v in left.split()]
                qs = [float(v) for v in right.split()]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed record") from None
            if len(ints) < 2 or len(qs) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected ego+distances and 3 Q-values"
                )
            state = TabularState(ints[0], tuple(ints[1:]))
            table.entries[state] = np.array(qs)
    return table
