"""Wireless world model: learned dynamics/reward, imagined rollouts, filtering.

State is a history of H=4 frames, each frame = (normalized map power
estimate, 4 normalized feedback features).  The model maps (state, one-hot
action) to the next frame and a reward estimate, and serves two roles:
counterfactual action filtering, and a stand-in simulator for policy
updates that consume zero real-environment interactions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mcs, nets, policy as policy_mod
from .errors import ContractError, StagingError

HISTORY_LEN = 4
FRAME_DIM = 5
STATE_DIM = HISTORY_LEN * FRAME_DIM   # 20
WM_IN_DIM = STATE_DIM + mcs.N_ACTIONS  # 25
WM_OUT_DIM = FRAME_DIM + 1             # next frame + reward

DEFAULT_HORIZON = 5
DEFAULT_N_STARTS = 32
DEFAULT_BATCH = 64
REWARD_WEIGHT = 5.0
DEFAULT_SAFETY_FRACTION = 0.5


def make_frame(map_power_norm: float, fb_norm: np.ndarray) -> np.ndarray:
    return np.concatenate(([map_power_norm], fb_norm))


def initial_state(frame: np.ndarray) -> np.ndarray:
    """History filled with copies of the first observed frame, shape (20,)."""
    return np.tile(frame, HISTORY_LEN)


def push_frame(state: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Drop the oldest frame, append the newest (frames ordered oldest->newest)."""
    if state.shape != (STATE_DIM,) or frame.shape != (FRAME_DIM,):
        raise ContractError("bad state/frame shape")
    return np.concatenate((state[FRAME_DIM:], frame))


@dataclass
class ReplayBuffer:
    """Ring buffer of transitions with uniform with-replacement sampling."""
    capacity: int = 4096

    def __post_init__(self):
        self.states = np.zeros((self.capacity, STATE_DIM))
        self.actions = np.zeros(self.capacity, dtype=np.intp)
        self.rewards = np.zeros(self.capacity)
        self.next_frames = np.zeros((self.capacity, FRAME_DIM))
        self.insert_count = 0

    def __len__(self) -> int:
        return min(self.insert_count, self.capacity)

    def push(self, state: np.ndarray, action: int, reward: float,
             next_frame: np.ndarray) -> None:
        i = self.insert_count % self.capacity
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_frames[i] = next_frame
        self.insert_count += 1

    def sample(self, n: int, gen: np.random.Generator):
        if len(self) == 0:
            raise ContractError("cannot sample from an empty replay buffer")
        idx = gen.integers(0, len(self), size=n)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_frames[idx])


def build_wm_net(seed: int, hidden: list[int] | None = None) -> nets.Net:
    return nets.build_net(WM_IN_DIM, hidden or [64, 64], WM_OUT_DIM, seed)


def _wm_inputs(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    n = len(states)
    onehot = np.zeros((n, mcs.N_ACTIONS))
    onehot[np.arange(n), actions.astype(np.intp)] = 1.0
    return np.concatenate((states, onehot), axis=1)


def wm_predict(state: np.ndarray, action: int, wm: nets.Net) -> tuple[np.ndarray, float]:
    """Predicted next frame and reward (clamped to [0, max rate])."""
    out = nets.forward(wm, _wm_inputs(state[None, :], np.array([action])))[0]
    return out[:FRAME_DIM], float(np.clip(out[FRAME_DIM], 0.0, mcs.MAX_RATE))


def wm_predict_batch(states: np.ndarray, actions: np.ndarray, wm: nets.Net):
    out = nets.forward(wm, _wm_inputs(states, actions))
    return out[:, :FRAME_DIM], np.clip(out[:, FRAME_DIM], 0.0, mcs.MAX_RATE)


def wm_train_step(buffer: ReplayBuffer, wm: nets.Net, opt: nets.OptState,
                  gen: np.random.Generator, batch_size: int = DEFAULT_BATCH,
                  reward_weight: float = REWARD_WEIGHT) -> float:
    """One MSE step on (next frame, reward) targets; returns the loss value."""
    if len(buffer) < 1:
        raise ContractError("replay buffer is empty")
    n = min(batch_size, max(len(buffer), 1))
    states, actions, rewards, next_frames = buffer.sample(n, gen)
    x = _wm_inputs(states, actions)
    pred = nets.forward(wm, x)
    err_f = pred[:, :FRAME_DIM] - next_frames
    err_r = pred[:, FRAME_DIM] - rewards
    loss = float((err_f ** 2).mean() + reward_weight * (err_r ** 2).mean())
    gout = np.zeros_like(pred)
    gout[:, :FRAME_DIM] = 2.0 * err_f / (n * FRAME_DIM)
    gout[:, FRAME_DIM] = reward_weight * 2.0 * err_r / n
    nets.opt_step(wm, nets.backward(wm, x, gout), opt)
    return loss


def _policy_input_from_frame(frame: np.ndarray) -> np.ndarray:
    """Frame layout is (map est, fb x4); policy layout is (fb x4, est, flag)."""
    vec = np.zeros(policy_mod.POLICY_IN_DIM)
    vec[:4] = frame[1:]
    vec[4] = frame[0]
    vec[5] = 1.0 if frame[0] != 0.0 else 0.0
    return vec


def imagine_and_update_policy(buffer: ReplayBuffer, wm: nets.Net,
                              policy_net: nets.Net, baseline_net: nets.Net,
                              policy_opt: nets.OptState, baseline_opt: nets.OptState,
                              gen: np.random.Generator,
                              horizon: int = DEFAULT_HORIZON,
                              n_starts: int = DEFAULT_N_STARTS,
                              wm_trained: bool = True,
                              beta: float = policy_mod.ENTROPY_BETA,
                              epsilon: float = 0.0) -> int:
    """Stage-2 update: REINFORCE on world-model rollouts from real start states.

    Performs exactly n_starts * horizon wm_predict queries and zero real
    environment interactions.  Returns the number of imagined samples used.
    """
    if not wm_trained:
        raise StagingError("world model has not completed Stage-1 training")
    if len(buffer) == 0:
        raise ContractError("replay buffer is empty")
    states, _, _, _ = buffer.sample(n_starts, gen)
    inputs, actions, rewards, weights = [], [], [], []
    cur = states.copy()
    for _ in range(horizon):
        pol_in = np.stack([_policy_input_from_frame(s[-FRAME_DIM:]) for s in cur])
        pi = nets.softmax(nets.forward(policy_net, pol_in))
        behavior = pi
        if epsilon > 0.0:
            # imagined queries are free, so force coverage of rarely-tried
            # actions; a collapsed policy otherwise never probes the model
            behavior = (1.0 - epsilon) * pi + epsilon / mcs.N_ACTIONS
        u = gen.random(n_starts)
        acts = (np.cumsum(behavior, axis=1) < u[:, None]).sum(axis=1).clip(0, mcs.N_ACTIONS - 1)
        frames, rews = wm_predict_batch(cur, acts, wm)
        inputs.append(pol_in)
        actions.append(acts)
        rewards.append(rews)
        rows = np.arange(n_starts)
        weights.append(pi[rows, acts] / np.maximum(behavior[rows, acts], 1e-12))
        cur = np.concatenate((cur[:, FRAME_DIM:], frames), axis=1)
    batch = policy_mod.EpisodeBatch(np.concatenate(inputs),
                                    np.concatenate(actions),
                                    np.concatenate(rewards),
                                    np.concatenate(weights))
    policy_mod.reinforce_update(batch, policy_net, baseline_net,
                                policy_opt, baseline_opt, beta=beta)
    return n_starts * horizon


def counterfactual_filter(state: np.ndarray, proposed: int, wm: nets.Net,
                          safety_fraction: float = DEFAULT_SAFETY_FRACTION) -> int:
    """Replace the proposed action if its predicted reward is unsafely low.

    Returns proposed if predicted_reward(proposed) >= safety_fraction * best
    predicted reward, else the best-predicted action (ties to lower rate).
    """
    if not (0.0 < safety_fraction <= 1.0):
        raise ContractError("safety_fraction must lie in (0, 1]")
    states = np.repeat(state[None, :], mcs.N_ACTIONS, axis=0)
    _, rews = wm_predict_batch(states, np.arange(mcs.N_ACTIONS), wm)
    best = int(np.argmax(rews))
    if rews[proposed] >= safety_fraction * rews[best]:
        return proposed
    return best
