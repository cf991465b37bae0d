"""MCS agent: map encoder, softmax policy over modulation orders, REINFORCE.

The policy input has a fixed layout of 6 entries regardless of which expert
ran: 4 normalized feedback features, the normalized map power estimate (0
when absent), and a presence flag.  One policy therefore serves both the
pilot-only and pilot+map branches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mcs, nets
from .channel import FeedbackFeatures
from .errors import ContractError, TrainingError

# fixed affine normalizations (dB / dBm ranges logged with every run)
FB_CENTER_DB = 5.0
FB_SCALE_DB = 20.0
FB_STD_SCALE_DB = 10.0
POWER_CENTER_DBM = -85.0
POWER_SCALE_DB = 25.0

POOLED_RES = 16
ENCODER_IN_DIM = 5 * POOLED_RES * POOLED_RES  # 1280
POLICY_IN_DIM = 6

# a 3x3 location blob mean-pooled over an 8x8 block shrinks to 9/64; rescale
# the mask channels so blob cells are O(1) like the RGB background
MASK_CHANNEL_GAIN = 64.0 / 9.0

ENTROPY_BETA = 0.01


def normalize_feedback(fb: FeedbackFeatures) -> np.ndarray:
    return np.array([
        (fb.mean_db - FB_CENTER_DB) / FB_SCALE_DB,
        fb.std_db / FB_STD_SCALE_DB,
        (fb.p10_db - FB_CENTER_DB) / FB_SCALE_DB,
        (fb.p90_db - FB_CENTER_DB) / FB_SCALE_DB,
    ])


def normalize_power_dbm(p: float) -> float:
    return (p - POWER_CENTER_DBM) / POWER_SCALE_DB


def denormalize_power(x: float) -> float:
    return x * POWER_SCALE_DB + POWER_CENTER_DBM


def policy_input(fb: FeedbackFeatures, map_power_dbm: float | None) -> np.ndarray:
    """6-entry input vector; missing map estimate encoded as (0, flag 0)."""
    vec = np.zeros(POLICY_IN_DIM)
    vec[:4] = normalize_feedback(fb)
    if map_power_dbm is not None:
        vec[4] = normalize_power_dbm(map_power_dbm)
        vec[5] = 1.0
    return vec


# ---------------------------------------------------------------- map encoder

def pool_raster(raster: np.ndarray) -> np.ndarray:
    """Average-pool each 128x128 channel to 16x16 and flatten to 1280 entries."""
    c, h, w = raster.shape
    f = h // POOLED_RES
    pooled = raster.reshape(c, POOLED_RES, f, POOLED_RES, f).mean(axis=(2, 4))
    return pooled.reshape(-1)


def encoder_features(raster: np.ndarray) -> np.ndarray:
    """Pooled raster with mask channels rescaled; the encoder's input layout."""
    x = pool_raster(raster).copy()
    n_rgb = 3 * POOLED_RES * POOLED_RES
    x[n_rgb:] *= MASK_CHANNEL_GAIN
    return x


def encode_map(raster: np.ndarray, encoder: nets.Net) -> float:
    """Estimated received power in dBm from the 5-channel aerial raster."""
    out = nets.forward(encoder, encoder_features(raster))
    return denormalize_power(float(out[0]))


def pretrain_map_encoder(dataset: list[tuple[np.ndarray, float]], encoder: nets.Net,
                         lr: float = 3e-3, batch_size: int = 32,
                         max_epochs: int = 400, patience: int = 15,
                         seed: int = 0) -> tuple[nets.Net, list[float]]:
    """MSE regression of normalized power targets; early stop on held-out RMSE.

    Returns the best checkpoint and the held-out RMSE trace (dBm units).
    """
    from . import rng

    if len(dataset) < 2:
        raise ContractError("encoder pretraining needs at least 2 samples")
    gen = rng.stream(seed, "encoder-pretrain")
    x = np.stack([encoder_features(r) for r, _ in dataset])
    y = np.array([normalize_power_dbm(p) for _, p in dataset])

    perm = gen.permutation(len(x))
    n_val = max(1, len(x) // 5)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    xv, yv = x[val_idx], y[val_idx]
    xt, yt = x[train_idx], y[train_idx]

    opt = nets.OptState(lr=lr)
    best = encoder.copy()
    best_rmse = np.inf
    stale = 0
    trace: list[float] = []
    for _ in range(max_epochs):
        order = gen.permutation(len(xt))
        for start in range(0, len(xt), batch_size):
            idx = order[start:start + batch_size]
            xb, yb = xt[idx], yt[idx]
            pred = nets.forward(encoder, xb)[:, 0]
            gout = (2.0 * (pred - yb) / len(idx))[:, None]
            grads = nets.backward(encoder, xb, gout)
            nets.opt_step(encoder, grads, opt)
        val_pred = nets.forward(encoder, xv)[:, 0]
        rmse = float(np.sqrt(np.mean((val_pred - yv) ** 2))) * POWER_SCALE_DB
        trace.append(rmse)
        if rmse < best_rmse - 1e-9:
            best_rmse = rmse
            best = encoder.copy()
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    return best, trace


# ---------------------------------------------------------------- policy

def policy_distribution(x: np.ndarray, policy: nets.Net) -> np.ndarray:
    """Softmax over the 5 modulation-order logits."""
    probs = nets.softmax(nets.forward(policy, x))
    return probs


def select_action(probs: np.ndarray, gen: np.random.Generator | None = None,
                  greedy: bool = False) -> int:
    if greedy or gen is None:
        return int(np.argmax(probs))
    # inverse-CDF sample
    u = gen.random()
    return int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, len(probs) - 1))


@dataclass
class EpisodeBatch:
    inputs: np.ndarray   # (n, 6)
    actions: np.ndarray  # (n,) int
    rewards: np.ndarray  # (n,)
    weights: np.ndarray | None = None  # importance ratios pi(a|s)/q(a|s)

    @classmethod
    def from_lists(cls, inputs, actions, rewards, weights=None) -> "EpisodeBatch":
        w = None if weights is None else np.asarray(weights, dtype=np.float64)
        return cls(np.stack(inputs), np.asarray(actions, dtype=np.intp),
                   np.asarray(rewards, dtype=np.float64), w)


def reinforce_update(batch: EpisodeBatch, policy: nets.Net, baseline: nets.Net,
                     policy_opt: nets.OptState, baseline_opt: nets.OptState,
                     beta: float = ENTROPY_BETA) -> None:
    """One REINFORCE step with a learned baseline and entropy bonus.

    Baseline regresses toward rewards (squared loss); the policy ascends
    grad log pi(a|s) * (R - baseline(s)), both as a single optimizer step
    on the batch mean.  Actions drawn from a behavior distribution other
    than pi (epsilon-mixed exploration) carry importance weights so the
    gradient stays an estimate of the on-policy one.
    """
    x, a, r = batch.inputs, batch.actions, batch.rewards
    n = len(x)
    if n == 0:
        raise ContractError("empty episode batch")
    if not np.isfinite(r).all():
        raise TrainingError("non-finite rewards in batch")

    b = nets.forward(baseline, x)[:, 0]
    adv = r - b
    if batch.weights is not None:
        adv = adv * batch.weights

    logits = nets.forward(policy, x)
    probs = nets.softmax(logits)
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), a] = 1.0
    # d/dlogits of mean[-adv*log pi(a) - beta*H]
    logp = np.log(np.maximum(probs, 1e-12))
    ent = -(probs * logp).sum(axis=1, keepdims=True)
    gout = (adv[:, None] * (probs - onehot) + beta * probs * (logp + ent)) / n
    nets.opt_step(policy, nets.backward(policy, x, gout), policy_opt)

    b_gout = (2.0 * (b - r) / n)[:, None]
    nets.opt_step(baseline, nets.backward(baseline, x, b_gout), baseline_opt)
