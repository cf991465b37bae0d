"""Cost-regularized mixture-of-experts gate: pilot-only vs pilot+map routing.

The gate routes on cheap geometric summaries (user-BS distance, blockage
count, scenario tag) rather than the full raster, and is trained by
REINFORCE on the cost-penalized objective J = reward - lambda * cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nets, scene as scene_mod
from .errors import ConfigError, ContractError, TrainingError

GATE_IN_DIM = 4  # distance, blockage count, scenario one-hot (2)
GATE_HIDDEN = 16
EXPERT_PILOT = 0
EXPERT_MAP = 1

MAX_BLOCKAGES_NORM = 8.0


@dataclass(frozen=True)
class GateConfig:
    lam: float = 0.1
    cost_pilot: float = 1.0
    cost_map: float = 10.0

    def validate(self) -> None:
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if not (0 < self.cost_pilot < self.cost_map):
            raise ConfigError("expert costs must be positive with cost_map > cost_pilot")

    def cost(self, expert: int) -> float:
        return self.cost_pilot if expert == EXPERT_PILOT else self.cost_map


def gate_input(scn: scene_mod.Scene, user_pos: tuple[float, float]) -> np.ndarray:
    """Normalized (distance, blockage count, LoS flag, NLoS flag)."""
    d = np.hypot(scn.bs_pos[0] - user_pos[0], scn.bs_pos[1] - user_pos[1])
    diag = np.hypot(scn.width_m, scn.height_m)
    n_block = scene_mod.count_blockages(scn, scn.bs_pos, user_pos)
    return np.array([
        d / diag,
        min(n_block / MAX_BLOCKAGES_NORM, 1.0),
        1.0 if scn.scenario_tag == scene_mod.LOS_TAG else 0.0,
        1.0 if scn.scenario_tag == scene_mod.NLOS_TAG else 0.0,
    ])


def build_gate_net(seed: int) -> nets.Net:
    return nets.build_net(GATE_IN_DIM, [GATE_HIDDEN], 2, seed)


def gate_probs(x: np.ndarray, gate: nets.Net) -> np.ndarray:
    return nets.softmax(nets.forward(gate, x))


def gate_objective(reward: float, expert: int, config: GateConfig) -> float:
    if expert not in (EXPERT_PILOT, EXPERT_MAP):
        raise ContractError(f"expert index {expert} out of range")
    return reward - config.lam * config.cost(expert)


@dataclass
class GateTrainer:
    """Holds the gate optimizer plus the scalar moving-average baseline."""
    opt: nets.OptState = field(default_factory=lambda: nets.OptState(lr=0.02))
    baseline: float = 0.0
    baseline_initialized: bool = False
    baseline_decay: float = 0.95


def gate_update(inputs: np.ndarray, experts: np.ndarray, objectives: np.ndarray,
                gate: nets.Net, trainer: GateTrainer) -> None:
    """One REINFORCE step on the gate's binary choice with return J."""
    n = len(inputs)
    if n == 0:
        raise ContractError("empty gate batch")
    if not np.isfinite(objectives).all():
        raise TrainingError("non-finite gate objectives")
    if not trainer.baseline_initialized:
        trainer.baseline = float(np.mean(objectives))
        trainer.baseline_initialized = True
    adv = objectives - trainer.baseline
    probs = nets.softmax(nets.forward(gate, inputs))
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), experts.astype(np.intp)] = 1.0
    gout = adv[:, None] * (probs - onehot) / n
    nets.opt_step(gate, nets.backward(gate, inputs, gout), trainer.opt)
    trainer.baseline = (trainer.baseline_decay * trainer.baseline
                        + (1.0 - trainer.baseline_decay) * float(np.mean(objectives)))
