"""Flat key-value experiment configuration with dotted section keys.

Files hold `key = value` lines ('#' comments allowed).  Every key can also
be set through an environment variable: `gate.lambda` -> `EIW_GATE_LAMBDA`.
Precedence: defaults < file < environment < CLI overrides.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .errors import ConfigError

# key -> (default, description)
DEFAULTS: dict[str, tuple[Any, str]] = {
    "scene.tag": ("los", "scenario tag: los or nlos"),
    "scene.width_m": (128.0, "scene width in meters"),
    "scene.height_m": (128.0, "scene height in meters"),
    "scene.count_min": (5, "min building count (los default)"),
    "scene.count_max": (8, "max building count (los default)"),
    "scene.side_min": (6, "min building side, meters"),
    "scene.side_max": (12, "max building side, meters"),
    "scene.nlos_count": (14, "building count used for nlos scenes"),
    "user.speed_mps": (1.0, "random-waypoint speed"),
    "channel.n_taps": (8, "tapped-delay-line length"),
    "channel.decay": (0.5, "exponential power-delay decay factor"),
    "channel.rho": (0.99, "per-slot Gauss-Markov tap correlation"),
    "channel.subcarriers": (64, "subcarrier count (power of two)"),
    "channel.tx_power_dbm": (8.0, "transmit power"),
    "channel.noise_power_dbm": (-90.0, "noise power"),
    "channel.slot_ms": (10.0, "slot duration, milliseconds"),
    "pilot.density": (Fraction(1, 32), "fraction of subcarriers carrying pilots"),
    "pilot.noise_std_db": (8.0, "std of the per-pilot SNR estimation error, dB"),
    "mcs.mode": ("hard", "success model: hard threshold or soft logistic"),
    "gate.lambda": (0.1, "cost-regularization factor"),
    "gate.cost_pilot": (1.0, "cost of the pilot-only expert, units"),
    "gate.cost_map": (10.0, "cost of the pilot+map expert, units"),
    "policy.tier": ("small", "policy/backbone capacity tier: small|medium|large"),
    "policy.lr": (0.005, "policy Adam learning rate"),
    "policy.baseline_lr": (0.01, "baseline Adam learning rate"),
    "policy.entropy_beta": (0.01, "entropy bonus coefficient"),
    "policy.epsilon": (0.0, "uniform exploration mixed into sampled actions"),
    "encoder.samples": (800, "supervised pretraining dataset size"),
    "encoder.lr": (0.003, "map encoder Adam learning rate"),
    "wm.history": (4, "stacked frame count H"),
    "wm.horizon": (5, "imagined rollout length T_im"),
    "wm.n_starts": (32, "imagined rollout start states per Stage-2 update"),
    "wm.batch": (64, "Stage-1 minibatch size"),
    "wm.stage2_iters": (1, "imagined policy updates per update window"),
    "wm.stage2_warmup": (0, "real slots collected before imagined updates start"),
    "wm.reward_weight": (5.0, "reward term weight in the Stage-1 loss"),
    "wm.lr": (0.002, "world-model Adam learning rate"),
    "wm.safety_fraction": (0.5, "counterfactual filter threshold"),
    "wm.filter": (False, "apply the counterfactual filter during deployment"),
    "train.slots": (60000, "pretraining slot count"),
    "train.update_every": (10, "slots per policy update U"),
    "train.eval_slots": (1000, "greedy evaluation window length"),
    "run.scheme": ("frozen", "online update scheme: frozen|direct_rl|world_model"),
    "run.seed": (0, "master seed"),
    "run.out_dir": ("runs", "output directory for metrics/checkpoints/figures"),
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_value(raw: str, like: Any) -> Any:
    raw = raw.strip()
    try:
        if isinstance(like, bool):
            low = raw.lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(raw)
        if isinstance(like, Fraction):
            return Fraction(raw)
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(Fraction(raw)) if "/" in raw else float(raw)
        return raw
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse value '{raw}'") from exc


def env_var_name(key: str) -> str:
    return "EIW_" + key.upper().replace(".", "_")


@dataclass
class ExperimentConfig:
    values: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        merged = {k: v for k, (v, _) in DEFAULTS.items()}
        merged.update(self.values)
        self.values = merged

    def __getitem__(self, key: str) -> Any:
        if key not in self.values:
            raise ConfigError(f"unknown config key '{key}'")
        return self.values[key]

    def set(self, key: str, raw: str) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key '{key}'")
        self.values[key] = _parse_value(raw, DEFAULTS[key][0])

    def validate(self) -> None:
        d = self["pilot.density"]
        if not (0 < float(d) <= 1):
            raise ConfigError("pilot.density must lie in (0, 1]")
        if self["run.scheme"] not in ("frozen", "direct_rl", "world_model"):
            raise ConfigError(f"unknown scheme '{self['run.scheme']}'")
        if self["mcs.mode"] not in ("hard", "soft"):
            raise ConfigError(f"unknown mcs.mode '{self['mcs.mode']}'")
        if self["gate.lambda"] < 0:
            raise ConfigError("gate.lambda must be >= 0")


def load_config(path: str | None = None,
                overrides: list[str] | None = None) -> ExperimentConfig:
    """Defaults, then file, then EIW_* environment variables, then overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (s.strip() for s in line.split("=", 1))
                cfg.set(key, raw)
    for key in DEFAULTS:
        env = os.environ.get(env_var_name(key))
        if env is not None:
            cfg.set(key, env)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like key=value")
        key, raw = (s.strip() for s in item.split("=", 1))
        cfg.set(key, raw)
    cfg.validate()
    return cfg


def config_reference() -> str:
    """Human-readable list of every key, its default, and its env variable."""
    lines = ["# eiwsim configuration reference", "#"]
    for key, (default, desc) in DEFAULTS.items():
        lines.append(f"# {desc}  [env: {env_var_name(key)}]")
        lines.append(f"{key} = {default}")
        lines.append("")
    return "\n".join(lines)
