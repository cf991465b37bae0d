"""Experiment orchestration: slot loop, pretraining, evaluation, sweeps.

One slot = mobility step, channel step, pilot observation and feedback,
gate routing, (optional) map encoding, MCS selection, throughput reward,
replay push, metrics row.  All randomness flows through named streams
derived from one master seed, so paired experiment arms share channel
realizations.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import channel as ch
from . import gate as gate_mod
from . import mcs, nets, policy as pol
from . import scene as scn
from . import worldmodel as wm_mod
from .config import ExperimentConfig
from .errors import FileFormatError
from .rng import StreamFactory

METRICS_COLUMNS = ["slot", "scheme", "seed", "lambda", "expert", "mcs",
                   "throughput", "genie_throughput", "real_interactions",
                   "wall_ms"]

CHECKPOINT_NAMES = ("encoder", "policy", "baseline", "gate", "wm")


@dataclass
class MetricsRow:
    slot: int
    scheme: str
    seed: int
    lam: float
    expert: int
    mcs_index: int
    throughput: float
    genie_throughput: float
    real_interactions: int
    wall_ms: float

    def as_list(self) -> list:
        return [self.slot, self.scheme, self.seed, f"{self.lam:.10g}",
                self.expert, self.mcs_index, f"{self.throughput:.10g}",
                f"{self.genie_throughput:.10g}", self.real_interactions,
                f"{self.wall_ms:.3f}"]


def write_metrics(path: str, rows: list[MetricsRow]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(METRICS_COLUMNS)
        for r in rows:
            w.writerow(r.as_list())


def read_metrics(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != METRICS_COLUMNS:
            raise FileFormatError(f"{path}: unexpected metrics header")
        return list(reader)


# ---------------------------------------------------------------- simulator

def scene_params_from_config(cfg: ExperimentConfig, tag: str) -> scn.SceneParams:
    if tag == scn.NLOS_TAG:
        n = cfg["scene.nlos_count"]
        return scn.nlos_params(n)
    return scn.SceneParams(
        scenario_tag=tag,
        width_m=cfg["scene.width_m"], height_m=cfg["scene.height_m"],
        count_min=cfg["scene.count_min"], count_max=cfg["scene.count_max"],
        side_min=cfg["scene.side_min"], side_max=cfg["scene.side_max"])


class LinkSimulator:
    """Real environment: scene + user mobility + fading channel + pilots.

    Every call to step() advances real time by one slot and increments the
    interaction ledger; imagined rollouts never touch this object.
    """

    def __init__(self, scene: scn.Scene, cfg: ExperimentConfig,
                 streams: StreamFactory):
        self.scene = scene
        self.cfg = cfg
        self.streams = streams
        self.base_rgb = scn.rasterize_buildings(scene)
        self.user = scn.init_user(scene, streams.get("mobility"),
                                  cfg["user.speed_mps"])
        params = ch.ChannelParams(cfg["channel.n_taps"], cfg["channel.decay"],
                                  cfg["channel.rho"], cfg["channel.subcarriers"])
        pl = scn.pathloss_db(scene, scene.bs_pos, self.user.pos)
        self.chan = ch.init_channel(params, streams.master_seed,
                                    cfg["channel.tx_power_dbm"] - pl,
                                    cfg["channel.noise_power_dbm"])
        self.slot_s = cfg["channel.slot_ms"] / 1000.0
        self.interactions = 0

    def step(self) -> tuple[np.ndarray, ch.FeedbackFeatures]:
        """One real slot: returns (true SNR vector, feedback features)."""
        self.user = scn.step_mobility(self.scene, self.user, self.slot_s,
                                      self.streams.get("mobility"))
        pl = scn.pathloss_db(self.scene, self.scene.bs_pos, self.user.pos)
        self.chan = ch.step_channel(self.chan,
                                    self.cfg["channel.tx_power_dbm"] - pl,
                                    self.streams.get("channel"))
        snr = ch.subcarrier_snr(self.chan)
        obs = ch.observe_pilots(snr, float(self.cfg["pilot.density"]),
                                self.cfg["pilot.noise_std_db"],
                                self.streams.get("pilots"))
        self.interactions += 1
        return snr, ch.compress_feedback(obs)

    def render(self) -> np.ndarray:
        return scn.render_aerial(self.scene, self.user, self.base_rgb)

    def gate_input(self) -> np.ndarray:
        return gate_mod.gate_input(self.scene, self.user.pos)


# ---------------------------------------------------------------- agents

@dataclass
class Agents:
    encoder: nets.Net
    policy: nets.Net
    baseline: nets.Net
    gate: nets.Net
    wm: nets.Net
    policy_opt: nets.OptState = field(default_factory=nets.OptState)
    baseline_opt: nets.OptState = field(default_factory=nets.OptState)
    wm_opt: nets.OptState = field(default_factory=nets.OptState)
    gate_trainer: gate_mod.GateTrainer = field(default_factory=gate_mod.GateTrainer)
    wm_trained: bool = False

    def param_signature(self) -> float:
        total = 0.0
        for net in (self.encoder, self.policy, self.baseline, self.gate, self.wm):
            total += sum(float(np.abs(l.w).sum() + np.abs(l.b).sum())
                         for l in net.layers)
        return total

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        for name in CHECKPOINT_NAMES:
            nets.save_net(getattr(self, name), os.path.join(out_dir, f"{name}.net"))

    @classmethod
    def load(cls, out_dir: str, cfg: ExperimentConfig) -> "Agents":
        loaded = {}
        for name in CHECKPOINT_NAMES:
            path = os.path.join(out_dir, f"{name}.net")
            if not os.path.exists(path):
                raise FileFormatError(f"missing checkpoint file: {path}")
            loaded[name] = nets.load_net(path)
        agents = cls(**loaded, wm_trained=True)
        agents.policy_opt = nets.OptState(lr=cfg["policy.lr"])
        agents.baseline_opt = nets.OptState(lr=cfg["policy.baseline_lr"])
        agents.wm_opt = nets.OptState(lr=cfg["wm.lr"])
        return agents


def fresh_agents(cfg: ExperimentConfig, seed: int, tier: Optional[str] = None) -> Agents:
    tier = tier or cfg["policy.tier"]
    agents = Agents(
        encoder=nets.build_net(pol.ENCODER_IN_DIM, [128], 1, seed + 101,
                               hidden_act=nets.RELU),
        policy=nets.build_tier_net(tier, pol.POLICY_IN_DIM, mcs.N_ACTIONS, seed + 202),
        baseline=nets.build_net(pol.POLICY_IN_DIM, [32], 1, seed + 303),
        gate=gate_mod.build_gate_net(seed + 404),
        wm=wm_mod.build_wm_net(seed + 505),
    )
    agents.policy_opt = nets.OptState(lr=cfg["policy.lr"])
    agents.baseline_opt = nets.OptState(lr=cfg["policy.baseline_lr"])
    agents.wm_opt = nets.OptState(lr=cfg["wm.lr"])
    agents.gate_trainer = gate_mod.GateTrainer()
    return agents


# ---------------------------------------------------------------- slot loop

@dataclass
class SlotLoop:
    """Sequential per-slot observation -> decision -> action loop."""
    cfg: ExperimentConfig
    sim: LinkSimulator
    agents: Agents
    streams: StreamFactory
    scheme: str = "frozen"
    seed: int = 0
    action_mode: str = "sample"      # sample | greedy
    expert_mode: str = "gate-sample"  # gate-sample|gate-greedy|force0|force1|coin
    train_policy: bool = False
    train_gate: bool = False
    wm_stage1: bool = False
    wm_stage2: bool = False
    use_filter: bool = False
    record_transitions: bool = True

    def __post_init__(self):
        self.replay = wm_mod.ReplayBuffer()
        self.slot_idx = 0
        self.encode_calls = 0
        self.update_every = self.cfg["train.update_every"]
        self.epsilon = self.cfg["policy.epsilon"]
        self.gate_cfg = gate_mod.GateConfig(self.cfg["gate.lambda"],
                                            self.cfg["gate.cost_pilot"],
                                            self.cfg["gate.cost_map"])
        self.mcs_mode = self.cfg["mcs.mode"]
        self._pb_inputs, self._pb_actions, self._pb_rewards = [], [], []
        self._pb_weights = []
        self._gb_inputs, self._gb_experts, self._gb_objectives = [], [], []
        self._wm_state = None
        self._pending = None  # (state, action, reward) awaiting the next frame

    # --- expert routing

    def _choose_expert(self, gin: np.ndarray) -> int:
        if self.expert_mode == "force0":
            return gate_mod.EXPERT_PILOT
        if self.expert_mode == "force1":
            return gate_mod.EXPERT_MAP
        if self.expert_mode == "coin":
            return int(self.streams.get("expert").random() < 0.5)
        probs = gate_mod.gate_probs(gin, self.agents.gate)
        if self.expert_mode == "gate-greedy":
            return int(np.argmax(probs))
        return pol.select_action(probs, self.streams.get("gate-action"))

    # --- one slot

    def run_slot(self) -> MetricsRow:
        t0 = time.perf_counter()
        snr, fb = self.sim.step()
        gin = self.sim.gate_input()
        expert = self._choose_expert(gin)

        map_est = None
        self.encode_calls = 0
        if expert == gate_mod.EXPERT_MAP:
            map_est = pol.encode_map(self.sim.render(), self.agents.encoder)
            self.encode_calls = 1

        x = pol.policy_input(fb, map_est)
        pi = pol.policy_distribution(x, self.agents.policy)
        behavior = pi
        if self.action_mode == "sample" and self.epsilon > 0.0:
            behavior = (1.0 - self.epsilon) * pi + self.epsilon / mcs.N_ACTIONS
        action = pol.select_action(behavior, self.streams.get("action"),
                                   greedy=self.action_mode == "greedy")

        frame = wm_mod.make_frame(
            pol.normalize_power_dbm(map_est) if map_est is not None else 0.0,
            pol.normalize_feedback(fb))
        if self._wm_state is None:
            self._wm_state = wm_mod.initial_state(frame)
        else:
            self._wm_state = wm_mod.push_frame(self._wm_state, frame)

        if self.use_filter and self.agents.wm_trained:
            action = wm_mod.counterfactual_filter(
                self._wm_state, action, self.agents.wm,
                self.cfg["wm.safety_fraction"])

        reward = mcs.throughput(snr, action, self.mcs_mode)
        _, genie = mcs.genie_best(snr, self.mcs_mode)

        if self.record_transitions:
            if self._pending is not None:
                s_prev, a_prev, r_prev = self._pending
                self.replay.push(s_prev, a_prev, r_prev, frame)
            self._pending = (self._wm_state.copy(), action, reward)

        if self.train_policy:
            self._pb_inputs.append(x)
            self._pb_actions.append(action)
            self._pb_rewards.append(reward)
            self._pb_weights.append(pi[action] / max(behavior[action], 1e-12))
        if self.train_gate:
            self._gb_inputs.append(gin)
            self._gb_experts.append(expert)
            self._gb_objectives.append(
                gate_mod.gate_objective(reward, expert, self.gate_cfg))

        self.slot_idx += 1
        self._maybe_update()
        wall_ms = (time.perf_counter() - t0) * 1000.0
        return MetricsRow(self.slot_idx - 1, self.scheme, self.seed,
                          self.gate_cfg.lam, expert, action, reward, genie,
                          self.sim.interactions, wall_ms)

    def _maybe_update(self) -> None:
        if self.wm_stage1 and len(self.replay) >= 8:
            wm_mod.wm_train_step(self.replay, self.agents.wm,
                                 self.agents.wm_opt, self.streams.get("replay"),
                                 batch_size=self.cfg["wm.batch"],
                                 reward_weight=self.cfg["wm.reward_weight"])
            self.agents.wm_trained = True
        due = self.slot_idx % self.update_every == 0
        if due and self.train_policy and self._pb_inputs:
            batch = pol.EpisodeBatch.from_lists(self._pb_inputs, self._pb_actions,
                                                self._pb_rewards, self._pb_weights)
            pol.reinforce_update(batch, self.agents.policy, self.agents.baseline,
                                 self.agents.policy_opt, self.agents.baseline_opt,
                                 beta=self.cfg["policy.entropy_beta"])
            self._pb_inputs, self._pb_actions, self._pb_rewards = [], [], []
            self._pb_weights = []
        if (due and self.wm_stage2 and self.agents.wm_trained
                and len(self.replay) > 0
                and self.slot_idx >= self.cfg["wm.stage2_warmup"]):
            for _ in range(self.cfg["wm.stage2_iters"]):
                wm_mod.imagine_and_update_policy(
                    self.replay, self.agents.wm, self.agents.policy,
                    self.agents.baseline, self.agents.policy_opt,
                    self.agents.baseline_opt, self.streams.get("imagine"),
                    horizon=self.cfg["wm.horizon"],
                    n_starts=self.cfg["wm.n_starts"],
                    beta=self.cfg["policy.entropy_beta"],
                    epsilon=self.epsilon)
        if due and self.train_gate and self._gb_inputs:
            gate_mod.gate_update(np.stack(self._gb_inputs),
                                 np.asarray(self._gb_experts),
                                 np.asarray(self._gb_objectives, dtype=np.float64),
                                 self.agents.gate, self.agents.gate_trainer)
            self._gb_inputs, self._gb_experts, self._gb_objectives = [], [], []

    def run(self, n_slots: int) -> list[MetricsRow]:
        return [self.run_slot() for _ in range(n_slots)]


# ---------------------------------------------------------------- experiments

def _sub_seed(master_seed: int, label: str) -> int:
    import hashlib
    digest = hashlib.sha256(f"{master_seed}/{label}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def build_encoder_dataset(scene: scn.Scene, cfg: ExperimentConfig,
                          seed: int) -> list[tuple[np.ndarray, float]]:
    """(raster, true received power dBm) pairs over random user positions."""
    from . import rng

    gen = rng.stream(seed, "encoder-data")
    base = scn.rasterize_buildings(scene)
    tx = cfg["channel.tx_power_dbm"]
    out = []
    for _ in range(cfg["encoder.samples"]):
        p = scn.random_free_point(scene, gen)
        user = scn.UserState(p, p, 0.0)
        raster = scn.render_aerial(scene, user, base)
        rx = tx - scn.pathloss_db(scene, scene.bs_pos, p)
        out.append((raster, rx))
    return out


def pretrain_experiment(cfg: ExperimentConfig, seed: int, out_dir: str,
                        scene_tag: str | None = None,
                        tier: str | None = None) -> dict:
    """Supervised encoder fit, then joint policy/gate RL with Stage-1 wm fitting.

    Saves all five checkpoints plus a per-window training log under out_dir.
    """
    tag = scene_tag or cfg["scene.tag"]
    scene = scn.generate_scene(scene_params_from_config(cfg, tag),
                               _sub_seed(seed, "scene"))
    agents = fresh_agents(cfg, seed, tier)

    dataset = build_encoder_dataset(scene, cfg, _sub_seed(seed, "enc"))
    agents.encoder, rmse_trace = pol.pretrain_map_encoder(
        dataset, agents.encoder, lr=cfg["encoder.lr"],
        seed=_sub_seed(seed, "enc-train"))

    streams = StreamFactory(seed)
    sim = LinkSimulator(scene, cfg, streams)
    loop = SlotLoop(cfg, sim, agents, streams, scheme="pretrain", seed=seed,
                    action_mode="sample", expert_mode="coin",
                    train_policy=True, train_gate=True, wm_stage1=True)
    rows = loop.run(cfg["train.slots"])

    os.makedirs(out_dir, exist_ok=True)
    agents.save(out_dir)
    scn.save_scene(scene, os.path.join(out_dir, "scene.txt"))
    write_metrics(os.path.join(out_dir, "pretrain_metrics.csv"), rows)

    window = max(1, cfg["train.eval_slots"] // 2)
    log_path = os.path.join(out_dir, "training_log.csv")
    with open(log_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["window_start", "mean_throughput", "mean_genie"]
                   + [f"mcs{i}_count" for i in range(mcs.N_ACTIONS)])
        for start in range(0, len(rows), window):
            chunk = rows[start:start + window]
            hist = [0] * mcs.N_ACTIONS
            for r in chunk:
                hist[r.mcs_index] += 1
            w.writerow([start,
                        f"{np.mean([r.throughput for r in chunk]):.10g}",
                        f"{np.mean([r.genie_throughput for r in chunk]):.10g}"]
                       + hist)
    return {"scene": scene, "agents": agents, "encoder_rmse_trace": rmse_trace,
            "rows": rows}


def evaluate(cfg: ExperimentConfig, agents: Agents, scene: scn.Scene, seed: int,
             n_slots: int | None = None, expert_mode: str = "gate-greedy",
             use_filter: bool = False, scheme: str = "evaluate") -> dict:
    """Greedy evaluation; returns summary statistics and the per-slot rows."""
    streams = StreamFactory(seed)
    sim = LinkSimulator(scene, cfg, streams)
    agents_eval = Agents(agents.encoder, agents.policy, agents.baseline,
                         agents.gate, agents.wm, wm_trained=agents.wm_trained)
    loop = SlotLoop(cfg, sim, agents_eval, streams, scheme=scheme, seed=seed,
                    action_mode="greedy", expert_mode=expert_mode,
                    use_filter=use_filter)
    rows = loop.run(n_slots or cfg["train.eval_slots"])
    tput = np.array([r.throughput for r in rows])
    genie = np.array([r.genie_throughput for r in rows])
    return {
        "rows": rows,
        "mean_throughput": float(tput.mean()),
        "std_throughput": float(tput.std()),
        "mean_genie": float(genie.mean()),
        "genie_ratio": float(tput.mean() / max(genie.mean(), 1e-12)),
        "expert2_fraction": float(np.mean([r.expert for r in rows])),
    }


def train_gate_for_lambda(cfg: ExperimentConfig, agents: Agents, scene: scn.Scene,
                          lam: float, seed: int, train_slots: int = 3000,
                          eval_slots: int = 1000) -> dict:
    """Fresh gate trained by REINFORCE at the given lambda; policy frozen."""
    local = ExperimentConfig(dict(cfg.values))
    local.values["gate.lambda"] = lam
    streams = StreamFactory(seed)
    sim = LinkSimulator(scene, local, streams)
    ag = Agents(agents.encoder, agents.policy, agents.baseline,
                gate_mod.build_gate_net(_sub_seed(seed, f"gate{lam}")),
                agents.wm, wm_trained=agents.wm_trained)
    ag.gate_trainer = gate_mod.GateTrainer()
    loop = SlotLoop(local, sim, ag, streams, scheme="sweep", seed=seed,
                    action_mode="greedy", expert_mode="gate-sample",
                    train_gate=True)
    loop.run(train_slots)
    loop.train_gate = False
    rows = loop.run(eval_slots)
    tput = np.array([r.throughput for r in rows])
    exp2 = float(np.mean([r.expert for r in rows]))
    gc = gate_mod.GateConfig(lam, cfg["gate.cost_pilot"], cfg["gate.cost_map"])
    objectives = [gate_mod.gate_objective(r.throughput, r.expert, gc) for r in rows]
    return {"lambda": lam, "seed": seed, "expert2_fraction": exp2,
            "mean_throughput": float(tput.mean()),
            "mean_objective": float(np.mean(objectives)), "rows": rows}


def sweep_lambda(cfg: ExperimentConfig, agents: Agents, scene: scn.Scene,
                 grid: list[float], seeds: list[int],
                 train_slots: int = 3000, eval_slots: int = 1000) -> list[dict]:
    results = []
    for lam in grid:
        for seed in seeds:
            results.append(train_gate_for_lambda(cfg, agents, scene, lam, seed,
                                                 train_slots, eval_slots))
    return results


def write_sweep_csv(path: str, results: list[dict]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["lambda", "seed", "expert2_fraction", "mean_throughput",
                    "mean_objective"])
        for r in sorted(results, key=lambda r: (r["lambda"], r["seed"])):
            w.writerow([f"{r['lambda']:.10g}", r["seed"],
                        f"{r['expert2_fraction']:.10g}",
                        f"{r['mean_throughput']:.10g}",
                        f"{r['mean_objective']:.10g}"])
        # aggregate rows (seed column = 'all')
        for lam in sorted({r["lambda"] for r in results}):
            sub = [r for r in results if r["lambda"] == lam]
            w.writerow([f"{lam:.10g}", "all",
                        f"{np.mean([r['expert2_fraction'] for r in sub]):.10g}",
                        f"{np.mean([r['mean_throughput'] for r in sub]):.10g}",
                        f"{np.mean([r['mean_objective'] for r in sub]):.10g}"])


# larger policy tiers need smaller REINFORCE steps to train stably
TIER_LR = {"small": 0.005, "medium": 0.002, "large": 0.002}


def tier_transfer_experiment(cfg: ExperimentConfig, seed: int,
                             eval_seeds: list[int],
                             tiers: tuple[str, ...] = ("small", "medium", "large"),
                             eval_slots: int = 2000) -> list[dict]:
    """Zero-shot transfer: pretrain each tier in LoS, evaluate in a fresh
    NLoS scene without any adaptation.  Returns one record per (tier, seed)."""
    import tempfile

    results = []
    for tier in tiers:
        local = ExperimentConfig(dict(cfg.values))
        local.values["scene.tag"] = "los"
        local.values["policy.tier"] = tier
        local.values["policy.lr"] = TIER_LR.get(tier, cfg["policy.lr"])
        with tempfile.TemporaryDirectory() as tmp:
            info = pretrain_experiment(local, seed, tmp)
        nlos = scn.generate_scene(scene_params_from_config(local, "nlos"),
                                  _sub_seed(seed, "scene-shift"))
        for es in eval_seeds:
            r = evaluate(local, info["agents"], nlos, es, n_slots=eval_slots,
                         expert_mode="force0")
            results.append({"tier": tier, "seed": es,
                            "mean_throughput": r["mean_throughput"],
                            "genie_ratio": r["genie_ratio"]})
    return results


def write_tier_csv(path: str, results: list[dict]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["tier", "seed", "mean_throughput", "genie_ratio"])
        for r in results:
            w.writerow([r["tier"], r["seed"],
                        f"{r['mean_throughput']:.10g}",
                        f"{r['genie_ratio']:.10g}"])


def online_adapt_experiment(cfg: ExperimentConfig, agents: Agents,
                            scene: scn.Scene, scheme: str, seed: int,
                            n_slots: int = 4000,
                            expert_mode: str = "force1") -> list[MetricsRow]:
    """Deploy pretrained agents into a (shifted) scene under one update scheme.

    frozen: greedy, no updates.  direct_rl: REINFORCE on real rewards every
    U slots.  world_model: Stage 1 every slot + Stage 2 every U slots.
    """
    streams = StreamFactory(seed)
    sim = LinkSimulator(scene, cfg, streams)
    ag = Agents(agents.encoder, agents.policy.copy(), agents.baseline.copy(),
                agents.gate, agents.wm.copy(), wm_trained=agents.wm_trained)
    ag.policy_opt = nets.OptState(lr=cfg["policy.lr"])
    ag.baseline_opt = nets.OptState(lr=cfg["policy.baseline_lr"])
    ag.wm_opt = nets.OptState(lr=cfg["wm.lr"])
    loop = SlotLoop(cfg, sim, ag, streams, scheme=scheme, seed=seed,
                    expert_mode=expert_mode)
    if scheme == "frozen":
        loop.action_mode = "greedy"
    elif scheme == "direct_rl":
        loop.action_mode = "sample"
        loop.train_policy = True
    elif scheme == "world_model":
        loop.action_mode = "sample"
        loop.wm_stage1 = True
        loop.wm_stage2 = True
    else:
        raise FileFormatError(f"unknown scheme '{scheme}'")
    return loop.run(n_slots)
