"""Command-line entry point.

Subcommands: gen-scene, pretrain, evaluate, sweep-lambda, online-adapt,
plot, config-reference, selftest.  Every config key is settable via
`--set key=value` or an EIW_* environment variable.  Exit codes:
0 success, 2 config, 3 file, 4 training, 5 scene generation, 1 other.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfg_mod
from . import gate as gate_mod
from . import harness, mcs, nets, plots
from . import scene as scn
from .errors import (ConfigError, ContractError, EiwError, FileFormatError,
                     SceneGenerationError, TrainingError)

EXIT_CODES = [
    (ConfigError, 2),
    (FileFormatError, 3),
    (TrainingError, 4),
    (SceneGenerationError, 5),
    (EiwError, 1),
]


def _load_cfg(args) -> cfg_mod.ExperimentConfig:
    cfg = cfg_mod.load_config(getattr(args, "config", None),
                              getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        cfg.values["run.seed"] = args.seed
    if getattr(args, "out", None) is not None:
        cfg.values["run.out_dir"] = args.out
    return cfg


def cmd_gen_scene(args) -> int:
    cfg = _load_cfg(args)
    params = harness.scene_params_from_config(cfg, args.tag or cfg["scene.tag"])
    scene = scn.generate_scene(params, cfg["run.seed"])
    scn.save_scene(scene, args.output)
    print(f"wrote {args.output}: {len(scene.buildings)} buildings, "
          f"coverage {scene.coverage_fraction():.3f}, tag {scene.scenario_tag}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = _load_cfg(args)
    out_dir = cfg["run.out_dir"]
    result = harness.pretrain_experiment(cfg, cfg["run.seed"], out_dir,
                                         tier=args.tier)
    summary = harness.evaluate(cfg, result["agents"], result["scene"],
                               cfg["run.seed"] + 1)
    print(f"checkpoints in {out_dir}; eval mean throughput "
          f"{summary['mean_throughput']:.3f} "
          f"(genie ratio {summary['genie_ratio']:.3f})")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    agents = harness.Agents.load(args.checkpoints, cfg)
    scene_path = args.scene or os.path.join(args.checkpoints, "scene.txt")
    scene = scn.load_scene(scene_path)
    summary = harness.evaluate(cfg, agents, scene, cfg["run.seed"],
                               n_slots=args.slots, expert_mode=args.expert_mode,
                               use_filter=cfg["wm.filter"])
    if args.metrics_out:
        harness.write_metrics(args.metrics_out, summary["rows"])
    print(f"mean throughput {summary['mean_throughput']:.4f} "
          f"+/- {summary['std_throughput']:.4f}, "
          f"genie ratio {summary['genie_ratio']:.4f}, "
          f"expert-2 fraction {summary['expert2_fraction']:.4f}")
    return 0


def cmd_sweep_lambda(args) -> int:
    cfg = _load_cfg(args)
    agents = harness.Agents.load(args.checkpoints, cfg)
    scene = scn.load_scene(args.scene or os.path.join(args.checkpoints, "scene.txt"))
    grid = [float(g) for g in args.grid.split(",")]
    seeds = [cfg["run.seed"] + i for i in range(args.n_seeds)]
    results = harness.sweep_lambda(cfg, agents, scene, grid, seeds,
                                   train_slots=args.train_slots,
                                   eval_slots=args.eval_slots)
    harness.write_sweep_csv(args.output, results)
    print(f"wrote {args.output} ({len(results)} rows)")
    return 0


def cmd_online_adapt(args) -> int:
    cfg = _load_cfg(args)
    agents = harness.Agents.load(args.checkpoints, cfg)
    params = harness.scene_params_from_config(cfg, args.tag)
    scene = scn.generate_scene(params, harness._sub_seed(cfg["run.seed"], "shift"))
    scheme = args.scheme or cfg["run.scheme"]
    rows = harness.online_adapt_experiment(cfg, agents, scene, scheme,
                                           cfg["run.seed"], n_slots=args.slots)
    out = args.metrics_out or os.path.join(
        cfg["run.out_dir"], f"online_{scheme}_seed{cfg['run.seed']}.csv")
    harness.write_metrics(out, rows)
    tail = np.mean([r.throughput for r in rows[-500:]])
    print(f"wrote {out}; final-window mean throughput {tail:.4f}")
    return 0


def cmd_plot(args) -> int:
    if args.kind == "timeseries":
        written = plots.emit_timeseries(args.inputs, args.out_prefix,
                                        smooth=args.smooth)
    elif args.kind == "lambda":
        written = plots.emit_lambda_tradeoff(args.inputs[0], args.out_prefix)
    elif args.kind == "bars":
        written = plots.emit_bar_comparison(args.inputs[0], args.out_prefix,
                                            args.label_col, args.value_col)
    else:
        raise ConfigError(f"unknown plot kind '{args.kind}'")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_config_reference(args) -> int:
    print(cfg_mod.config_reference())
    return 0


def cmd_selftest(args) -> int:
    """Gradient checks plus oracle/dominance invariants; prints pass/fail lines."""
    from . import rng

    ok = True

    worst = 0.0
    for i in range(20):
        gen = rng.stream(1000 + i, "selftest-arch")
        n_hidden = int(gen.integers(1, 4))
        dims = [int(gen.integers(2, 9))] + \
               [int(gen.integers(4, 65)) for _ in range(n_hidden)] + \
               [int(gen.integers(1, 6))]
        act = [nets.RELU, nets.TANH][i % 2]
        net = nets.build_net(dims[0], dims[1:-1], dims[-1], seed=i, hidden_act=act)
        # randomize the zero-initialized head so the check is not vacuous
        net.layers[-1].w = gen.standard_normal(net.layers[-1].w.shape) * 0.5
        net.layers[-1].b = gen.standard_normal(net.layers[-1].b.shape) * 0.1
        x = gen.standard_normal(dims[0])
        # central differences are invalid within a step of a relu kink, so
        # resample inputs that leave any pre-activation too close to zero
        for _ in range(100):
            h, safe = x, True
            for layer in net.layers:
                z = h @ layer.w.T + layer.b
                if layer.act == nets.RELU and np.abs(z).min() < 1e-3:
                    safe = False
                    break
                h = nets._apply_act(z, layer.act)
            if safe:
                break
            x = gen.standard_normal(dims[0])
        report = nets.finite_diff_check(net, x, tolerance=1e-4, seed=i)
        worst = max(worst, report["max_rel_error"])
        if not report["passed"]:
            ok = False
    print(f"[{'PASS' if worst <= 1e-4 else 'FAIL'}] gradient finite-difference "
          f"check, max rel error {worst:.2e}")

    gen = rng.stream(7, "selftest-snr")
    dominated = True
    for _ in range(200):
        snr = 10 ** (gen.uniform(-1.0, 3.5, size=64))
        _, best = mcs.genie_best(snr)
        if any(mcs.throughput(snr, a) > best + 1e-12 for a in range(mcs.N_ACTIONS)):
            dominated = False
    print(f"[{'PASS' if dominated else 'FAIL'}] genie oracle dominates every MCS")

    monotone = True
    for _ in range(200):
        snr = 10 ** (gen.uniform(-1.0, 3.5, size=64))
        for a in range(mcs.N_ACTIONS - 1):
            m_lo = mcs.success_mask(snr, a)
            m_hi = mcs.success_mask(snr, a + 1)
            if np.any(m_hi > m_lo):
                monotone = False
    print(f"[{'PASS' if monotone else 'FAIL'}] success mask monotone in rate")

    gc = gate_mod.GateConfig(lam=1.0)
    bound_ok = all(
        gate_mod.gate_objective(0.0, 0, gc) > gate_mod.gate_objective(8.0, 1, gc)
        for _ in range(1))
    print(f"[{'PASS' if bound_ok else 'FAIL'}] lambda dominance bound "
          f"(lambda=1 > 8/9 forces expert 1)")

    ok = ok and dominated and monotone and bound_ok
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eiwsim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="config file (key = value lines)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("gen-scene", help="generate and save a scene file")
    common(sp)
    sp.add_argument("--tag", choices=[scn.LOS_TAG, scn.NLOS_TAG])
    sp.add_argument("output")
    sp.set_defaults(func=cmd_gen_scene)

    sp = sub.add_parser("pretrain", help="pretrain encoder, policy, gate, world model")
    common(sp)
    sp.add_argument("--tier", choices=sorted(nets.TIERS))
    sp.set_defaults(func=cmd_pretrain)

    sp = sub.add_parser("evaluate", help="greedy evaluation of saved checkpoints")
    common(sp)
    sp.add_argument("checkpoints", help="checkpoint directory from pretrain")
    sp.add_argument("--scene", help="scene file (default: checkpoint scene)")
    sp.add_argument("--slots", type=int, default=1000)
    sp.add_argument("--expert-mode", default="gate-greedy",
                    choices=["gate-greedy", "gate-sample", "force0", "force1"])
    sp.add_argument("--metrics-out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep-lambda", help="gate training across a lambda grid")
    common(sp)
    sp.add_argument("checkpoints")
    sp.add_argument("--scene")
    sp.add_argument("--grid", default="0,0.05,0.2,0.5,1.0")
    sp.add_argument("--n-seeds", type=int, default=5)
    sp.add_argument("--train-slots", type=int, default=3000)
    sp.add_argument("--eval-slots", type=int, default=1000)
    sp.add_argument("--output", default="sweep_lambda.csv")
    sp.set_defaults(func=cmd_sweep_lambda)

    sp = sub.add_parser("online-adapt", help="deploy into a shifted scene and adapt")
    common(sp)
    sp.add_argument("checkpoints")
    sp.add_argument("--tag", default=scn.NLOS_TAG,
                    choices=[scn.LOS_TAG, scn.NLOS_TAG])
    sp.add_argument("--scheme", choices=["frozen", "direct_rl", "world_model"])
    sp.add_argument("--slots", type=int, default=4000)
    sp.add_argument("--metrics-out")
    sp.set_defaults(func=cmd_online_adapt)

    sp = sub.add_parser("plot", help="aggregate metrics and render figures")
    sp.add_argument("kind", choices=["timeseries", "lambda", "bars"])
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--out-prefix", required=True)
    sp.add_argument("--smooth", type=int, default=200)
    sp.add_argument("--label-col", default="tier")
    sp.add_argument("--value-col", default="mean_throughput")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("config-reference", help="print every config key")
    sp.set_defaults(func=cmd_config_reference)

    sp = sub.add_parser("selftest", help="gradient checks and oracle invariants")
    sp.set_defaults(func=cmd_selftest)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EiwError as exc:
        for klass, code in EXIT_CODES:
            if isinstance(exc, klass):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
