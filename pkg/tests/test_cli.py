import os

import pytest

from eiwsim import harness
from eiwsim import scene as scn
from eiwsim.cli import main
from eiwsim.config import ExperimentConfig


def test_gen_scene_writes_loadable_file(tmp_path, capsys):
    out = tmp_path / "scene.txt"
    assert main(["gen-scene", "--tag", "nlos", "--seed", "3", str(out)]) == 0
    scene = scn.load_scene(str(out))
    assert scene.scenario_tag == "nlos"
    assert "coverage" in capsys.readouterr().out


def test_gen_scene_unknown_key_exits_2(tmp_path):
    assert main(["gen-scene", "--set", "bogus.key=1",
                 str(tmp_path / "s.txt")]) == 2


def test_gen_scene_unsatisfiable_exits_5(tmp_path):
    # a single tiny building cannot reach the blocked-coverage floor
    assert main(["gen-scene", "--tag", "nlos", "--set", "scene.nlos_count=1",
                 "--set", "scene.side_min=2", "--set", "scene.side_max=2",
                 str(tmp_path / "s.txt")]) == 5


def test_evaluate_missing_checkpoints_exits_3(tmp_path):
    assert main(["evaluate", str(tmp_path)]) == 3


def test_evaluate_roundtrip_and_determinism(tmp_path, capsys):
    ckpt = tmp_path / "ckpt"
    ckpt.mkdir()
    cfg = ExperimentConfig()
    agents = harness.fresh_agents(cfg, 5)
    agents.save(str(ckpt))
    scene = scn.generate_scene(harness.scene_params_from_config(cfg, "los"), 5)
    scn.save_scene(scene, str(ckpt / "scene.txt"))

    outs = []
    for name in ("a.csv", "b.csv"):
        mpath = tmp_path / name
        assert main(["evaluate", str(ckpt), "--slots", "60",
                     "--expert-mode", "force0", "--seed", "2",
                     "--metrics-out", str(mpath)]) == 0
        rows = mpath.read_text().splitlines()
        # drop the wall-clock column before comparing
        outs.append([",".join(r.split(",")[:-1]) for r in rows])
    assert outs[0] == outs[1]
    assert len(outs[0]) == 61  # header + 60 slots
    assert "genie ratio" in capsys.readouterr().out


def test_plot_command_writes_figure_files(tmp_path, capsys):
    mpath = tmp_path / "m.csv"
    rows = [harness.MetricsRow(i, "frozen", 0, 0.0, 0, 1, 2.0, 2.0, i + 1, 0.1)
            for i in range(20)]
    harness.write_metrics(str(mpath), rows)
    prefix = str(tmp_path / "fig")
    assert main(["plot", "timeseries", str(mpath), "--out-prefix", prefix,
                 "--smooth", "5"]) == 0
    assert os.path.exists(prefix + ".csv")
    assert os.path.exists(prefix + ".svg")
    assert capsys.readouterr().out.count("wrote") == 2


def test_plot_missing_input_exits_3(tmp_path):
    assert main(["plot", "timeseries", str(tmp_path / "nope.csv"),
                 "--out-prefix", str(tmp_path / "fig")]) == 3


def test_config_reference_lists_keys(capsys):
    assert main(["config-reference"]) == 0
    out = capsys.readouterr().out
    assert "channel.n_taps" in out
    assert "EIW_GATE_LAMBDA" in out


def test_env_var_overrides_cli_default(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("EIW_SCENE_TAG", "nlos")
    out = tmp_path / "s.txt"
    assert main(["gen-scene", "--seed", "1", str(out)]) == 0
    assert scn.load_scene(str(out)).scenario_tag == "nlos"
