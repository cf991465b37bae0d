import numpy as np
import pytest

from eiwsim import gate, nets
from eiwsim import scene as scn
from eiwsim.errors import ConfigError, ContractError
from eiwsim.rng import stream


def test_gate_input_layout():
    s = scn.Scene(128.0, 128.0, (), (0.0, 0.0), scn.LOS_TAG)
    x = gate.gate_input(s, (128.0, 128.0))
    assert x.shape == (gate.GATE_IN_DIM,)
    assert x[0] == pytest.approx(1.0)  # full diagonal
    assert x[1] == 0.0
    assert (x[2], x[3]) == (1.0, 0.0)


def test_gate_input_blockage_normalization():
    b = scn.Building(40.0, 45.0, 20.0, 10.0, (0, 0, 0), 1)
    s = scn.Scene(128.0, 128.0, (b,), (0.0, 50.0), scn.NLOS_TAG)
    x = gate.gate_input(s, (100.0, 50.0))
    assert x[1] == pytest.approx(1.0 / gate.MAX_BLOCKAGES_NORM)
    assert (x[2], x[3]) == (0.0, 1.0)


def test_objective_values():
    cfg = gate.GateConfig(lam=0.5, cost_pilot=1.0, cost_map=10.0)
    assert gate.gate_objective(3.0, gate.EXPERT_PILOT, cfg) == 2.5
    assert gate.gate_objective(3.0, gate.EXPERT_MAP, cfg) == -2.0
    with pytest.raises(ContractError):
        gate.gate_objective(3.0, 2, cfg)


def test_config_validation():
    with pytest.raises(ConfigError):
        gate.GateConfig(lam=-0.1).validate()
    with pytest.raises(ConfigError):
        gate.GateConfig(cost_pilot=10.0, cost_map=1.0).validate()


def test_lambda_dominance_bound():
    # above lambda = (max reward)/(cost gap) = 8/9 the cheap expert wins
    # even when it scores zero reward and the other scores the maximum
    cfg = gate.GateConfig(lam=8.0 / 9.0 + 1e-6)
    worst_cheap = gate.gate_objective(0.0, gate.EXPERT_PILOT, cfg)
    best_costly = gate.gate_objective(8.0, gate.EXPERT_MAP, cfg)
    assert worst_cheap > best_costly


def _train_gate(reward_fn, lam, steps=300, seed=0):
    cfg = gate.GateConfig(lam=lam)
    net = gate.build_gate_net(seed)
    trainer = gate.GateTrainer()
    gen = stream(seed, "gate-train")
    x = np.array([0.5, 0.25, 0.0, 1.0])
    for _ in range(steps):
        inputs, experts, objs = [], [], []
        for _ in range(16):
            probs = gate.gate_probs(x, net)
            e = int(gen.random() < probs[1])
            inputs.append(x)
            experts.append(e)
            objs.append(gate.gate_objective(reward_fn(e), e, cfg))
        gate.gate_update(np.stack(inputs), np.array(experts),
                         np.array(objs, dtype=np.float64), net, trainer)
    return gate.gate_probs(x, net)


def test_gate_learns_costly_expert_when_free():
    # expert 1 yields 2 extra bits and lambda = 0 makes cost irrelevant
    probs = _train_gate(lambda e: 3.0 if e == gate.EXPERT_MAP else 1.0, lam=0.0)
    assert probs[gate.EXPERT_MAP] > 0.9


def test_gate_learns_cheap_expert_under_high_lambda():
    probs = _train_gate(lambda e: 3.0 if e == gate.EXPERT_MAP else 1.0, lam=1.0)
    assert probs[gate.EXPERT_PILOT] > 0.9


def test_gate_update_rejects_empty_batch():
    net = gate.build_gate_net(0)
    with pytest.raises(ContractError):
        gate.gate_update(np.zeros((0, 4)), np.zeros(0), np.zeros(0),
                         net, gate.GateTrainer())
