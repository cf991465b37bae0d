import numpy as np
import pytest

from eiwsim import nets, policy as pol
from eiwsim.channel import FeedbackFeatures
from eiwsim.errors import ContractError
from eiwsim.rng import stream


def test_feedback_normalization_values():
    fb = FeedbackFeatures(mean_db=25.0, std_db=5.0, p10_db=-15.0, p90_db=45.0)
    x = pol.normalize_feedback(fb)
    assert np.allclose(x, [1.0, 0.5, -1.0, 2.0])


def test_power_normalization_round_trip():
    for p in (-110.0, -85.0, -42.5):
        assert pol.denormalize_power(pol.normalize_power_dbm(p)) == pytest.approx(p)


def test_policy_input_layout():
    fb = FeedbackFeatures(5.0, 0.0, 5.0, 5.0)
    x = pol.policy_input(fb, None)
    assert x.shape == (6,)
    assert x[4] == 0.0 and x[5] == 0.0
    x = pol.policy_input(fb, map_power_dbm=-60.0)
    assert x[4] == pytest.approx(1.0)
    assert x[5] == 1.0


def test_pooling_preserves_constant_planes():
    raster = np.ones((5, 128, 128)) * 0.25
    pooled = pol.pool_raster(raster)
    assert pooled.shape == (pol.ENCODER_IN_DIM,)
    assert np.allclose(pooled, 0.25)


def test_pooling_averages_blocks():
    raster = np.zeros((5, 128, 128))
    raster[0, :8, :8] = 1.0  # exactly one 8x8 pooling block
    pooled = pol.pool_raster(raster).reshape(5, 16, 16)
    assert pooled[0, 0, 0] == 1.0
    assert pooled[0].sum() == 1.0


def test_encoder_features_rescale_masks_only():
    raster = np.ones((5, 128, 128))
    feats = pol.encoder_features(raster)
    n_rgb = 3 * 16 * 16
    assert np.allclose(feats[:n_rgb], 1.0)
    assert np.allclose(feats[n_rgb:], pol.MASK_CHANNEL_GAIN)


def test_select_action_greedy_and_sampling():
    probs = np.array([0.1, 0.2, 0.4, 0.2, 0.1])
    assert pol.select_action(probs, greedy=True) == 2
    gen = stream(0, "act")
    counts = np.bincount([pol.select_action(probs, gen) for _ in range(4000)],
                         minlength=5)
    assert np.allclose(counts / 4000, probs, atol=0.03)


def test_reinforce_rejects_empty_and_nonfinite():
    net = nets.build_net(6, [8], 5, seed=0)
    base = nets.build_net(6, [8], 1, seed=1)
    po, bo = nets.OptState(), nets.OptState()
    with pytest.raises(ContractError):
        pol.reinforce_update(pol.EpisodeBatch(np.zeros((0, 6)),
                                              np.zeros(0, dtype=np.intp),
                                              np.zeros(0)), net, base, po, bo)


def test_reinforce_bandit_convergence():
    # stateless 5-armed bandit: deterministic rewards favor arm 3
    rewards_by_arm = np.array([0.0, 1.0, 2.0, 5.0, 1.5])
    net = nets.build_net(6, [16], 5, seed=2)
    base = nets.build_net(6, [16], 1, seed=3)
    po, bo = nets.OptState(lr=0.02), nets.OptState(lr=0.02)
    gen = stream(4, "bandit")
    x = np.array([0.3, 0.1, -0.2, 0.5, 0.0, 1.0])
    for _ in range(400):
        inputs, actions, rs = [], [], []
        for _ in range(16):
            probs = pol.policy_distribution(x, net)
            a = pol.select_action(probs, gen)
            inputs.append(x)
            actions.append(a)
            rs.append(rewards_by_arm[a])
        pol.reinforce_update(pol.EpisodeBatch.from_lists(inputs, actions, rs),
                             net, base, po, bo)
    assert pol.select_action(pol.policy_distribution(x, net), greedy=True) == 3
    assert pol.policy_distribution(x, net)[3] > 0.8


def test_importance_weights_one_match_unweighted():
    net_a = nets.build_net(6, [8], 5, seed=5)
    net_b = net_a.copy()
    base_a = nets.build_net(6, [8], 1, seed=6)
    base_b = base_a.copy()
    gen = stream(7, "batch")
    xs = gen.standard_normal((12, 6))
    acts = gen.integers(0, 5, size=12)
    rs = gen.random(12)
    pol.reinforce_update(pol.EpisodeBatch(xs, acts, rs),
                         net_a, base_a, nets.OptState(), nets.OptState())
    pol.reinforce_update(pol.EpisodeBatch(xs, acts, rs, np.ones(12)),
                         net_b, base_b, nets.OptState(), nets.OptState())
    for la, lb in zip(net_a.layers, net_b.layers):
        assert np.allclose(la.w, lb.w)


def test_encoder_pretraining_learns_linear_target(tmp_path):
    # targets are a fixed linear readout of the features: easily learnable
    gen = stream(8, "enc")
    rasters = [gen.random((5, 128, 128)) for _ in range(120)]
    w = gen.standard_normal(pol.ENCODER_IN_DIM) * 0.02
    dataset = [(r, pol.denormalize_power(float(pol.encoder_features(r) @ w)))
               for r in rasters]
    enc = nets.build_net(pol.ENCODER_IN_DIM, [32], 1, seed=9, hidden_act="relu")
    enc, trace = pol.pretrain_map_encoder(dataset, enc, lr=3e-3, max_epochs=60,
                                          seed=1)
    assert min(trace) < 0.5 * trace[0]
