import numpy as np
import pytest

from eiwsim import channel as ch
from eiwsim.errors import ConfigError, ContractError
from eiwsim.rng import stream


def test_tap_profile_normalized_and_exponential():
    p = ch.tap_power_profile(8, 0.5)
    assert p.sum() == pytest.approx(1.0)
    ratios = p[1:] / p[:-1]
    assert np.allclose(ratios, 0.5)


def test_params_validation():
    with pytest.raises(ConfigError):
        ch.ChannelParams(subcarriers=48).validate()
    with pytest.raises(ConfigError):
        ch.ChannelParams(rho=1.0).validate()
    with pytest.raises(ConfigError):
        ch.ChannelParams(n_taps=0).validate()


def test_parseval_identity():
    # mean over subcarriers of |H_k|^2 equals sum of |h_l|^2 for the
    # unnormalized DFT, so the frequency response conserves tap energy
    state = ch.init_channel(ch.ChannelParams(), seed=3,
                            large_scale_gain_db=-90.0, noise_power_dbm=-90.0)
    snr = ch.subcarrier_snr(state)  # gain/noise factor is exactly 1 here
    assert snr.mean() == pytest.approx(np.sum(np.abs(state.taps) ** 2))


def test_snr_scales_with_link_budget():
    state = ch.init_channel(ch.ChannelParams(), seed=3,
                            large_scale_gain_db=-60.0, noise_power_dbm=-90.0)
    snr = ch.subcarrier_snr(state)
    ref = ch.subcarrier_snr(ch.ChannelState(state.taps, state.tap_powers,
                                            state.rho, -90.0, -90.0,
                                            state.subcarriers))
    assert np.allclose(snr, ref * 1e3)


def test_gauss_markov_marginal_and_autocorrelation():
    # Monte Carlo over the stationary recursion: lag-1 autocorrelation of
    # each tap should approach rho and the marginal power should hold
    rho = 0.9
    state = ch.init_channel(ch.ChannelParams(rho=rho), seed=1)
    gen = stream(5, "gm")
    prev, cur = [], []
    for _ in range(4000):
        nxt = ch.step_channel(state, state.large_scale_gain_db, gen)
        prev.append(state.taps[0])
        cur.append(nxt.taps[0])
        state = nxt
    prev, cur = np.array(prev), np.array(cur)
    power = np.mean(np.abs(cur) ** 2)
    corr = np.mean(cur * np.conj(prev)).real / power
    assert power == pytest.approx(ch.tap_power_profile(8, 0.5)[0], rel=0.1)
    assert corr == pytest.approx(rho, abs=0.02)


def test_pilot_grid_stride():
    snr = np.ones(64)
    obs = ch.observe_pilots(snr, 1.0 / 32.0, 0.0, stream(0, "p"))
    assert list(obs.pilot_indices) == [0, 32]
    obs = ch.observe_pilots(snr, 1.0, 0.0, stream(0, "p"))
    assert len(obs.pilot_indices) == 64
    with pytest.raises(ContractError):
        ch.observe_pilots(snr, 0.0, 0.0, stream(0, "p"))


def test_pilots_estimate_true_snr_when_noiseless():
    gen = stream(2, "p")
    snr = 10 ** (gen.uniform(-1, 3, size=64))
    obs = ch.observe_pilots(snr, 1.0, 0.0, gen)
    assert np.allclose(obs.snr_est_db, 10 * np.log10(snr))


def test_feedback_two_pilot_example():
    # estimates {0 dB, 10 dB}: mean 5, population std 5, p10 = min, p90 = max
    obs = ch.PilotObservation(np.array([0, 32]), np.array([0.0, 10.0]), 1 / 32)
    fb = ch.compress_feedback(obs)
    assert (fb.mean_db, fb.std_db, fb.p10_db, fb.p90_db) == (5.0, 5.0, 0.0, 10.0)


def test_feedback_single_pilot_quantization():
    obs = ch.PilotObservation(np.array([0]), np.array([7.3]), 1 / 64)
    fb = ch.compress_feedback(obs)
    assert fb.mean_db == 7.5  # rounded to the 0.5 dB grid
    assert fb.std_db == 0.0
    assert fb.p10_db == fb.p90_db == 7.5


def test_feedback_values_on_quantizer_grid():
    gen = stream(9, "fb")
    snr = 10 ** (gen.uniform(-1, 3, size=64))
    obs = ch.observe_pilots(snr, 0.25, 2.0, gen)
    fb = ch.compress_feedback(obs)
    for v in fb.as_array():
        assert v == pytest.approx(round(v / ch.QUANT_STEP_DB) * ch.QUANT_STEP_DB)


def test_dead_subcarrier_floor():
    obs = ch.observe_pilots(np.zeros(64), 1.0, 0.0, stream(0, "p"))
    assert np.all(np.isfinite(obs.snr_est_db))
    assert np.all(obs.snr_est_db == 10 * np.log10(ch.SNR_FLOOR_LINEAR))
