"""Time-correlated frequency-selective channel and the pilot feedback path.

Tap gains follow a per-tap Gauss-Markov recursion with an exponential
power-delay profile; per-subcarrier SNR comes from the K-point DFT of the
taps scaled by the large-scale link budget.  Pilots sample the SNR vector
on an even grid and are compressed to four quantized order statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ContractError

SNR_FLOOR_LINEAR = 1e-12  # -120 dB floor so dead subcarriers stay finite in dB
QUANT_STEP_DB = 0.5


@dataclass(frozen=True)
class ChannelParams:
    n_taps: int = 8
    decay: float = 0.5  # per-tap power ratio of the exponential profile
    rho: float = 0.99
    subcarriers: int = 64

    def validate(self) -> None:
        if self.n_taps < 1:
            raise ConfigError("n_taps must be >= 1")
        k = self.subcarriers
        if k < 1 or (k & (k - 1)) != 0:
            raise ConfigError("subcarriers must be a power of two")
        if not (0.0 <= self.rho < 1.0):
            raise ConfigError("rho must lie in [0, 1)")


@dataclass(frozen=True)
class ChannelState:
    taps: np.ndarray          # (L,) complex
    tap_powers: np.ndarray    # (L,) sums to 1
    rho: float
    large_scale_gain_db: float   # rx power in dBm (tx power minus pathloss)
    noise_power_dbm: float
    subcarriers: int


@dataclass(frozen=True)
class PilotObservation:
    pilot_indices: np.ndarray  # sorted subcarrier indices
    snr_est_db: np.ndarray
    density: float


@dataclass(frozen=True)
class FeedbackFeatures:
    mean_db: float
    std_db: float
    p10_db: float
    p90_db: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mean_db, self.std_db, self.p10_db, self.p90_db])


def tap_power_profile(n_taps: int, decay: float) -> np.ndarray:
    p = decay ** np.arange(n_taps, dtype=np.float64)
    return p / p.sum()


def _draw_taps(tap_powers: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    n = len(tap_powers)
    w = (gen.standard_normal(n) + 1j * gen.standard_normal(n)) / np.sqrt(2.0)
    return np.sqrt(tap_powers) * w


def init_channel(params: ChannelParams, seed: int,
                 large_scale_gain_db: float = -60.0,
                 noise_power_dbm: float = -90.0) -> ChannelState:
    """Fresh fading state; identical (params, seed) yields identical taps."""
    from . import rng

    params.validate()
    gen = rng.stream(seed, "channel-init")
    powers = tap_power_profile(params.n_taps, params.decay)
    return ChannelState(_draw_taps(powers, gen), powers, params.rho,
                        large_scale_gain_db, noise_power_dbm, params.subcarriers)


def step_channel(state: ChannelState, large_scale_db: float,
                 gen: np.random.Generator) -> ChannelState:
    """Gauss-Markov tap update h <- rho*h + sqrt(1-rho^2)*w; marginals preserved."""
    w = _draw_taps(state.tap_powers, gen)
    taps = state.rho * state.taps + np.sqrt(1.0 - state.rho ** 2) * w
    return replace(state, taps=taps, large_scale_gain_db=large_scale_db)


def subcarrier_snr(state: ChannelState) -> np.ndarray:
    """Linear per-subcarrier SNR, length K.

    Unnormalized DFT keeps mean_k |H_k|^2 == sum_l |h_l|^2 (Parseval).
    """
    h = np.zeros(state.subcarriers, dtype=np.complex128)
    h[:len(state.taps)] = state.taps
    freq = np.fft.fft(h)
    gain_over_noise = 10.0 ** ((state.large_scale_gain_db - state.noise_power_dbm) / 10.0)
    return np.abs(freq) ** 2 * gain_over_noise


def observe_pilots(snr: np.ndarray, density: float, noise_std_db: float,
                   gen: np.random.Generator) -> PilotObservation:
    """Evenly spaced pilots from subcarrier 0; dB estimates with Gaussian error."""
    if not (0.0 < density <= 1.0):
        raise ContractError("density must lie in (0, 1]")
    k = len(snr)
    stride = max(1, int(round(1.0 / density)))
    idx = np.arange(0, k, stride)
    true_db = 10.0 * np.log10(np.maximum(snr[idx], SNR_FLOOR_LINEAR))
    est = true_db + noise_std_db * gen.standard_normal(len(idx))
    return PilotObservation(idx, est, density)


def _nearest_rank(sorted_vals: np.ndarray, pct: float) -> float:
    n = len(sorted_vals)
    rank = max(1, int(np.ceil(pct * n)))
    return float(sorted_vals[rank - 1])


def quantize_db(x: float, step: float = QUANT_STEP_DB) -> float:
    return float(np.round(x / step) * step)


def compress_feedback(obs: PilotObservation) -> FeedbackFeatures:
    """Mean/std/p10/p90 of the pilot estimates, quantized to 0.5 dB."""
    vals = np.asarray(obs.snr_est_db, dtype=np.float64)
    if vals.size == 0:
        raise ContractError("need at least one pilot")
    s = np.sort(vals)
    std = float(vals.std()) if vals.size > 1 else 0.0
    return FeedbackFeatures(
        quantize_db(float(vals.mean())),
        quantize_db(std),
        quantize_db(_nearest_rank(s, 0.10)),
        quantize_db(_nearest_rank(s, 0.90)),
    )
