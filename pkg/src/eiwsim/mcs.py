"""Modulation order set, per-subcarrier success model, reward, genie oracle.

Default success model is a hard capacity threshold with a 0.5-bit margin:
subcarrier k carries rate r iff log2(1 + SNR_k) >= r + margin.  A smooth
logistic mode (slope 4 per bit in capacity minus threshold) is available
behind the `mode` argument for sensitivity studies; the genie and all
dominance checks use whichever mode the caller selects.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

MCS_RATES = (1, 2, 4, 6, 8)  # bits/symbol: BPSK, QPSK, 16QAM, 64QAM, 256QAM
MARGIN_BITS = 0.5
LOGISTIC_SLOPE = 4.0  # per bit, soft mode only

HARD = "hard"
SOFT = "soft"

N_ACTIONS = len(MCS_RATES)
MAX_RATE = float(MCS_RATES[-1])


def _check_index(mcs_index: int) -> None:
    if not 0 <= mcs_index < N_ACTIONS:
        raise ContractError(f"mcs_index {mcs_index} out of range")


def capacity_bits(snr: np.ndarray) -> np.ndarray:
    return np.log2(1.0 + np.asarray(snr, dtype=np.float64))


def success_mask(snr: np.ndarray, mcs_index: int, mode: str = HARD) -> np.ndarray:
    """Per-subcarrier success (or success probability in soft mode)."""
    _check_index(mcs_index)
    threshold = MCS_RATES[mcs_index] + MARGIN_BITS
    cap = capacity_bits(snr)
    if mode == HARD:
        return (cap >= threshold).astype(np.float64)
    return 1.0 / (1.0 + np.exp(-LOGISTIC_SLOPE * (cap - threshold)))


def throughput(snr: np.ndarray, mcs_index: int, mode: str = HARD) -> float:
    """Mean delivered bits/symbol/subcarrier for one slot."""
    _check_index(mcs_index)
    return MCS_RATES[mcs_index] * float(success_mask(snr, mcs_index, mode).mean())


def all_throughputs(snr: np.ndarray, mode: str = HARD) -> np.ndarray:
    return np.array([throughput(snr, i, mode) for i in range(N_ACTIONS)])


def genie_best(snr: np.ndarray, mode: str = HARD) -> tuple[int, float]:
    """Exhaustive best MCS for the true SNR vector; ties go to the lower rate."""
    tputs = all_throughputs(snr, mode)
    best = int(np.argmax(tputs))  # argmax returns the first (lowest-rate) maximum
    return best, float(tputs[best])
