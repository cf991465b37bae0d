import numpy as np
import pytest

from eiwsim import mcs
from eiwsim.errors import ContractError
from eiwsim.rng import stream


def test_hard_threshold_oracle():
    # capacity log2(1+SNR): 15 -> 4 bits, exactly on the 16QAM margin ...
    snr = np.array([15.0])
    assert mcs.success_mask(snr, 1)[0] == 1.0  # QPSK needs 2.5 bits
    assert mcs.success_mask(snr, 2)[0] == 0.0  # 16QAM needs 4.5 bits
    # ... and 2^4.5 - 1 is the 16QAM boundary (nudged off the float edge)
    snr_edge = np.array([2 ** 4.5 - 1.0 + 1e-9])
    assert mcs.success_mask(snr_edge, 2)[0] == 1.0


def test_throughput_is_rate_times_success_fraction():
    snr = np.array([15.0, 15.0, 0.0, 0.0])  # half the subcarriers pass QPSK
    assert mcs.throughput(snr, 1) == pytest.approx(2 * 0.5)


def test_genie_matches_brute_force():
    gen = stream(0, "mcs")
    for _ in range(200):
        snr = 10 ** gen.uniform(-1.0, 3.5, size=64)
        best, val = mcs.genie_best(snr)
        tputs = [mcs.throughput(snr, a) for a in range(mcs.N_ACTIONS)]
        assert val == pytest.approx(max(tputs))
        assert tputs[best] == pytest.approx(max(tputs))


def test_genie_tie_breaks_to_lower_rate():
    # flat SNR high enough that 1 bit always succeeds and 2 bits exactly
    # half the time gives equal throughput; the lower rate must win
    snr = np.array([2 ** 2.5 - 1.0 + 1e-9, 2 ** 1.5 - 1.0 + 1e-9])
    tputs = mcs.all_throughputs(snr)
    assert tputs[0] == tputs[1]
    best, _ = mcs.genie_best(snr)
    assert best == 0


def test_soft_mode_midpoint():
    # at the exact threshold the logistic success probability is 1/2
    snr_edge = np.array([2 ** 2.5 - 1.0])
    assert mcs.success_mask(snr_edge, 1, mcs.SOFT)[0] == pytest.approx(0.5)
    assert mcs.throughput(snr_edge, 1, mcs.SOFT) == pytest.approx(1.0)


def test_soft_mode_monotone_in_snr():
    lo = mcs.success_mask(np.array([1.0]), 1, mcs.SOFT)[0]
    hi = mcs.success_mask(np.array([10.0]), 1, mcs.SOFT)[0]
    assert hi > lo


def test_index_bounds():
    with pytest.raises(ContractError):
        mcs.throughput(np.ones(4), 5)
    with pytest.raises(ContractError):
        mcs.success_mask(np.ones(4), -1)
