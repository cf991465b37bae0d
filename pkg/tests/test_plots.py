import csv

import numpy as np
import pytest

from eiwsim import harness, plots
from eiwsim.errors import ContractError, FileFormatError


def _write_metrics(path, scheme, seed, tputs):
    rows = [harness.MetricsRow(i, scheme, seed, 0.0, 0, 2, t, t, i + 1, 0.1)
            for i, t in enumerate(tputs)]
    harness.write_metrics(str(path), rows)


def test_rolling_mean_values():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(plots.rolling_mean(x, 2), [1.5, 2.5, 3.5])
    assert np.array_equal(plots.rolling_mean(x, 1), x)


def test_timeseries_mean_and_std_across_seeds(tmp_path):
    # three seeds with constant throughputs 1, 2, 3 -> mean 2, std of
    # {1,2,3} about the mean = sqrt(2/3)
    paths = []
    for seed, level in enumerate([1.0, 2.0, 3.0]):
        p = tmp_path / f"m{seed}.csv"
        _write_metrics(p, "frozen", seed, [level] * 10)
        paths.append(str(p))
    outputs = plots.emit_timeseries(paths, str(tmp_path / "ts"), smooth=4)
    assert set(outputs) == {str(tmp_path / "ts.csv"), str(tmp_path / "ts.svg")}
    with open(outputs[0]) as f:
        rows = list(csv.DictReader(f))
    assert all(r["scheme"] == "frozen" for r in rows)
    assert all(float(r["mean_throughput"]) == pytest.approx(2.0) for r in rows)
    assert all(float(r["std_throughput"]) == pytest.approx(np.sqrt(2.0 / 3.0))
               for r in rows)


def test_timeseries_identical_seeds_have_zero_std(tmp_path):
    paths = []
    for seed in range(2):
        p = tmp_path / f"m{seed}.csv"
        _write_metrics(p, "direct_rl", seed, list(range(8)))
        paths.append(str(p))
    outputs = plots.emit_timeseries(paths, str(tmp_path / "ts"), smooth=1)
    with open(outputs[0]) as f:
        rows = list(csv.DictReader(f))
    assert all(float(r["std_throughput"]) == 0.0 for r in rows)


def test_timeseries_rejects_empty_input(tmp_path):
    with pytest.raises(ContractError):
        plots.emit_timeseries([], str(tmp_path / "ts"))


def test_malformed_value_reports_line_number(tmp_path):
    p = tmp_path / "m.csv"
    _write_metrics(p, "frozen", 0, [1.0, 2.0])
    lines = p.read_text().splitlines()
    parts = lines[2].split(",")
    parts[harness.METRICS_COLUMNS.index("throughput")] = "oops"
    lines[2] = ",".join(parts)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(FileFormatError, match=r"m\.csv:3:"):
        plots.emit_timeseries([str(p)], str(tmp_path / "ts"), smooth=1)


def test_lambda_tradeoff_aggregates_and_skips_all_rows(tmp_path):
    results = []
    for lam in (0.0, 0.5):
        for seed, frac in ((1, 0.4), (2, 0.6)):
            results.append({"lambda": lam, "seed": seed,
                            "expert2_fraction": frac if lam == 0.0 else 0.0,
                            "mean_throughput": 2.0, "mean_objective": 2.0})
    sweep = tmp_path / "sweep.csv"
    harness.write_sweep_csv(str(sweep), results)
    outputs = plots.emit_lambda_tradeoff(str(sweep), str(tmp_path / "lt"))
    with open(outputs[0]) as f:
        rows = {r["lambda"]: r for r in csv.DictReader(f)}
    assert float(rows["0"]["expert2_mean"]) == pytest.approx(0.5)
    assert float(rows["0"]["expert2_std"]) == pytest.approx(0.1)
    assert float(rows["0.5"]["expert2_mean"]) == 0.0


def test_bar_comparison_groups_by_label(tmp_path):
    p = tmp_path / "tiers.csv"
    p.write_text("tier,seed,genie_ratio\nsmall,1,0.6\nsmall,2,0.8\n"
                 "large,1,0.7\n")
    outputs = plots.emit_bar_comparison(str(p), str(tmp_path / "bars"),
                                        "tier", "genie_ratio")
    with open(outputs[0]) as f:
        rows = {r["tier"]: r for r in csv.DictReader(f)}
    assert float(rows["small"]["genie_ratio_mean"]) == pytest.approx(0.7)
    assert float(rows["large"]["genie_ratio_std"]) == 0.0
    with pytest.raises(FileFormatError):
        plots.emit_bar_comparison(str(p), str(tmp_path / "b2"), "tier", "nope")
