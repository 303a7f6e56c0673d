import json

import numpy as np
import pytest

from ofdm_dstc.sim import (
    ConfigError,
    EstimationError,
    ExperimentConfig,
    PointResult,
    SweepResult,
    compare_gap,
    estimate_diversity,
    load_sweep,
    run_sweep,
)


def quick(**kw):
    base = dict(snr_db=(10.0, 20.0), max_trials=32, target_errors=10 ** 9, chunk=8)
    base.update(kw)
    return ExperimentConfig(**base)


def synthetic(snr_db, ber):
    pts = [PointResult(s, 100, 10 ** 9, int(round(b * 10 ** 9)), 1, 0)
           for s, b in zip(snr_db, ber)]
    return SweepResult({}, pts)


@pytest.mark.parametrize("kw, msg", [
    (dict(tau_max=17), "exceeds l_cp"),
    (dict(N=48), "power of two"),
    (dict(max_trials=0), "max_trials"),
    (dict(code="nope"), "unknown code"),
    (dict(code="alamouti"), "R=2"),
    (dict(scheme="differential", code="alamouti", R=2), "fourgroup_r4 only"),
    (dict(scheme="bogus"), "scheme"),
    (dict(snr_db=()), "empty"),
])
def test_config_violations(kw, msg):
    with pytest.raises(ConfigError, match=msg):
        run_sweep(quick(**kw))


def test_all_violations_reported_together():
    probs = quick(N=48, tau_max=99, max_trials=0).problems()
    assert len(probs) >= 3


def test_cp_violation_can_be_allowed():
    assert quick(tau_max=40, allow_cp_violation=True).problems() == []


def test_config_dict_round_trip(tmp_path):
    cfg = quick(scheme="clustered_baseline")
    assert cfg.code == "clustered_alamouti_r4"
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({"snr": [1]})


@pytest.mark.parametrize("scheme", ["coherent", "clustered_baseline", "differential"])
def test_noiseless_point_is_error_free(scheme):
    res = run_sweep(quick(scheme=scheme, snr_db=(float("inf"),), max_trials=16))
    p = res.points[0]
    assert p.trials == 16 and p.bit_errors == 0 and p.ber == 0 and p.bler == 0


def test_counts_and_metadata():
    res = run_sweep(quick(snr_db=(5.0,)))
    p = res.points[0]
    assert p.bits == 32 * 64 * 8 and p.blocks == 32 * 64
    assert 0 <= p.ber <= 1 and p.ber == p.bit_errors / p.bits
    m = res.metadata
    assert m["rotation_deg"] == 31.5 and len(m["code_hash"]) == 16
    assert m["package_version"] and m["schedule"]["reversed_slots"] == [3, 4]
    assert res.config["scheme"] == "coherent"


def test_differential_counts():
    res = run_sweep(quick(scheme="differential", diff_frames=3, snr_db=(15.0,)))
    p = res.points[0]
    assert p.bits == 32 * 64 * 3 * 8


def test_stopping_rule():
    res = run_sweep(quick(snr_db=(0.0, 30.0), target_errors=50, max_trials=64))
    low, high = res.points
    assert low.trials == 8 and low.bit_errors >= 50
    assert high.trials == 64 or high.bit_errors >= 50
    assert high.trials % 8 == 0


def test_same_seed_same_result_and_seed_matters():
    a = run_sweep(quick())
    b = run_sweep(quick())
    c = run_sweep(quick(master_seed=1))
    assert a == b
    assert [p.bit_errors for p in a.points] != [p.bit_errors for p in c.points]


def test_worker_count_does_not_change_result():
    cfg = quick(snr_db=(8.0, 14.0), target_errors=300, max_trials=80)
    one = run_sweep(cfg)
    cfg.workers = 3
    assert run_sweep(cfg) == one


def test_wall_time_excluded_from_equality():
    a = run_sweep(quick(snr_db=(10.0,)))
    b = SweepResult(a.config, [PointResult(**{**p.__dict__, "wall_time": 99.0})
                               for p in a.points], a.metadata)
    assert a == b


def test_csv_and_sidecar(tmp_path):
    out = tmp_path / "sub" / "run.csv"
    res = run_sweep(quick(output=str(out)))
    lines = out.read_text().splitlines()
    assert lines[0] == "snr_db,trials,bit_errors,ber,bler"
    assert len(lines) == 3
    assert float(lines[1].split(",")[3]) == pytest.approx(res.points[0].ber, rel=1e-6)
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["config"]["snr_db"] == [10.0, 20.0]
    assert load_sweep(out) == res
    out.with_suffix(".json").unlink()
    bare = load_sweep(out)
    np.testing.assert_allclose(bare.ber, res.ber, rtol=1e-6)


def test_monotone_curve():
    res = run_sweep(ExperimentConfig(snr_db=(0.0, 5.0, 10.0, 15.0, 20.0),
                                     max_trials=4000, target_errors=200, chunk=16))
    assert np.all(res.bit_errors >= 100)
    assert np.all(np.diff(res.ber) < 0)


def test_cp_violation_error_floor():
    res = run_sweep(ExperimentConfig(tau_max=40, allow_cp_violation=True,
                                     snr_db=(40.0, 50.0), max_trials=64,
                                     target_errors=10 ** 9))
    assert np.all(res.ber > 1e-2)
    ok = run_sweep(ExperimentConfig(snr_db=(40.0,), max_trials=64, target_errors=10 ** 9))
    assert ok.ber[0] < 1e-3


def test_alamouti_diversity():
    res = run_sweep(ExperimentConfig(code="alamouti", R=2, snr_db=(27.0, 30.0, 33.0, 36.0),
                                     max_trials=10 ** 6, target_errors=1000, chunk=64,
                                     master_seed=3))
    assert 1.6 <= estimate_diversity(res, (27, 36), min_errors=200) <= 2.4


def test_diversity_synthetic():
    snr = np.arange(0.0, 40.0, 5.0)
    ber = 0.3 * (10 ** (snr / 10)) ** -2.0
    assert estimate_diversity(synthetic(snr, ber)) == pytest.approx(2.0, abs=0.01)
    assert estimate_diversity(synthetic(snr, ber), window=(10, 25)) == pytest.approx(2.0, abs=0.01)


def test_diversity_needs_three_points():
    res = synthetic([0, 10, 20, 30], [1e-1, 1e-2, 0.0, 0.0])
    with pytest.raises(EstimationError):
        estimate_diversity(res)
    with pytest.raises(EstimationError):
        estimate_diversity(synthetic([0, 10, 20], [0.1, 0.01, 0.001]), window=(5, 30))


def test_gap_synthetic():
    snr = np.arange(0.0, 41.0, 2.0)
    ber = 0.5 * (10 ** (snr / 10)) ** -1.5
    a = synthetic(snr, ber)
    assert compare_gap(a, a, 1e-3) == pytest.approx(0.0, abs=1e-12)
    b = synthetic(snr + 3.0, ber)
    assert compare_gap(a, b, 1e-3) == pytest.approx(3.0, abs=0.05)
    assert compare_gap(b, a, 1e-3) == pytest.approx(-3.0, abs=0.05)
    with pytest.raises(EstimationError):
        compare_gap(a, b, 1e-12)
