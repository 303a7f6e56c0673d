import json

import pytest

from ofdm_dstc.cli import OUTPUT_DIR_ENV, main


def test_sweep_diversity_and_gap(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    args = ["sweep", "--snr-db", "0", "5", "10", "15", "--max-trials", "32",
            "--target-errors", "100", "--chunk", "8", "--quiet"]
    assert main(args) == 0
    out = tmp_path / "coherent_fourgroup_r4_seed0.csv"
    assert out.exists() and out.with_suffix(".json").exists()
    assert main(args + ["--seed", "1", "--output", str(tmp_path / "b.csv")]) == 0
    capsys.readouterr()
    assert main(["diversity", str(out)]) == 0
    assert float(capsys.readouterr().out) > 0
    assert main(["gap", str(out), str(tmp_path / "b.csv"), "--target-ber", "0.15"]) == 0
    assert abs(float(capsys.readouterr().out)) < 3


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scheme": "clustered_baseline", "snr_db": [10],
                               "max_trials": 8, "chunk": 8,
                               "target_errors": 10 ** 9}))
    out = tmp_path / "r.csv"
    assert main(["sweep", "--config", str(cfg), "--max-trials", "16", "--output", str(out)]) == 0
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["config"]["code"] == "clustered_alamouti_r4"
    assert side["points"][0]["trials"] == 16


def test_invalid_config_exits_nonzero(tmp_path, capsys):
    assert main(["sweep", "--tau-max", "20", "--output", str(tmp_path / "x.csv")]) == 2
    assert "exceeds l_cp" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"snr": [1]}))
    assert main(["sweep", "--config", str(cfg)]) == 2


def test_validate_code(capsys, tmp_path):
    assert main(["validate-code", "fourgroup_r4", "--rank"]) == 0
    assert "min rank 4" in capsys.readouterr().out
    assert main(["validate-code", "example1_r5"]) == 0
    assert "WARN balanced: row 5" in capsys.readouterr().out
    assert main(["validate-code", "clustered_alamouti_r4", "--rank"]) == 1
    assert main(["validate-code", "clustered_alamouti_r4", "--rank", "--expect-rank", "2"]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"R": 1, "T": 1, "K": 2,
                               "columns": [{"conj": False, "A": [[1, 1]]}]}))
    assert main(["validate-code", str(bad)]) == 1
    assert "FAIL structure" in capsys.readouterr().out
    assert main(["validate-code", "nope"]) == 2


def test_derive_schedule(capsys):
    assert main(["derive-schedule", "example1_r5"]) == 0
    out = capsys.readouterr().out
    assert "zeta(r5,6)" in out and "x2:DFT" in out
    assert main(["derive-schedule", "alamouti", "--json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["reversed_slots"] == [2] and d["source_modulation"] == ["IDFT", "DFT"]


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
