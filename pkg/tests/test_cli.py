import csv
import json

import pytest

from mmdn.cli import _parse_seeds, main, read_records

FAST = ["--mu", "8", "--n1", "5", "--n2", "2"]


def test_unknown_problem_exit_2(tmp_path, capsys):
    code = main(["run", "--problem", "nope", "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 2
    assert "nope" in err and "zdt1" in err and "dtlz7" in err


def test_run_writes_records_and_summary(tmp_path, capsys):
    code = main(["run", "--problem", "zdt1", *FAST, "--seeds", "0", "--out", str(tmp_path)])
    assert code == 0
    recs = read_records(tmp_path / "records.jsonl")
    assert [r.mode for r in recs] == ["hybrid", "moea-matched"]
    rows = list(csv.reader((tmp_path / "summary.csv").open()))
    assert rows[0] == ["problem", "mode", "seed_count", "median_d2", "q10_d2", "q90_d2", "median_budget"]
    assert len(rows) == 3
    assert "seed 0" in capsys.readouterr().out


def test_run_without_baseline(tmp_path):
    main(["run", "--problem", "zdt2", *FAST, "--no-baseline", "--out", str(tmp_path)])
    assert [r.mode for r in read_records(tmp_path / "records.jsonl")] == ["hybrid"]


def test_bench_three_seeds(tmp_path):
    args = ["bench", "--problem", "zdt1", "--mode", "moea-alone", *FAST, "--seeds", "0-2", "--workers", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = read_records(tmp_path / "a" / "records.jsonl")
    b = read_records(tmp_path / "b" / "records.jsonl")
    assert [r.seed for r in a] == [0, 1, 2]
    assert [r.Y for r in a] == [r.Y for r in b]


def test_bench_config_file(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"runs": [
        {"problem": "zdt1", "mode": "moea-alone", "mu": 6, "n1": 3, "seeds": [0, 1]},
        {"problem": "dtlz2", "mode": "moea-alone", "mu": 6, "n1": 3, "seeds": [0]},
    ]}))
    assert main(["bench", "--config", str(cfg), "--workers", "1", "--out", str(tmp_path)]) == 0
    recs = read_records(tmp_path / "records.jsonl")
    assert [(r.problem, r.seed) for r in recs] == [("zdt1", 0), ("zdt1", 1), ("dtlz2", 0)]


def test_stats(tmp_path, capsys):
    main(["bench", "--problem", "zdt1", *FAST, "--seeds", "0,1", "--workers", "1", "--out", str(tmp_path)])
    capsys.readouterr()
    summary = tmp_path / "other.csv"
    assert main(["stats", str(tmp_path), "--summary", str(summary)]) == 0
    out = capsys.readouterr().out
    assert "hybrid vs baseline" in out
    rows = list(csv.DictReader(summary.open()))
    assert {r["mode"] for r in rows} == {"hybrid", "moea-matched"}
    assert all(r["seed_count"] == "2" for r in rows)


def test_stats_missing_records(tmp_path):
    assert main(["stats", str(tmp_path / "none.jsonl")]) == 2


def test_stats_malformed_records(tmp_path):
    bad = tmp_path / "records.jsonl"
    bad.write_text("{not json\n")
    assert main(["stats", str(bad)]) == 2


@pytest.mark.parametrize("content", ["{", "[1, 2]", '{"problem": "zdt1", "colour": 3}', '{"problem": "zdt1", "mu": 1}'])
def test_malformed_config(tmp_path, capsys, content):
    cfg = tmp_path / "c.json"
    cfg.write_text(content)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_config_flags_override_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "zdt2", "mode": "moea-alone", "mu": 6, "n1": 2}))
    main(["run", "--config", str(cfg), "--problem", "zdt1", "--out", str(tmp_path)])
    (rec,) = read_records(tmp_path / "records.jsonl")
    assert rec.problem == "zdt1" and rec.mu == 6


def test_check(capsys):
    assert main(["check"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("[PASS]") for line in lines)


def test_plot_output(tmp_path):
    main(["run", "--problem", "zdt1", *FAST, "--out", str(tmp_path), "--plot"])
    assert (tmp_path / "summary.png").exists()
    assert (tmp_path / "zdt1_hybrid_seed0.png").exists()


def test_parse_seeds():
    assert _parse_seeds("0,1,2") == [0, 1, 2]
    assert _parse_seeds("3-5,9") == [3, 4, 5, 9]
