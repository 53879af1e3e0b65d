import csv
import json

import pytest

from busdrive.cli import main
from busdrive.instance import fixture_t1, fixture_t2, serialize, with_fleet


@pytest.fixture
def t1_file(tmp_path):
    p = tmp_path / "t1.json"
    p.write_text(serialize(fixture_t1(100)))
    return p


@pytest.fixture
def t2_file(tmp_path):
    p = tmp_path / "t2.json"
    p.write_text(serialize(fixture_t2(0)))
    return p


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_t1(t1_file, tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--instance", str(t1_file), "--mipgap", "0", "--out", str(out)]) == 0
    doc = json.loads((out / "summary.json").read_text())
    assert doc["buses"] == 1 and doc["status"] == "Optimal"
    assert doc["objective"] == pytest.approx(-86.0)
    assert _rows(out / "heatmap.csv")[0].keys() == {"grid", "k", "score"}
    assert (out / "schedules.csv").exists() and (out / "score_breakdown.csv").exists()


def test_batch_and_bounds(t1_file, tmp_path):
    out = tmp_path / "out"
    assert main(["batch", "--instance", str(t1_file), "--mipgap", "0", "--out", str(out)]) == 0
    assert "batch_objective" in json.loads((out / "summary.json").read_text())
    assert main(["bounds", "--instance", str(t1_file), "--mipgap", "0", "--out", str(out)]) == 0
    doc = json.loads((out / "bounds.json").read_text())
    assert doc["lb"] <= doc["batch_objective"] <= doc["ub"]
    assert doc["worst_case_gap"] == "undefined"


def test_gen_writes_loadable_instance(tmp_path):
    assert main(["gen", "--gen", "2,2,2,3", "--ib", "1", "--out", str(tmp_path)]) == 0
    out = tmp_path / "b"
    assert main(["batch", "--instance", str(tmp_path / "instance.json"), "--out", str(out)]) == 0


def test_exit_codes(tmp_path, t1_file, capsys):
    assert main(["solve", "--instance", str(tmp_path / "missing.json")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--bogus"])
    assert exc.value.code == 1
    assert main(["batch", "--instance", str(t1_file), "--omega-grid", "1,0.5", "--out", str(tmp_path)]) == 1
    empty = tmp_path / "empty.json"
    empty.write_text(serialize(with_fleet(fixture_t1(100), total=0, max_ib=0)))
    assert main(["solve", "--instance", str(empty), "--out", str(tmp_path)]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_delta_sweep_monotone(t2_file, tmp_path):
    argv = ["sweep", "--instance", str(t2_file), "--param", "delta", "--values", "0,10,100,1000",
            "--mipgap", "0", "--out", str(tmp_path)]
    assert main(argv) == 0
    rows = _rows(tmp_path / "sweep_delta.csv")
    assert all(r["status"] == "ok" for r in rows)
    scores = [float(r["score"]) for r in rows]
    assert scores == sorted(scores)


def test_relocation_sweep_monotone(tmp_path):
    p = tmp_path / "t2.json"
    p.write_text(serialize(fixture_t2(1000)))
    argv = ["sweep", "--instance", str(p), "--param", "relocation_cost", "--values", "0,500,5000",
            "--mipgap", "0", "--out", str(tmp_path)]
    assert main(argv) == 0
    relocs = [int(r["relocations"]) for r in _rows(tmp_path / "sweep_relocation_cost.csv")]
    assert relocs == sorted(relocs, reverse=True) and relocs[-1] == 0


def test_single_value_sweep_matches_solve(t1_file, tmp_path):
    assert main(["sweep", "--instance", str(t1_file), "--param", "delta", "--values", "100",
                 "--mipgap", "0", "--out", str(tmp_path)]) == 0
    assert main(["solve", "--instance", str(t1_file), "--mipgap", "0", "--out", str(tmp_path)]) == 0
    row = _rows(tmp_path / "sweep_delta.csv")[0]
    assert float(row["objective"]) == json.loads((tmp_path / "summary.json").read_text())["objective"]


def test_reruns_are_byte_identical(t1_file, tmp_path):
    texts = []
    for i in range(2):
        out = tmp_path / str(i)
        assert main(["batch", "--instance", str(t1_file), "--out", str(out)]) == 0
        texts.append([(out / n).read_bytes() for n in ("summary.json", "schedules.csv", "heatmap.csv")])
    assert texts[0] == texts[1]
