import json

import numpy as np
import pytest

from bitsi import io
from bitsi.cli import main

from .conftest import synthetic_series


@pytest.fixture
def csv_dir(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    rng = np.random.default_rng(11)
    for k in range(3):
        io.write_series_csv(d / f"s{k}.csv", synthetic_series(rng, 2, 24, 20).values, header=["a", "b"])
    return d


def test_encode_decode_roundtrip(tmp_path, geometry_series):
    src = tmp_path / "g.csv"
    io.write_series_csv(src, geometry_series.values)
    assert main(["encode", "--input", str(src), "--periodicity", "24", "--out", str(tmp_path / "o")]) == 0
    out = tmp_path / "o"
    assert {p.name for p in out.iterdir()} == {"g.png", "g.floatimg", "g.meta.json"}
    assert main(["decode", "--image", str(out / "g.floatimg"), "--meta", str(out / "g.meta.json"),
                 "--out", str(tmp_path / "d.csv")]) == 0
    back = io.read_matrix_csv(tmp_path / "d.csv")
    assert np.allclose(back, geometry_series.values, rtol=1e-9, atol=0)


def test_encode_forecast_and_impute_masks(tmp_path, geometry_series):
    src = tmp_path / "g.csv"
    io.write_series_csv(src, geometry_series.values)
    assert main(["encode", "--input", str(src), "--periodicity", "24", "--mask", "forecast:30",
                 "--out", str(tmp_path / "f")]) == 0
    meta = io.read_meta(tmp_path / "f" / "g.meta.json")
    assert meta.layout.total_cycles == 12 and meta.mask.masked_cycles[0] == (11, 12)
    assert main(["encode", "--input", str(src), "--periodicity", "24", "--mask", "impute:0.3",
                 "--seed", "1", "--out", str(tmp_path / "i")]) == 0
    meta = io.read_meta(tmp_path / "i" / "g.meta.json")
    assert meta.mask.ratio(3, 10) == pytest.approx(0.3)
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--input", str(src), "--periodicity", "24", "--mask", "impute:0.3", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_exit_codes(tmp_path, geometry_series):
    src = tmp_path / "g.csv"
    io.write_series_csv(src, geometry_series.values)
    assert main(["encode", "--input", str(src), "--periodicity", "24", "--canvas", "40x896",
                 "--out", str(tmp_path / "o")]) == 4
    assert main(["encode", "--input", str(tmp_path / "missing.csv"), "--periodicity", "24",
                 "--out", str(tmp_path / "o")]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["encode", "--periodicity", "24"])
    assert exc.value.code == 2


@pytest.mark.parametrize("depth", ["float", "u8"])
def test_roundtrip_command(tmp_path, geometry_series, depth, capsys):
    src = tmp_path / "g.csv"
    io.write_series_csv(src, geometry_series.values)
    assert main(["roundtrip", "--input", str(src), "--periodicity", "24", "--bit-depth", depth]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")


def test_pipeline_naive_and_self_scores(tmp_path, csv_dir):
    for task in ("forecast", "impute"):
        out = tmp_path / task
        assert main(["gen-data", "--input", str(csv_dir), "--task", task, "--n", "6", "--seed", "3",
                     "--out", str(out), "--periodicity", "24"]) == 0
        assert len(io.read_jsonl(out / "generation.jsonl")) == 6
        assert main(["eval", "--task", task, "--baseline", "naive", "--instances", str(out),
                     "--out", str(tmp_path / f"{task}.json")]) == 0
        rep = json.loads((tmp_path / f"{task}.json").read_text())
        assert all(r["nmase"] == 1.0 for r in rep["rows"])
    assert main(["eval", "--task", "impute", "--baseline", "linear", "--instances", str(tmp_path / "impute"),
                 "--out", str(tmp_path / "lin.json")]) == 0
    qa_path = tmp_path / "qa.jsonl"
    assert main(["gen-qa", "--instances", str(tmp_path / "impute"), "--seed", "5", "--out", str(qa_path)]) == 0
    assert main(["score", "--pred", str(qa_path), "--gt", str(qa_path), "--out", str(tmp_path / "s.json")]) == 0
    rep = json.loads((tmp_path / "s.json").read_text())
    assert rep and all(v["mean_score"] == 1.0 and v["success_rate"] == 1.0 for v in rep.values())


def test_external_predictions(tmp_path, csv_dir):
    out = tmp_path / "gen"
    main(["gen-data", "--input", str(csv_dir), "--task", "impute", "--n", "4", "--seed", "0",
          "--out", str(out), "--periodicity", "24"])
    ext = tmp_path / "ext"
    for d in sorted((out / "instances").iterdir())[:3]:
        (ext / d.name).mkdir(parents=True)
        (ext / d.name / "completed.png").write_bytes((d / "target.png").read_bytes())
    assert main(["eval", "--task", "impute", "--baseline", f"external:{ext}", "--instances", str(out),
                 "--out", str(tmp_path / "e.json")]) == 0
    row = json.loads((tmp_path / "e.json").read_text())["rows"][-1]
    assert row["success_rate"] == pytest.approx(0.75)
    assert row["nmase"] < 0.5
