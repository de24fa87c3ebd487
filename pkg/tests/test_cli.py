import json
from pathlib import Path

from bustrace import records
from bustrace.cli import main
from bustrace.synthetic import line829_dataset

from conftest import CASE_RESULT


def write_inputs(tmp_path: Path, dataset=None) -> dict:
    dataset = dataset or line829_dataset()
    lines = tmp_path / "lines.ndjson"
    points = tmp_path / "points.ndjson"
    fixes = tmp_path / "fixes.ndjson"
    with open(lines, "w", encoding="utf-8") as f:
        records.write_lines(dataset.lines.values(), f)
    with open(points, "w", encoding="utf-8") as f:
        records.write_line_points(dataset.stops.values(), dataset.itineraries, f)
    with open(fixes, "w", encoding="utf-8") as f:
        records.write_vehicle_fixes([x for g in dataset.fixes.values() for x in g], f)
    return {
        "lines_file": str(lines),
        "line_points_file": str(points),
        "fixes_file": str(fixes),
    }


def write_config(tmp_path: Path, **overrides) -> Path:
    config = write_inputs(tmp_path) | {"od_pairs": 5, "seed": 11} | overrides
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def test_detect_reproduces_case_study_rows(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["detect", "--config", str(config), "--out", str(out)]) == 0

    lines = (out / "detected_itineraries.csv").read_text().splitlines()
    assert lines[0].startswith("line_code,")
    got = []
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[0] == "829" and cells[2] == "BA020"
        got.append((int(cells[5]), cells[6], cells[7], cells[8]))
    assert got == CASE_RESULT
    assert (out / "tags_by_category.csv").is_file()
    assert (out / "manifest.json").is_file()


def test_all_is_deterministic_byte_for_byte(tmp_path):
    config = write_config(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["all", "--config", str(config), "--out", str(out_a)]) == 0
    assert main(["all", "--config", str(config), "--out", str(out_b)]) == 0

    names_a = sorted(p.name for p in out_a.iterdir())
    names_b = sorted(p.name for p in out_b.iterdir())
    assert names_a == names_b
    for name in names_a:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_route_without_clusters_fails_with_error_record(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    code = main(["route", "--config", str(config), "--out", str(out)])
    assert code != 0
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"]["type"] == "MissingDependencyError"
    assert "clusters.csv" in record["error"]["message"]
    assert not list(out.glob("od_*.csv"))


def test_seed_flag_overrides_config(tmp_path):
    config = write_config(tmp_path, seed=1)
    out = tmp_path / "out"
    assert main(["detect", "--config", str(config), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 1

    assert main(["detect", "--config", str(config), "--out", str(out), "--seed", "99"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 99


def test_manifest_lists_every_artifact_with_digest(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["all", "--config", str(config), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    csvs = {p.name for p in out.glob("*.csv")}
    assert set(manifest["artifacts"]) == csvs
    for digest in manifest["artifacts"].values():
        assert len(digest) == 64
    assert set(manifest["inputs"]) == {"lines_file", "line_points_file", "fixes_file"}


def test_unknown_config_key_rejected(tmp_path, capsys):
    config = write_config(tmp_path, bogus_key=3)
    out = tmp_path / "out"
    assert main(["validate", "--config", str(config), "--out", str(out)]) != 0
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "bogus_key" in record["error"]["message"]


def test_missing_input_file_reported(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "lines_file": str(tmp_path / "absent.ndjson"),
                "line_points_file": str(tmp_path / "absent.ndjson"),
                "fixes_file": str(tmp_path / "absent.ndjson"),
            }
        )
    )
    assert main(["validate", "--config", str(config), "--out", str(tmp_path / "out")]) != 0
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"]["type"] == "FileNotFoundError"


def test_validate_reports_dangling_reference(tmp_path):
    dataset = line829_dataset()
    inputs = write_inputs(tmp_path, dataset)
    # add a fixes record for a line that has no itinerary
    with open(inputs["fixes_file"], "a", encoding="utf-8") as f:
        f.write(
            json.dumps(
                {
                    "vehicle_id": "ZZ999",
                    "line_code": "999",
                    "lat": -25.4,
                    "lon": -49.3,
                    "dthr": "07/11/2022 10:00:00",
                }
            )
            + "\n"
        )
    config = tmp_path / "config.json"
    config.write_text(json.dumps(inputs))
    out = tmp_path / "out"
    assert main(["validate", "--config", str(config), "--out", str(out)]) == 0
    report = (out / "validation.csv").read_text()
    assert "unresolvable_line" in report
    assert "ZZ999/999" in report


def test_jobs_flag_produces_identical_artifacts(tmp_path):
    config = write_config(tmp_path)
    out_serial = tmp_path / "serial"
    out_parallel = tmp_path / "parallel"
    assert main(["detect", "--config", str(config), "--out", str(out_serial)]) == 0
    assert (
        main(["detect", "--config", str(config), "--out", str(out_parallel), "--jobs", "2"]) == 0
    )
    a = (out_serial / "detected_itineraries.csv").read_bytes()
    b = (out_parallel / "detected_itineraries.csv").read_bytes()
    assert a == b
