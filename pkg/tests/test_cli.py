import json
from pathlib import Path

import pytest

from verchain.cli import RunConfig, cmd_extract, main, partition
from verchain.stats import InsufficientData
from worlds import materialize, plain_world, tree_bytes


def extract(sanctuary, fixtures, out, workers=3):
    return main(["extract", "--input", str(sanctuary), "--output", str(out),
                 "--fixtures", str(fixtures), "--workers", str(workers)])


def test_partition_contiguous_and_even():
    assert partition(list(range(9)), 3) == [[0, 1, 2], [3, 4, 5], [6, 7, 8]]
    assert [len(p) for p in partition(list(range(10)), 3)] == [4, 3, 3]
    assert partition([], 2) == [[], []]


def test_anomalous_family_excluded_in_manifest(tmp_path):
    sanctuary, fixtures = materialize(plain_world([3, 1, 2, 101, 4]), tmp_path)
    assert extract(sanctuary, fixtures, tmp_path / "store") == 0
    manifest = json.loads((tmp_path / "store" / "manifest.json").read_text())
    assert manifest["seeds"] == 5 and manifest["families"] == 4 and manifest["excluded_anomalous"] == 1
    assert manifest["excluded"][0]["versions"] == 101
    assert not (tmp_path / "store" / "C3").exists()


def test_three_workers_match_one(tmp_path):
    sanctuary, fixtures = materialize(plain_world([1, 2, 3, 1, 2, 3, 1, 2, 3]), tmp_path)
    assert extract(sanctuary, fixtures, tmp_path / "w1", workers=1) == 0
    assert extract(sanctuary, fixtures, tmp_path / "w3", workers=3) == 0
    assert tree_bytes(tmp_path / "w1") == tree_bytes(tmp_path / "w3")
    assert json.loads((tmp_path / "w3" / "manifest.json").read_text())["versions"] == 18


def test_extract_is_rerunnable(tmp_path):
    sanctuary, fixtures = materialize(plain_world([2, 2]), tmp_path)
    extract(sanctuary, fixtures, tmp_path / "store")
    first = tree_bytes(tmp_path / "store")
    extract(sanctuary, fixtures, tmp_path / "store")
    assert tree_bytes(tmp_path / "store") == first


def test_missing_fixture_gives_partial_exit(tmp_path):
    sanctuary, fixtures = materialize(plain_world([2, 2]), tmp_path)
    (sanctuary / f"0x{'ee' * 20}_Ghost.sol").write_text("contract Ghost {}")
    assert extract(sanctuary, fixtures, tmp_path / "store") == 2
    manifest = json.loads((tmp_path / "store" / "manifest.json").read_text())
    assert len(manifest["failed_seeds"]) == 1 and manifest["families"] == 2


def test_missing_input_fails_fast(tmp_path):
    with pytest.raises(FileNotFoundError):
        cmd_extract(RunConfig(tmp_path / "nope", tmp_path / "out"))
    assert main(["extract", "--input", str(tmp_path / "nope"), "--output", str(tmp_path / "out")]) == 1


def test_empty_input_gives_empty_manifest(tmp_path):
    (tmp_path / "in").mkdir()
    assert extract(tmp_path / "in", tmp_path / "fx", tmp_path / "store") == 0
    manifest = json.loads((tmp_path / "store" / "manifest.json").read_text())
    assert manifest["families"] == 0 and manifest["seeds"] == 0


def test_bad_worker_count_rejected(tmp_path):
    with pytest.raises(ValueError):
        RunConfig(tmp_path, tmp_path, workers=0)


def test_analyze_and_satd_outputs(tmp_path):
    sanctuary, fixtures = materialize(plain_world([3, 2]), tmp_path)
    extract(sanctuary, fixtures, tmp_path / "store")
    for level in ("file", "method"):
        assert main(["analyze", "--input", str(tmp_path / "store"), "--output", str(tmp_path / "res"),
                     "--level", level]) == 0
    rows = (tmp_path / "res" / "metrics_file.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 5
    assert "::" in (tmp_path / "res" / "metrics_method.csv").read_text()
    assert main(["satd", "--input", str(tmp_path / "store"), "--output", str(tmp_path / "res")]) == 0
    timeline = json.loads((tmp_path / "res" / "satd_timeline.json").read_text())
    assert [len(t["versions"]) for t in timeline] == [3, 2]


def test_correlate_needs_two_rows(tmp_path):
    csv_path = tmp_path / "m.csv"
    csv_path.write_text("subject,level,sloc,mccabe,halstead_volume,maintainability_index\n"
                        f"A/0xd/0x{'01' * 20}_A_V1.sol,file,3,1,10.0,150.0\n")
    vulns = tmp_path / "v.json"
    vulns.write_text(json.dumps([{"address": "0x" + "01" * 20, "findings": []}]))
    config = RunConfig(csv_path, tmp_path / "out", vulns=vulns)
    from verchain.cli import cmd_correlate
    with pytest.raises(InsufficientData):
        cmd_correlate(config)
    assert main(["correlate", "--input", str(csv_path), "--output", str(tmp_path / "out"),
                 "--vulns", str(vulns)]) == 1


def test_report_on_empty_store(tmp_path):
    (tmp_path / "store").mkdir()
    assert main(["report", "--input", str(tmp_path / "store"), "--output", str(tmp_path / "res")]) == 0
    summary = json.loads((tmp_path / "res" / "summary.json").read_text())
    assert summary["families"] == 0 and summary["histogram"]["1"]["count"] == 0
    assert summary["debt"]["pct_defined"] is False


def test_keywords_file_changes_detection(tmp_path):
    sanctuary, fixtures = materialize(plain_world([2]), tmp_path)
    extract(sanctuary, fixtures, tmp_path / "store")
    kw = tmp_path / "kw.txt"
    kw.write_text("nothingmatchesthis\n")
    main(["satd", "--input", str(tmp_path / "store"), "--output", str(tmp_path / "res"), "--keywords", str(kw)])
    stats = json.loads((tmp_path / "res" / "satd_stats.json").read_text())
    assert stats["families_with_initial_debt"] == 0
