"""CLI subcommands, exit codes, and the synth -> map -> chat round trip."""

import json

import pytest

from bevlang.cli import main
from bevlang.objects import parse_map


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["synth"])  # missing required --out
    assert exc_info.value.code == 2
    with pytest.raises(SystemExit) as exc_info:
        main(["unknown-command"])
    assert exc_info.value.code == 2


def test_engine_error_exits_1(tmp_path, capsys):
    code, _, err = run(capsys, "build-map", "--bundle", str(tmp_path / "missing"))
    assert code == 1
    assert "error" in err


def test_synth_build_map_chat_round_trip(tmp_path, capsys):
    bundle_dir = tmp_path / "bundle"
    code, out, _ = run(
        capsys,
        "synth",
        "--out",
        str(bundle_dir),
        "--token",
        "cli-scene",
        "--seed",
        "9",
        "--objects",
        "5",
        "--no-render",
    )
    assert code == 0
    assert "cli-scene" in out
    assert (bundle_dir / "scene.json").is_file()
    assert (bundle_dir / "lidar.bin").is_file()

    map_path = tmp_path / "map.json"
    code, out, _ = run(
        capsys, "build-map", "--bundle", str(bundle_dir), "--out", str(map_path)
    )
    assert code == 0
    lmap = parse_map(map_path.read_text())
    assert lmap.scene_token == "cli-scene"
    assert len(lmap.objects) == 5

    code, out, _ = run(
        capsys,
        "chat",
        "--map",
        str(map_path),
        "Which objects are in front of the ego vehicle?",
    )
    assert code == 0
    response = json.loads(out)
    assert isinstance(response["answer"], list)
    assert response["tool_trace"][0]["call"] == "front_filter(objs)"


def test_build_map_gt_to_stdout(tmp_path, capsys):
    bundle_dir = tmp_path / "bundle"
    run(capsys, "synth", "--out", str(bundle_dir), "--seed", "4", "--no-render")
    code, out, _ = run(capsys, "build-map", "--bundle", str(bundle_dir), "--gt")
    assert code == 0
    lmap = parse_map(out)
    assert lmap.provenance.bev_source == "ground_truth"


def test_chat_reads_stdin(tmp_path, capsys, monkeypatch):
    import io

    bundle_dir = tmp_path / "bundle"
    run(capsys, "synth", "--out", str(bundle_dir), "--seed", "2", "--no-render")
    map_path = tmp_path / "map.json"
    run(capsys, "build-map", "--bundle", str(bundle_dir), "--out", str(map_path))
    monkeypatch.setattr(
        "sys.stdin",
        io.StringIO(
            "Which objects are behind the ego vehicle?\n\nHow far is object 1 from the ego vehicle?\n"
        ),
    )
    code, out, _ = run(capsys, "chat", "--map", str(map_path))
    assert code == 0
    # two questions -> two JSON documents
    decoder = json.JSONDecoder()
    first, end = decoder.raw_decode(out)
    second, _ = decoder.raw_decode(out[end:].lstrip())
    assert isinstance(first["answer"], list)
    assert isinstance(second["answer"], float)


def test_chat_numeric_ablation(tmp_path, capsys):
    bundle_dir = tmp_path / "bundle"
    run(capsys, "synth", "--out", str(bundle_dir), "--seed", "2", "--no-render")
    map_path = tmp_path / "map.json"
    run(capsys, "build-map", "--bundle", str(bundle_dir), "--out", str(map_path))
    code, out, _ = run(
        capsys,
        "chat",
        "--map",
        str(map_path),
        "--numeric",
        "How far is object 1 from the ego vehicle?",
    )
    assert code == 0
    response = json.loads(out)
    assert response["spatial_reasoning_functions"] == []
    assert float(response["answer"]) == response["answer"]


def test_bench_gen(tmp_path, capsys):
    bundle_dir = tmp_path / "bundle"
    run(capsys, "synth", "--out", str(bundle_dir), "--seed", "6", "--no-render")
    map_path = tmp_path / "map.json"
    run(capsys, "build-map", "--bundle", str(bundle_dir), "--out", str(map_path))
    out_path = tmp_path / "bench.json"
    code, _, _ = run(
        capsys, "bench", "gen", "--map", str(map_path), "--seed", "1", "--out", str(out_path)
    )
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert len(doc["questions"]) == 20
    assert len(doc["spatial_queries"]) == 5


def test_bench_run_modes(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code, _, _ = run(
        capsys,
        "bench",
        "run",
        "--mode",
        "with_so",
        "--scenes",
        "2",
        "--out",
        str(out_path),
    )
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert doc["report"]["mean_jaccard"] == 1.0
    code, out, _ = run(capsys, "bench", "run", "--mode", "random", "--scenes", "2")
    assert code == 0
    assert json.loads(out)["report"]["mean_jaccard"] < 1.0


def test_serve_requires_scenes(capsys):
    code = main(["serve", "--synthetic", "0"])
    captured = capsys.readouterr()
    assert code == 2
    assert "no scenes" in captured.err
