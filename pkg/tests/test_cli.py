import json

import pytest

from artpose.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SCENES, main


def _run(*args):
    return main([str(a) for a in args])


def test_generate_five(tmp_path):
    out = tmp_path / "s"
    assert _run("generate", "-o", out, "-n", 5, "--set", "generate.n_points=2048") == EXIT_OK
    files = sorted(out.glob("*.apf"))
    assert len(files) == 5
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert [e["file"] for e in manifest["scenes"]] == [f.name for f in files]
    assert len({e["seed"] for e in manifest["scenes"]}) == 5
    # rerun is byte identical
    out2 = tmp_path / "s2"
    _run("generate", "-o", out2, "-n", 5, "--set", "generate.n_points=2048")
    for f in files:
        assert f.read_bytes() == (out2 / f.name).read_bytes()
    assert (out / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()


def test_generate_zero(tmp_path):
    assert _run("generate", "-o", tmp_path, "-n", 0) == EXIT_OK
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["scenes"] == [] and manifest["n_scenes"] == 0


def test_fit_and_eval_oracle(tmp_path):
    scenes, results, report = tmp_path / "scenes", tmp_path / "results", tmp_path / "report"
    _run("generate", "-o", scenes, "-n", 3)
    assert _run("fit", "-i", scenes, "-o", results) == EXIT_OK
    rec = json.loads((results / "scene_00000.json").read_text())
    assert rec["status"] == "ok"
    inst = rec["instances"][0]
    assert set(inst) >= {"class", "confidence", "point_indices", "pose", "joint", "failure"}
    assert _run("eval", "-i", results, "-g", scenes, "-o", report) == EXIT_OK
    r = json.loads((report / "report.json").read_text())
    assert r["segmentation"]["Avg.AP50"] == 100.0
    assert r["pose"]["A_5"] == 100.0
    assert (report / "report.txt").read_text().startswith("scenes: 3")


def test_fit_corrupted_succeeds(tmp_path):
    scenes, results = tmp_path / "scenes", tmp_path / "results"
    _run("generate", "-o", scenes, "-n", 2, "--set", "corruption.label_flip_prob=0.1",
         "--set", "corruption.confidence_temperature=0.5")
    assert _run("fit", "-i", scenes, "-o", results) == EXIT_OK
    assert len(list(results.glob("*.json"))) == 2


def test_empty_prediction_file_is_scene_failure(tmp_path):
    scenes, results = tmp_path / "scenes", tmp_path / "results"
    _run("generate", "-o", scenes, "-n", 1, "--set", "generate.n_points=1024")
    (scenes / "scene_99999.apf").write_bytes(b"")
    assert _run("fit", "-i", scenes, "-o", results) == EXIT_SCENES
    rec = json.loads((results / "scene_99999.json").read_text())
    assert rec["status"] == "error" and rec["reason"] == "parse_error"
    assert json.loads((results / "scene_00000.json").read_text())["status"] == "ok"


def test_eval_mismatch_names_missing_ids(tmp_path, capsys):
    scenes, results = tmp_path / "scenes", tmp_path / "results"
    _run("generate", "-o", scenes, "-n", 2, "--set", "generate.n_points=1024")
    _run("fit", "-i", scenes, "-o", results)
    (results / "scene_00001.json").unlink()
    assert _run("eval", "-i", results, "-g", scenes, "-o", tmp_path / "r") == EXIT_CONFIG
    assert "scene_00001" in capsys.readouterr().err


def test_config_and_io_errors(tmp_path, capsys):
    assert _run("demo", "-o", tmp_path, "--set", "cluster.eps=-1") == EXIT_CONFIG
    assert "cluster.eps" in capsys.readouterr().err
    assert _run("fit", "-o", tmp_path) == EXIT_CONFIG
    assert _run("fit", "-i", tmp_path / "nope", "-o", tmp_path / "out") == EXIT_IO


def test_config_file_flag(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[generate]\nn_scenes = 2\nn_points = 1024\n[paths]\noutput = "%s"\n' % (tmp_path / "g"))
    assert _run("generate", "-c", cfg) == EXIT_OK
    assert len(list((tmp_path / "g").glob("*.apf"))) == 2


def test_workers_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _run("demo", "-o", a, "-n", 3, "--set", "generate.n_points=2048")
    _run("demo", "-o", b, "-n", 3, "--set", "generate.n_points=2048", "--workers", 2)
    assert (a / "report" / "report.json").read_bytes() == (b / "report" / "report.json").read_bytes()


def test_demo_equals_separate_stages(tmp_path):
    d = tmp_path / "demo"
    _run("demo", "-o", d, "-n", 3, "--set", "corruption.label_flip_prob=0.05")
    s, r, e = tmp_path / "s", tmp_path / "r", tmp_path / "e"
    _run("generate", "-o", s, "-n", 3, "--set", "corruption.label_flip_prob=0.05")
    _run("fit", "-i", s, "-o", r)
    _run("eval", "-i", r, "-g", s, "-o", e)
    assert (d / "report" / "report.json").read_bytes() == (e / "report.json").read_bytes()


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("generate", "fit", "eval", "demo"):
        assert cmd in out
