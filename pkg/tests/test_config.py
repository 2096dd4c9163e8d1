import pytest

from artpose.config import ConfigError, RunConfig, load_config, parse_assignment
from artpose.core import PartClass
from artpose.npcs import SymmetryKind


def test_defaults():
    cfg = load_config()
    assert cfg == RunConfig()
    assert cfg.cluster.eps == 0.03 and cfg.ransac.max_iterations == 256
    assert cfg.loss.semantic == 17.5


def test_file_then_set_then_flags(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        'seed = 5\nworkers = 2\n[cluster]\neps = 0.05\n[paths]\noutput = "from_file"\n'
        "[symmetry.hinge_lid]\nkind = \"mirror_180_about_axis\"\naxis = [1.0, 0.0, 0.0]\n"
    )
    cfg = load_config(path, ["cluster.eps=0.04", "seed=6"], {"seed": 7})
    assert cfg.seed == 7
    assert cfg.workers == 2
    assert cfg.cluster.eps == 0.04
    assert cfg.paths.output == "from_file"
    assert cfg.symmetry[PartClass.HINGE_LID].kind is SymmetryKind.MIRROR_180


def test_set_parses_toml_values():
    assert parse_assignment("generate.templates=['door_panel']") == {"generate": {"templates": ["door_panel"]}}
    assert parse_assignment("paths.output=out/dir") == {"paths": {"output": "out/dir"}}
    assert parse_assignment("ransac.max_iterations=10") == {"ransac": {"max_iterations": 10}}
    cfg = load_config(assignments=["generate.templates=['door_panel']"])
    assert cfg.generate.templates == ("door_panel",)


@pytest.mark.parametrize(
    "assignment, key",
    [
        ("cluster.epss=1", "cluster.epss"),
        ("cluster.eps=-1", "cluster.eps"),
        ("cluster.eps='wide'", "cluster.eps"),
        ("ransac.max_iterations=2.5", "ransac.max_iterations"),
        ("symmetry.teapot.k=3", "symmetry.teapot"),
        ("symmetry.hinge_knob.k=1", "symmetry.hinge_knob"),
        ("corruption.label_flip_prob=2", "corruption"),
        ("generate.templates=['teapot']", "generate.templates:"),
        ("workers=0", "workers"),
        ("cluster=3", "cluster"),
    ],
)
def test_errors_name_the_key(assignment, key):
    with pytest.raises(ConfigError) as err:
        load_config(assignments=[assignment])
    assert key in str(err.value)


def test_bad_file(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("seed = [")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_round_trip_tree():
    cfg = load_config(assignments=["cluster.min_pts=4", "generate.templates=['pot_with_knob']"])
    from artpose.config import build_config, merge, default_tree

    assert build_config(merge(default_tree(), cfg.to_dict())) == cfg
