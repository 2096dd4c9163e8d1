"""Run configuration: defaults, TOML file, then command-line overrides.

Precedence is flags > ``--set key.path=value`` > file > defaults.  Every
error names the offending key path.

Schema (all keys optional)::

    seed = 0                      # global seed, scene seeds derive from it
    workers = 1                   # process pool size, 1 = in-process

    [paths]
    input = ""                    # scene / result directory read by fit and eval
    output = ""                   # directory written by the command
    ground_truth = ""             # scene directory eval compares against

    [generate]
    n_scenes = 10
    n_points = 24576
    depth_sigma = 0.0             # m, along the ray
    dropout = 0.0
    quantization = 0.0            # m depth step, 0 = off
    min_part_points = 50          # fewer visible points -> relabelled background
    templates = []                # empty = all templates

    [cluster]                     # eps (m), min_pts, min_instance_points
    [ransac]                      # max_iterations, inlier_threshold (m),
                                  # min_inlier_fraction, sample_size, rng_seed
    [corruption]                  # label_flip_prob, offset_noise_sigma (m),
                                  # npcs_bin_noise_sigma (bins),
                                  # confidence_temperature, rng_seed
    [loss]                        # semantic, instance, npcs weights

    [symmetry.<class name>]       # e.g. [symmetry.hinge_knob]
    kind = "continuous_about_axis"  # none | continuous_about_axis | mirror_180_about_axis
    axis = [0.0, 0.0, 1.0]
    k = 12
"""

from __future__ import annotations

import copy
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

from .cluster import ClusterParams
from .core import PartClass, ValidationError
from .losses import LossWeights
from .npcs import DEFAULT_SYMMETRY, SymmetryDescriptor
from .posefit import RansacParams
from .synth.predictor import CorruptionParams
from .synth.scene import DEFAULT_BUDGET, DEFAULT_MIN_PART_POINTS, MIN_BUDGET, NoiseParams
from .synth.templates import TEMPLATES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True)
class Paths:
    input: str = ""
    output: str = ""
    ground_truth: str = ""


@dataclass(frozen=True)
class GenerateParams:
    n_scenes: int = 10
    n_points: int = DEFAULT_BUDGET
    depth_sigma: float = 0.0
    dropout: float = 0.0
    quantization: float = 0.0
    min_part_points: int = DEFAULT_MIN_PART_POINTS
    templates: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "templates", tuple(self.templates))
        if self.n_scenes < 0:
            raise ValidationError("generate.n_scenes must be >= 0")
        if self.n_points < MIN_BUDGET:
            raise ValidationError(f"generate.n_points must be >= {MIN_BUDGET}")
        for name in ("depth_sigma", "dropout", "quantization"):
            if getattr(self, name) < 0:
                raise ValidationError(f"generate.{name} must be non-negative")
        if self.dropout >= 1:
            raise ValidationError("generate.dropout must be < 1")
        if self.min_part_points < 1:
            raise ValidationError("generate.min_part_points must be >= 1")
        unknown = [t for t in self.templates if t not in TEMPLATES]
        if unknown:
            raise ValidationError(f"generate.templates: unknown template(s) {unknown}")

    @property
    def noise(self) -> NoiseParams:
        return NoiseParams(self.depth_sigma, self.dropout, self.quantization)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    paths: Paths = Paths()
    generate: GenerateParams = GenerateParams()
    cluster: ClusterParams = ClusterParams()
    ransac: RansacParams = RansacParams()
    corruption: CorruptionParams = CorruptionParams()
    loss: LossWeights = LossWeights()
    symmetry: Mapping[PartClass, SymmetryDescriptor] = field(default_factory=lambda: dict(DEFAULT_SYMMETRY))

    def to_dict(self) -> dict:
        d = {"seed": self.seed, "workers": self.workers}
        for name in ("paths", "generate", "cluster", "ransac", "corruption", "loss"):
            section = asdict(getattr(self, name))
            d[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in section.items()}
        d["symmetry"] = {c.label: s.to_dict() for c, s in self.symmetry.items()}
        return d


_SECTIONS = {
    "paths": Paths,
    "generate": GenerateParams,
    "cluster": ClusterParams,
    "ransac": RansacParams,
    "corruption": CorruptionParams,
    "loss": LossWeights,
}


def default_tree() -> dict:
    return RunConfig().to_dict()


def _coerce(default: Any, value: Any, key: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(key, f"expected a list, got {value!r}")
        if default and isinstance(default[0], float):
            return [_coerce(0.0, v, f"{key}[{i}]") for i, v in enumerate(value)]
        return list(value)
    return value


def merge(base: dict, override: Mapping, prefix: str = "") -> dict:
    """Deep-merge ``override`` into a copy of ``base``; unknown keys are errors."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        key = f"{prefix}{k}"
        if k not in out:
            raise ConfigError(key, "unknown key")
        if isinstance(out[k], dict):
            if not isinstance(v, Mapping):
                raise ConfigError(key, "expected a table")
            out[k] = merge(out[k], v, key + ".")
        else:
            out[k] = _coerce(out[k], v, key)
    return out


def parse_assignment(text: str) -> dict:
    """``a.b.c=value`` -> nested dict; the value is read as TOML, else as a bare string."""
    if "=" not in text:
        raise ConfigError("", f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigError(key, "empty key path")
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    tree: dict = {}
    node = tree
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return tree


def _build_section(name: str, cls, values: dict):
    try:
        return cls(**values)
    except ValidationError as exc:
        msg = str(exc)
        key = msg.split(" ")[0] if msg.startswith(f"{name}.") else name
        raise ConfigError(key, msg) from None


def build_config(tree: Mapping) -> RunConfig:
    for key in ("seed", "workers"):
        if tree[key] < (0 if key == "seed" else 1):
            raise ConfigError(key, f"must be >= {0 if key == 'seed' else 1}")
    sections = {name: _build_section(name, cls, dict(tree[name])) for name, cls in _SECTIONS.items()}
    symmetry = {}
    for label, d in tree["symmetry"].items():
        try:
            symmetry[PartClass.from_label(label)] = SymmetryDescriptor.from_dict(d)
        except (ValidationError, ValueError) as exc:
            raise ConfigError(f"symmetry.{label}", str(exc)) from None
    return RunConfig(seed=tree["seed"], workers=tree["workers"], symmetry=symmetry, **sections)


def load_config(
    path: Optional[Path] = None,
    assignments: Iterable[str] = (),
    flags: Optional[Mapping] = None,
) -> RunConfig:
    """Defaults, then the TOML file, then ``--set`` assignments, then explicit flags."""
    tree = default_tree()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("", f"cannot read config file {path}: {exc}") from None
        try:
            tree = merge(tree, tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("", f"{path}: invalid TOML: {exc}") from None
    for a in assignments:
        tree = merge(tree, parse_assignment(a))
    if flags:
        tree = merge(tree, flags)
    return build_config(tree)


def section_fields(name: str) -> list[str]:
    return [f.name for f in fields(_SECTIONS[name])]
