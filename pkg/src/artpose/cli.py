"""Command-line entry point: ``artpose {generate,fit,eval,demo}``.

Exit codes: 0 success, 2 configuration or input-consistency error, 3 I/O
error, 4 at least one scene failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .apf import FormatError, parse_prediction_file, parse_scene_file, serialize_scene
from .config import ConfigError, RunConfig, load_config
from .core import ValidationError
from .metrics import ScenePair, aggregate_report, format_report
from .pipeline import FittedInstance, fit_scene, scene_pair
from .synth import corrupt, generate_scene, oracle_prediction, sample_scene_spec

log = logging.getLogger("artpose")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SCENES = 0, 2, 3, 4
MANIFEST_SCHEMA_VERSION = 1
RESULT_SCHEMA_VERSION = 1
SCENE_SUFFIX = ".apf"


class InputMismatchError(ValueError):
    pass


def atomic_write(path: Path, data: bytes) -> None:
    """Write via a temporary sibling and rename, so readers never see partial files."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, allow_nan=False) + "\n").encode("utf-8")


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def scene_id(index: int) -> str:
    return f"scene_{index:05d}"


def scene_seed(global_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(global_seed), int(index)]).generate_state(1, np.uint32)[0])


# ---------------------------------------------------------------------------
# generate


def _generate_one(args) -> dict:
    cfg, index, out_dir = args
    g = cfg.generate
    seed = scene_seed(cfg.seed, index)
    template = g.templates[index % len(g.templates)] if g.templates else None
    spec = sample_scene_spec(seed, template, g.n_points, g.noise, g.min_part_points)
    cloud, gt = generate_scene(spec)
    params = replace(cfg.corruption, rng_seed=scene_seed(cfg.corruption.rng_seed, seed))
    pred = corrupt(oracle_prediction(gt, cloud), params)
    sid = scene_id(index)
    atomic_write(out_dir / f"{sid}{SCENE_SUFFIX}", serialize_scene(cloud, pred, gt, sid))
    return {
        "scene_id": sid,
        "file": f"{sid}{SCENE_SUFFIX}",
        "seed": seed,
        "n_points": len(cloud),
        "n_instances": len(gt.parts),
        "spec": spec.to_dict(),
    }


def cmd_generate(cfg: RunConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = _map(_generate_one, [(cfg, i, out_dir) for i in range(cfg.generate.n_scenes)], cfg.workers)
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "seed": cfg.seed,
        "n_scenes": len(entries),
        "corruption": cfg.corruption.to_dict(),
        "scenes": entries,
    }
    atomic_write(out_dir / "manifest.json", dump_json(manifest))
    log.info("wrote %d scenes to %s", len(entries), out_dir)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def _fit_one(args) -> dict:
    cfg, path, out_dir = args
    sid = path.stem
    result = {"schema_version": RESULT_SCHEMA_VERSION, "scene_id": sid}
    try:
        cloud, pred = parse_prediction_file(path.read_bytes())
    except (FormatError, ValidationError) as exc:
        result.update(status="error", reason="parse_error", message=str(exc), instances=[])
    else:
        fitted = fit_scene(cloud, pred, cfg.cluster, cfg.ransac)
        result.update(
            status="ok",
            n_points=len(cloud),
            n_fit_failures=sum(f.failure is not None for f in fitted),
            instances=[f.to_dict() for f in fitted],
        )
    atomic_write(out_dir / f"{sid}.json", dump_json(result))
    return result


def scene_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return sorted(directory.glob(f"*{SCENE_SUFFIX}"))


def cmd_fit(cfg: RunConfig, in_dir: Path, out_dir: Path) -> int:
    files = scene_files(in_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = _map(_fit_one, [(cfg, p, out_dir) for p in files], cfg.workers)
    failed = [r["scene_id"] for r in results if r["status"] != "ok"]
    for sid in failed:
        log.error("scene %s failed to parse", sid)
    log.info("fitted %d scenes (%d failed)", len(results), len(failed))
    return EXIT_SCENES if failed else EXIT_OK


# ---------------------------------------------------------------------------
# eval


def load_pairs(results_dir: Path, gt_dir: Path) -> list[ScenePair]:
    if not results_dir.is_dir():
        raise FileNotFoundError(f"not a directory: {results_dir}")
    results = {p.stem: p for p in sorted(results_dir.glob("*.json"))}
    scenes = {p.stem: p for p in scene_files(gt_dir)}
    missing_results = sorted(scenes.keys() - results.keys())
    missing_gt = sorted(results.keys() - scenes.keys())
    if missing_results or missing_gt:
        parts = []
        if missing_results:
            parts.append(f"no results for {', '.join(missing_results)}")
        if missing_gt:
            parts.append(f"no ground truth for {', '.join(missing_gt)}")
        raise InputMismatchError("scene sets differ: " + "; ".join(parts))
    pairs = []
    for sid in sorted(scenes):
        scene = parse_scene_file(scenes[sid].read_bytes())
        if scene.ground_truth is None:
            raise InputMismatchError(f"{scenes[sid]} carries no ground truth")
        record = json.loads(results[sid].read_text(encoding="utf-8"))
        fitted = [FittedInstance.from_dict(d) for d in record.get("instances", [])]
        pairs.append(scene_pair(fitted, scene.ground_truth))
    return pairs


def cmd_eval(cfg: RunConfig, results_dir: Path, gt_dir: Path, out_dir: Path) -> dict:
    pairs = load_pairs(results_dir, gt_dir)
    if not pairs:
        raise InputMismatchError("no scenes to evaluate")
    report = aggregate_report(pairs)
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(out_dir / "report.json", dump_json(report))
    atomic_write(out_dir / "report.txt", format_report(report).encode("utf-8"))
    return report


# ---------------------------------------------------------------------------
# argument handling


def _require(value: str, what: str) -> Path:
    if not value:
        raise ConfigError(f"paths.{what}", "must be set (flag or config file)")
    return Path(value)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="TOML configuration file")
    common.add_argument(
        "--set", dest="assignments", action="append", default=[], metavar="KEY=VALUE",
        help="override one config key, e.g. --set cluster.eps=0.02 (repeatable)",
    )
    common.add_argument("--seed", type=int, help="global seed (config: seed)")
    common.add_argument("--workers", type=int, help="worker processes (config: workers)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="artpose",
        description="Articulated-part pose pipeline on synthetic scenes. "
        "Precedence: flags > --set > config file > defaults.",
    )
    parser.add_argument("--version", action="version", version=f"artpose {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write synthetic scenes and a manifest")
    p.add_argument("-o", "--output", help="output directory (config: paths.output)")
    p.add_argument("-n", "--n-scenes", type=int, help="number of scenes (config: generate.n_scenes)")

    p = sub.add_parser("fit", parents=[common], help="cluster and fit poses for every scene file")
    p.add_argument("-i", "--input", help="directory of .apf scene files (config: paths.input)")
    p.add_argument("-o", "--output", help="directory for per-scene result JSON (config: paths.output)")

    p = sub.add_parser("eval", parents=[common], help="aggregate metrics over fit results")
    p.add_argument("-i", "--input", help="directory of result JSON (config: paths.input)")
    p.add_argument("-g", "--ground-truth", help="directory of .apf scenes (config: paths.ground_truth)")
    p.add_argument("-o", "--output", help="report directory (config: paths.output)")

    p = sub.add_parser("demo", parents=[common], help="generate, fit and eval in one run")
    p.add_argument("-o", "--output", help="working directory (config: paths.output)")
    p.add_argument("-n", "--n-scenes", type=int, help="number of scenes (config: generate.n_scenes)")
    return parser


def _flags(args) -> dict:
    flags: dict = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.workers is not None:
        flags["workers"] = args.workers
    paths = {}
    for attr, key in (("input", "input"), ("output", "output"), ("ground_truth", "ground_truth")):
        v = getattr(args, attr, None)
        if v is not None:
            paths[key] = v
    if paths:
        flags["paths"] = paths
    if getattr(args, "n_scenes", None) is not None:
        flags["generate"] = {"n_scenes": args.n_scenes}
    return flags


def run(args) -> int:
    cfg = load_config(args.config, args.assignments, _flags(args))
    out = _require(cfg.paths.output, "output")
    if args.command == "generate":
        return cmd_generate(cfg, out)
    if args.command == "fit":
        return cmd_fit(cfg, _require(cfg.paths.input, "input"), out)
    if args.command == "eval":
        cmd_eval(cfg, _require(cfg.paths.input, "input"), _require(cfg.paths.ground_truth, "ground_truth"), out)
        return EXIT_OK
    # demo
    scenes, results, report = out / "scenes", out / "results", out / "report"
    cmd_generate(cfg, scenes)
    code = cmd_fit(cfg, scenes, results)
    rep = cmd_eval(cfg, results, scenes, report)
    sys.stdout.write(format_report(rep))
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (ConfigError, InputMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
