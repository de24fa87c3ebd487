"""Command-line pipeline driver.

Subcommands wire the stages together over a single JSON configuration
file: ``validate``, ``detect``, ``analyze``, ``cluster``, ``route``, and
``all``. Every run writes its artifacts plus a manifest recording the
effective configuration, seed, and content digests; on failure the partial
artifacts of the run are removed and a machine-readable error record goes
to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .model import Dataset
from .pipeline import (
    PipelineConfig,
    run_analyze,
    run_cluster,
    run_detection,
    run_route,
    run_validate,
    write_detection_artifacts,
)

MANIFEST_FILE = "manifest.json"

_STAGES = ("validate", "detect", "analyze", "cluster", "route")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def load_config(path: str, seed: int | None, jobs: int | None) -> PipelineConfig:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if seed is not None:
        data["seed"] = seed
    if jobs is not None:
        data["jobs"] = jobs
    return PipelineConfig.from_mapping(data)


def _run_stage(stage: str, out_dir: Path, dataset: Dataset, config: PipelineConfig) -> list[Path]:
    if stage == "validate":
        return run_validate(out_dir, dataset)
    if stage == "detect":
        run = run_detection(dataset, config)
        return write_detection_artifacts(out_dir, run, dataset)
    if stage == "analyze":
        return run_analyze(out_dir, dataset, config)
    if stage == "cluster":
        return run_cluster(out_dir, dataset, config)
    if stage == "route":
        return run_route(out_dir, dataset, config)
    raise ValueError(f"unknown stage: {stage}")


def _write_manifest(out_dir: Path, config: PipelineConfig) -> Path:
    inputs = {}
    for label, path in (
        ("lines_file", config.lines_file),
        ("line_points_file", config.line_points_file),
        ("fixes_file", config.fixes_file),
    ):
        if path and Path(path).is_file():
            inputs[label] = _sha256(Path(path))
    artifacts = {
        p.name: _sha256(p) for p in sorted(out_dir.glob("*.csv"))
    }
    manifest = {
        "config": config.to_mapping(),
        "seed": config.seed,
        "inputs": inputs,
        "artifacts": artifacts,
    }
    path = out_dir / MANIFEST_FILE
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bustrace",
        description="Reconstruct bus itineraries from GPS logs and quantify "
        "virtual-terminal integration.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON configuration file")
    common.add_argument("--out", required=True, help="output directory for artifacts")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for detection")

    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("validate", "check dataset consistency and write a report"),
        ("detect", "reconstruct itineraries and write the tag report"),
        ("analyze", "build availability series, daily averages, and outliers"),
        ("cluster", "build virtual terminals and synchronization statistics"),
        ("route", "evaluate OD trips with and without cluster transfers"),
        ("all", "run the full pipeline in order"),
    ):
        sub.add_parser(name, parents=[common], help=doc)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out)
    written: list[Path] = []
    try:
        config = load_config(args.config, args.seed, args.jobs)
        dataset = config.load_inputs()
        out_dir.mkdir(parents=True, exist_ok=True)
        stages = list(_STAGES) if args.command == "all" else [args.command]
        for stage in stages:
            written.extend(_run_stage(stage, out_dir, dataset, config))
        _write_manifest(out_dir, config)
    except Exception as exc:
        for path in written:
            try:
                path.unlink(missing_ok=True)
            except OSError:
                pass
        record = {
            "error": {
                "stage": getattr(exc, "stage", args.command),
                "type": type(exc).__name__,
                "message": str(exc),
            }
        }
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
