"""Command line entry points: ingest, pipeline, index admin, serve, eval.

Exit codes: 0 success, 1 validation or input problems, 2 integrity failures.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import engine as engine_mod
from .config import EngineConfig, serving_port
from .corpus import ingest_images, make_synthetic_corpus, write_jsonl
from .errors import IntegrityError, VisearchError
from .evaluation import (
    EvalVariant,
    SynthParams,
    dataset_from_jsonl,
    dataset_to_jsonl,
    run_eval,
    synth_dataset,
)
from .model import Signature
from .pipeline import FingerprintPipeline


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except IntegrityError as exc:
            click.echo(f"integrity error: {exc}", err=True)
            sys.exit(2)
        except VisearchError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


data_dir_option = click.option(
    "--data-dir", "data_dir", type=click.Path(path_type=Path), default=Path("data"),
    show_default=True, help="Engine data directory.",
)


def _pipeline(data_dir: Path) -> tuple[EngineConfig, FingerprintPipeline]:
    config = EngineConfig.load(data_dir)
    return config, FingerprintPipeline(
        data_dir, config.features, config.target_shard_size, config.max_chunk_members
    )


@click.group()
def main() -> None:
    """Desk-scale visual discovery engine."""


@main.command()
@data_dir_option
@handle_errors
def init(data_dir: Path) -> None:
    """Write a default config.json into the data directory."""
    config = EngineConfig.load(data_dir)
    config.save(data_dir)
    click.echo(f"config written to {EngineConfig.path_for(data_dir)}")


@main.command()
@data_dir_option
@click.option("--images", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--detections", type=click.Path(exists=True, path_type=Path), default=None)
@handle_errors
def ingest(data_dir: Path, images: Path, detections: Path | None) -> None:
    """Add image records (and optional detections) to the catalog."""
    config = EngineConfig.load(data_dir)
    counts = ingest_images(
        data_dir, images, detections,
        category_tau=config.category_tau,
        min_confidence=config.detection_min_confidence,
    )
    click.echo(json.dumps(counts))


@main.command("synth-corpus")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--count", type=int, default=60, show_default=True)
@click.option("--days", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@handle_errors
def synth_corpus(out: Path, count: int, days: int, seed: int) -> None:
    """Generate an ingestable synthetic image corpus."""
    write_jsonl(make_synthetic_corpus(count, days=days, seed=seed), out)
    click.echo(f"wrote {count} records to {out}")


@main.group()
def fp() -> None:
    """Incremental fingerprint pipeline."""


@fp.command("plan")
@data_dir_option
@handle_errors
def fp_plan(data_dir: Path) -> None:
    """List the missing (feature, version, epoch) jobs."""
    _, pipeline = _pipeline(data_dir)
    jobs = pipeline.plan()
    for job in jobs:
        click.echo(f"{job.feature_name}\tv{job.version}\t{job.epoch.isoformat()}")
    click.echo(f"{len(jobs)} job(s) planned")


@fp.command("run")
@data_dir_option
@click.option("--workers", type=int, default=1, show_default=True)
@handle_errors
def fp_run(data_dir: Path, workers: int) -> None:
    """Execute all missing pipeline jobs."""
    _, pipeline = _pipeline(data_dir)
    report = pipeline.run(workers=workers)
    click.echo(
        f"jobs={len(report.planned_jobs)} executed_chunks={report.executed_chunks} "
        f"skipped_chunks={report.skipped_chunks}"
    )


@fp.command("merge")
@data_dir_option
@click.option("--force", is_flag=True, default=False)
@handle_errors
def fp_merge(data_dir: Path, force: bool) -> None:
    """Merge per-feature shards into per-epoch fingerprints."""
    _, pipeline = _pipeline(data_dir)
    report = pipeline.merge(force=force)
    click.echo(f"merged_epochs={report.merged_epochs}")


@fp.command("join")
@data_dir_option
@handle_errors
def fp_join(data_dir: Path) -> None:
    """Materialize the sorted, sharded random-access join."""
    config, pipeline = _pipeline(data_dir)
    join = pipeline.materialize_join(config.join_shards, config.join_block_size)
    count = join.verify_sorted()
    click.echo(f"join materialized: {count} fingerprints in {join.shard_count} shards")


@fp.command("lookup")
@data_dir_option
@click.argument("signature")
@handle_errors
def fp_lookup(data_dir: Path, signature: str) -> None:
    """Look one signature up in the join."""
    _, pipeline = _pipeline(data_dir)
    join = pipeline.open_join()
    fp_rec = join.lookup(Signature.from_hex(signature))
    if fp_rec is None:
        click.echo("absent")
        sys.exit(1)
    click.echo(json.dumps(fp_rec.to_json(), sort_keys=True))


@main.group()
def index() -> None:
    """Leaf index administration."""


@index.command("build")
@data_dir_option
@click.option("--shards", type=int, default=None, help="Leaf shard count.")
@click.option("--block-count", type=int, default=None, help="Token blocks per code.")
@click.option("--swap/--no-swap", "do_swap", default=True, show_default=True,
              help="Point CURRENT at the new build.")
@handle_errors
def index_build(data_dir: Path, shards: int | None, block_count: int | None,
                do_swap: bool) -> None:
    """Build leaf and object indices from the join."""
    config = EngineConfig.load(data_dir)
    build_id = engine_mod.build_index_files(data_dir, config, shards, block_count)
    if do_swap:
        engine_mod.swap_current(data_dir, build_id)
    click.echo(build_id)


@index.command("swap")
@data_dir_option
@click.option("--build", "build_id", default=None,
              help="Build id; defaults to the newest build.")
@handle_errors
def index_swap(data_dir: Path, build_id: str | None) -> None:
    """Atomically repoint CURRENT at a build."""
    target = build_id or engine_mod.latest_build(data_dir)
    if target is None:
        raise VisearchError("no index builds available")
    engine_mod.swap_current(data_dir, target)
    click.echo(target)


@main.command()
@data_dir_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=None, help="Defaults to $VISEARCH_PORT or 8080.")
@handle_errors
def serve(data_dir: Path, host: str, port: int | None) -> None:
    """Serve the /v1 JSON API."""
    import uvicorn

    from .service import create_app

    engine = engine_mod.Engine.load(data_dir)
    app = create_app(engine)
    uvicorn.run(app, host=host, port=port if port is not None else serving_port())


@main.group("eval")
def eval_group() -> None:
    """Offline Precision@K evaluation."""


@eval_group.command("run")
@click.option("--dataset", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--metric", type=click.Choice(["l1", "l2", "hamming"]), default="hamming",
              show_default=True)
@click.option("--repr", "representation", type=click.Choice(["raw", "binary"]),
              default="binary", show_default=True)
@click.option("--k", "ks", default="1,5,10", show_default=True,
              help="Comma-separated K values.")
@click.option("--report", "report_path", type=click.Path(path_type=Path), default=None)
@handle_errors
def eval_run(dataset: Path, metric: str, representation: str, ks: str,
             report_path: Path | None) -> None:
    """Evaluate a labeled dataset under one (representation, metric) variant."""
    ds = dataset_from_jsonl(dataset)
    variant = EvalVariant(representation=representation, metric=metric)  # type: ignore[arg-type]
    k_values = [int(v) for v in ks.split(",") if v.strip()]
    report = run_eval(ds, variant, k_values)
    payload = report.to_json()
    if report_path is not None:
        report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                               encoding="utf-8")
    click.echo(json.dumps(payload, sort_keys=True))
    click.echo(f"note: {report.caveat}", err=True)


@eval_group.command("synth")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--classes", type=int, default=4, show_default=True)
@click.option("--per-class", type=int, default=12, show_default=True)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--tightness", type=float, default=0.1, show_default=True)
@click.option("--noise", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=11, show_default=True)
@handle_errors
def eval_synth(out: Path, classes: int, per_class: int, dim: int, tightness: float,
               noise: int, seed: int) -> None:
    """Generate a clustered labeled dataset for the eval harness."""
    ds = synth_dataset(SynthParams(classes, per_class, dim, tightness, noise, seed))
    dataset_to_jsonl(ds, out)
    click.echo(f"wrote {len(ds.corpus)} documents ({len(ds.queries)} queries) to {out}")


if __name__ == "__main__":
    main()
