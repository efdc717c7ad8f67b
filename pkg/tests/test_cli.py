from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from visearch.cli import main
from visearch.config import EngineConfig
from visearch.corpus import Catalog
from visearch.features import ExtractorSpec


@pytest.fixture
def runner():
    return CliRunner()


def _small_config(data_dir: Path) -> None:
    config = EngineConfig(
        dim=16,
        extractor=ExtractorSpec("seeded-hash", 16, seed=4),
        index_shards=2,
        target_shard_size=8,
        max_chunk_members=4,
        join_shards=2,
        join_block_size=4,
    )
    config.save(data_dir)


def test_full_cli_workflow(runner, tmp_path):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    _small_config(data_dir)

    corpus_file = tmp_path / "images.jsonl"
    result = runner.invoke(
        main, ["synth-corpus", "--out", str(corpus_file), "--count", "18", "--seed", "2"]
    )
    assert result.exit_code == 0, result.output

    result = runner.invoke(
        main, ["ingest", "--data-dir", str(data_dir), "--images", str(corpus_file)]
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["added"] == 18

    result = runner.invoke(main, ["fp", "plan", "--data-dir", str(data_dir)])
    assert result.exit_code == 0
    assert "job(s) planned" in result.output
    assert "0 job(s)" not in result.output

    result = runner.invoke(main, ["fp", "run", "--data-dir", str(data_dir), "--workers", "2"])
    assert result.exit_code == 0, result.output

    result = runner.invoke(main, ["fp", "plan", "--data-dir", str(data_dir)])
    assert "0 job(s) planned" in result.output

    result = runner.invoke(main, ["fp", "merge", "--data-dir", str(data_dir)])
    assert result.exit_code == 0, result.output

    result = runner.invoke(main, ["fp", "join", "--data-dir", str(data_dir)])
    assert result.exit_code == 0, result.output
    assert "18 fingerprints" in result.output

    sig = sorted(Catalog.load(data_dir).records)[0]
    result = runner.invoke(main, ["fp", "lookup", "--data-dir", str(data_dir), sig.hex])
    assert result.exit_code == 0
    assert sig.hex in result.output

    result = runner.invoke(
        main, ["fp", "lookup", "--data-dir", str(data_dir), "f" * 32]
    )
    assert result.exit_code == 1
    assert "absent" in result.output

    result = runner.invoke(main, ["index", "build", "--data-dir", str(data_dir)])
    assert result.exit_code == 0, result.output
    build_id = result.output.strip().splitlines()[-1]
    assert (data_dir / "index" / build_id / "meta.json").exists()

    result = runner.invoke(
        main, ["index", "swap", "--data-dir", str(data_dir), "--build", build_id]
    )
    assert result.exit_code == 0
    assert (data_dir / "index" / "CURRENT").read_text().strip() == build_id


def test_eval_cli(runner, tmp_path):
    ds_path = tmp_path / "ds.jsonl"
    result = runner.invoke(
        main,
        ["eval", "synth", "--out", str(ds_path), "--classes", "3", "--per-class", "8",
         "--dim", "16", "--tightness", "0.0", "--noise", "4", "--seed", "6"],
    )
    assert result.exit_code == 0, result.output

    report_path = tmp_path / "report.json"
    result = runner.invoke(
        main,
        ["eval", "run", "--dataset", str(ds_path), "--metric", "hamming",
         "--repr", "binary", "--k", "1,5", "--report", str(report_path)],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(report_path.read_text())
    row = payload["rows"][0]
    assert row["p_at_1"] == 1.0  # zero-tightness clusters are exactly separable
    assert row["p_at_5"] == 1.0

    result = runner.invoke(
        main,
        ["eval", "run", "--dataset", str(ds_path), "--metric", "l1", "--repr", "raw",
         "--k", "1"],
    )
    assert result.exit_code == 0
    assert json.loads(result.output.splitlines()[0])["rows"][0]["p_at_1"] == 1.0


def test_validation_exit_code(runner, tmp_path):
    # join before any pipeline stages: validation failure, exit code 1
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    _small_config(data_dir)
    result = runner.invoke(main, ["fp", "lookup", "--data-dir", str(data_dir), "a" * 32])
    assert result.exit_code == 1
