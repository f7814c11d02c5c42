"""Training loop behavior on a real export bundle."""

from __future__ import annotations

import json

from relaug_trainer.train import TrainConfig, emit_run, run_experiment


def small_cfg(seed=0, **overrides):
    base = dict(dim=16, pretrain_steps=25, epochs=60, patience=8, seed=seed)
    base.update(overrides)
    return TrainConfig(**base)


def test_pretraining_loss_trends_down(export_bundle):
    result = run_experiment(export_bundle, small_cfg(), use_pretrain=True)
    curve = result["pretrain_curve"]
    assert curve and all(v == v and v < float("inf") for v in curve)
    third = max(1, len(curve) // 3)
    assert sum(curve[-third:]) / third < sum(curve[:third]) / third


def test_same_seed_reproduces_metrics(export_bundle):
    a = run_experiment(export_bundle, small_cfg(seed=3), use_pretrain=False)
    b = run_experiment(export_bundle, small_cfg(seed=3), use_pretrain=False)
    assert a["best_valid"] == b["best_valid"]
    assert a["test"] == b["test"]


def test_schema_only_excludes_augmented_relations(export_bundle):
    result = run_experiment(
        export_bundle, small_cfg(epochs=3, pretrain_steps=0), use_pretrain=False,
        use_augmented_graph=False,
    )
    assert all(not r.startswith("aug__") for r in result["relations"])
    full = run_experiment(
        export_bundle, small_cfg(epochs=3, pretrain_steps=0), use_pretrain=False,
        use_augmented_graph=True,
    )
    assert any(r.startswith("aug__") for r in full["relations"])


def test_early_stopping_respects_patience(export_bundle):
    result = run_experiment(
        export_bundle, small_cfg(epochs=500, patience=3), use_pretrain=False
    )
    assert result["epochs_run"] < 500


def test_emit_run_files(export_bundle, tmp_path):
    result = run_experiment(export_bundle, small_cfg(epochs=5), use_pretrain=True)
    emit_run(result, tmp_path)
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["metric"] == "roc_auc"
    assert "curve" not in metrics
    lines = (tmp_path / "loss_curve.csv").read_text().splitlines()
    assert lines[0] == "phase,step,loss,valid_metric"
    assert any(line.startswith("pretrain,") for line in lines[1:])
    assert any(line.startswith("finetune,") for line in lines[1:])


def test_cli_runs(export_bundle, tmp_path, capsys):
    from relaug_trainer.cli import main

    code = main([
        "--export-dir", str(export_bundle),
        "--out-dir", str(tmp_path / "run"),
        "--dim", "16",
        "--pretrain-steps", "5",
        "--epochs", "10",
        "--seed", "1",
    ])
    assert code == 0
    assert (tmp_path / "run" / "metrics.json").exists()
    assert "roc_auc" in capsys.readouterr().out
