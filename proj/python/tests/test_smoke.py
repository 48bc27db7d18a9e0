import json
import math

import numpy as np
import pytest

import _czsl


def test_hsic_self_dependence():
    u = np.array([[0.0], [1.0]])
    assert _czsl.hsic_linear(u, u) == pytest.approx(0.25, abs=1e-12)


def test_hsic_independent_near_zero():
    rng = np.random.default_rng(7)
    u = rng.standard_normal((2000, 3))
    v = rng.standard_normal((2000, 3))
    scale = math.sqrt(_czsl.hsic_linear(u, u) * _czsl.hsic_linear(v, v))
    assert _czsl.hsic_linear(u, v) < 0.01 * scale


def test_conditional_hsic_groups():
    u = np.array([[0.0], [1.0], [0.0], [1.0]])
    labels = [0, 0, 1, 1]
    assert _czsl.conditional_hsic(u, u, labels) == pytest.approx(0.25, abs=1e-12)


def test_harmonic_mean():
    assert _czsl.harmonic_mean(0.0, 0.0) == 0.0
    assert _czsl.harmonic_mean(0.5, 0.5) == pytest.approx(0.5)


def test_gen_train_eval_round_trip(tmp_path):
    gen_cfg = {
        "scm": {
            "core_dim_attr": 2,
            "core_dim_obj": 2,
            "feature_dim": 6,
            "gen_hidden": 8,
            "train_per_pair": 20,
            "val_per_pair": 8,
            "test_per_pair": 8,
        },
        "num_attrs": 2,
        "num_objs": 2,
        "ratio": "5:5",
        "seed": 5,
    }
    gen_path = tmp_path / "gen.json"
    gen_path.write_text(json.dumps(gen_cfg))
    data_dir = tmp_path / "data"
    info = _czsl.generate(str(gen_path), str(data_dir))
    assert info["num_pairs"] == 4
    assert (data_dir / "features.csv").exists()
    assert (data_dir / "splits.json").exists()

    train_cfg = {
        "method": "visprod",
        "max_epochs": 2,
        "batch_size": 16,
        "model": {"hidden_dim": 8},
        "model_seed": 9,
        "pida_samples": 20,
    }
    cfg_path = tmp_path / "train.json"
    cfg_path.write_text(json.dumps(train_cfg))
    out_dir = tmp_path / "run"
    res = _czsl.run_experiment(str(cfg_path), str(data_dir), str(out_dir))
    assert res["csv_row"].startswith("visprod,5:5,")
    assert 0.0 <= res["harmonic"] <= 1.0
    summary = (out_dir / "summary.csv").read_text().splitlines()
    assert summary[0] == _czsl.summary_csv_header()
    assert summary[1] == res["csv_row"]


def test_recover_cores_shapes(tmp_path):
    gen_cfg = {
        "scm": {
            "core_dim_attr": 2,
            "core_dim_obj": 2,
            "feature_dim": 6,
            "gen_hidden": 8,
            "train_per_pair": 20,
            "val_per_pair": 8,
            "test_per_pair": 8,
        },
        "num_attrs": 2,
        "num_objs": 2,
        "seed": 5,
    }
    gen_path = tmp_path / "gen.json"
    gen_path.write_text(json.dumps(gen_cfg))
    data_dir = tmp_path / "data"
    _czsl.generate(str(gen_path), str(data_dir))

    train_cfg = {
        "method": "causal",
        "max_epochs": 2,
        "batch_size": 16,
        "model": {"hidden_dim": 8, "core_dim": 4},
        "model_seed": 9,
        "pida_samples": 20,
    }
    cfg_path = tmp_path / "train.json"
    cfg_path.write_text(json.dumps(train_cfg))
    out_dir = tmp_path / "run"
    _czsl.run_experiment(str(cfg_path), str(data_dir), str(out_dir))

    x = np.zeros((3, 6))
    phi_a, phi_o = _czsl.recover_cores(
        str(out_dir / "model.ckpt"), str(out_dir / "model.json"), x
    )
    assert phi_a.shape == (3, 4)
    assert phi_o.shape == (3, 4)
