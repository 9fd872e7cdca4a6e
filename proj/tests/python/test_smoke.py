"""Smoke tests for the python bindings."""

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

import daif


def test_spectral_round_trip():
    rng = np.random.default_rng(1)
    x = rng.normal(size=96)
    coeffs = daif.rdft(x)
    assert coeffs.shape == (49,)
    back = daif.irdft(coeffs, 96)
    np.testing.assert_allclose(back, x, atol=1e-9)
    np.testing.assert_allclose(daif.amplitude(coeffs, 96), np.abs(coeffs))


def test_rdft_matches_numpy():
    rng = np.random.default_rng(2)
    x = rng.normal(size=100)
    np.testing.assert_allclose(daif.rdft(x), np.fft.rfft(x), atol=1e-9)


def test_frequency_filter_max_k_identity():
    rng = np.random.default_rng(3)
    x = rng.normal(size=64)
    np.testing.assert_allclose(daif.frequency_filter(x, 33), x, atol=1e-9)


def test_top_k_tie_break():
    assert daif.top_k_indices(np.array([9.0, 1.0, 9.0, 5.0]), 2) == [0, 2]


def test_cross_variation_patch_shape():
    window = np.arange(96 * 7, dtype=float).reshape(96, 7)
    tokens = daif.cross_variation_patch(window, 16)
    assert tokens.shape == (6, 112)
    # Time-major flattening of the first patch.
    np.testing.assert_array_equal(tokens[0], window[:16].reshape(-1))


def test_frequency_filter_augment_shape():
    rng = np.random.default_rng(4)
    window = rng.normal(size=(96, 4))
    filtered = daif.frequency_filter_augment(window, 5)
    assert filtered.shape == (96, 4)
    for v in range(4):
        np.testing.assert_allclose(
            filtered[:, v], daif.frequency_filter(window[:, v], 5), atol=1e-12
        )


def test_augment_dispatch():
    rng = np.random.default_rng(5)
    window = rng.normal(size=(96, 7))
    groups = daif.augment(window, "compound", patch_len=16, top_k=5)
    assert [tag for tag, _ in groups] == ["cvp", "ff"]
    assert groups[0][1].shape == (6, 112)
    assert groups[1][1].shape == (7, 96)
    assert daif.augment(window, "none") == []

    j1 = daif.augment(window, "jitter", jitter_sigma=0.2, rng_seed=9)
    j2 = daif.augment(window, "jitter", jitter_sigma=0.2, rng_seed=9)
    np.testing.assert_array_equal(j1[0][1], j2[0][1])


def test_synth_and_csv_round_trip(tmp_path):
    values, names, timestamps = daif.synth_generate(
        n_variates=3, length=120, noise_sigma=0.05, seed=7
    )
    assert values.shape == (120, 3)
    assert names == ["v0", "v1", "v2"]
    assert len(timestamps) == 120

    path = str(tmp_path / "series.csv")
    daif.write_csv(path, values, names, timestamps)
    loaded, loaded_names, loaded_ts = daif.load_csv(path)
    assert loaded_names == names
    assert loaded_ts == timestamps
    np.testing.assert_allclose(loaded, values, rtol=1e-10)


def test_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError):
        daif.frequency_filter(np.zeros(8), 0)
    with pytest.raises(IOError):
        daif.load_csv("/nonexistent/file.csv")


def test_train_and_predict(tmp_path):
    values, names, timestamps = daif.synth_generate(
        n_variates=2, length=300, noise_sigma=0.05, seed=11
    )
    dataset = str(tmp_path / "toy.csv")
    daif.write_csv(dataset, values, names, timestamps)

    config = {
        "dataset": {"path": dataset, "name": "toy"},
        "lookback": 16,
        "pred_len": [4],
        "seeds": [1],
        "out_dir": str(tmp_path / "run"),
        "model": {
            "backbone": "attention",
            "d_model": 8,
            "d_ff": 12,
            "layers": 1,
            "heads": 2,
        },
        "augmentation": {"strategy": "ff", "top_k": 3},
        "train": {
            "learning_rate": 1e-3,
            "batch_size": 16,
            "max_epochs": 2,
            "patience": 3,
        },
    }
    result = daif.run_experiment(json.dumps(config))
    assert len(result["cells"]) == 1
    cell = result["cells"][0]
    assert np.isfinite(cell["mse"])
    assert Path(cell["checkpoint"]).exists()
    assert Path(result["results_csv"]).exists()

    forecast = daif.predict(cell["checkpoint"], values[:16])
    assert forecast.shape == (4, 2)
    assert np.isfinite(forecast).all()

    # Determinism across reruns of the same config.
    config["out_dir"] = str(tmp_path / "run2")
    result2 = daif.run_experiment(json.dumps(config))
    assert result2["cells"][0]["mse"] == cell["mse"]
