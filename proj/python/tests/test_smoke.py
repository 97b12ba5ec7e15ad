import math

import numpy as np
import pytest

import idseq


def test_differencing_examples():
    frames = np.array([[1, 0], [0, 1], [1, 1]], dtype=np.float32)
    np.testing.assert_array_equal(idseq.tdc(frames), [[-1, 1], [1, 0]])
    aux = np.array([1, 0], dtype=np.float32)
    np.testing.assert_array_equal(idseq.adc(frames[:2], aux), [[0, 0]])
    cat = idseq.difference_sequence(frames, aux, "cat")
    assert cat.shape == (2, 4)
    with pytest.raises(ValueError):
        idseq.tdc(frames[:1])


def test_losses_and_auc():
    a, p, n = np.zeros(2), np.array([3.0, 4.0]), np.array([1.0, 0.0])
    assert idseq.triplet_loss(a, p, n, 0.5) == pytest.approx(4.5)
    assert idseq.anchor_positive_loss(p, a) == pytest.approx(5.0)
    assert idseq.classification_loss(1, np.array([0.5, 0.5])) == pytest.approx(math.log(2))
    assert idseq.total_loss(0.5, 0.2, 0.1, 1.0, 0.1) == pytest.approx(0.71)
    assert idseq.auc([0.9, 0.4], [0.5, 0.1]) == 0.75
    with pytest.raises(ValueError):
        idseq.auc([], [0.1])


def test_corrupt_keeps_shape_and_is_deterministic():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(48, 40, 3), dtype=np.uint8)
    np.testing.assert_array_equal(idseq.corrupt(img, "blur", 0), img)
    out = idseq.corrupt(img, "gaussian_noise", 3, seed=4)
    assert out.shape == img.shape
    np.testing.assert_array_equal(out, idseq.corrupt(img, "gaussian_noise", 3, seed=4))
    with pytest.raises(ValueError):
        idseq.corrupt(img, "blur", 6)


def test_train_evaluate_round_trip(tmp_path):
    manifest = idseq.make_synthetic(tmp_path / "data", identities=6, frames=24, dim=8, seed=1)
    assert idseq.serialize_manifest(manifest).count("\n") == 24
    config = {
        "epochs": 3,
        "learning_rate": 0.003,
        "batch_size": 8,
        "augment_rotation": True,
        "sampler": {"sequence_length": 8, "sequences_per_video_per_epoch": 4, "eval_stride": 8},
        "detector": {"hidden_size": 8, "head_hidden": 8},
    }
    seen = []
    log = idseq.train(manifest, tmp_path / "run", config, on_epoch=seen.append)
    assert [e["epoch"] for e in log] == [1, 2, 3]
    assert seen == log
    report = idseq.evaluate(tmp_path / "run" / "best.ckpt", manifest, "TEST")
    assert 0.0 <= report["auc_overall"] <= 1.0
    assert len(report["per_video"]) > 0
    assert "| Method |" in idseq.render_report(report, "markdown")

    ckpt = idseq.Checkpoint.load(tmp_path / "run" / "best.ckpt")
    frames = np.eye(8, dtype=np.float32)[np.arange(12) % 8]
    score = ckpt.score(frames, frames[0])
    assert 0.0 <= score <= 1.0
    with pytest.raises(ValueError):
        idseq.train(manifest, tmp_path / "bad", {"epoch": 3})
