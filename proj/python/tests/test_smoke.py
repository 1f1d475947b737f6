import numpy as np
import pytest

import srr


def test_presets_and_modes():
    assert srr.Model().num_parameters == 125693
    for mode in ("self_only", "motion_only", "full", "rma"):
        assert srr.Model(attention_mode=mode).attention_mode == mode
    with pytest.raises(srr.ConfigError):
        srr.Model(attention_mode="cross")
    with pytest.raises(ValueError):
        srr.Model(preset="huge")


def test_synth_is_deterministic():
    f1, m1 = srr.synth(seed=3, frames=3)
    f2, m2 = srr.synth(seed=3, frames=3)
    assert f1.shape == (3, 3, 64, 64)
    assert m1.shape == (3, 64, 64)
    assert np.array_equal(f1, f2) and np.array_equal(m1, m2)
    assert set(np.unique(m1)) <= {0.0, 1.0}


def test_predict_shapes_and_ranges():
    frames, masks = srr.synth(frames=2)
    prev = np.concatenate([frames[0], masks[0][None]], axis=0)
    out = srr.Model(seed=2).predict(frames[1], prev, prev)
    assert out["mask"].shape == (64, 64)
    assert out["error"].shape == (16, 16)
    assert set(np.unique(out["mask"])) <= {0.0, 1.0}
    assert 0.0 < out["error"].min() and out["error"].max() < 1.0
    assert out["score"] == pytest.approx(out["error"].mean(), abs=1e-12)
    with pytest.raises(srr.DimensionError):
        srr.Model().predict(frames[1], frames[0], prev)


def test_infer_reference_trace_is_prefix_argmin():
    frames, _ = srr.synth(frames=6)
    out = srr.Model(seed=4).infer(frames)
    scores = out["scores"]
    assert out["masks"].shape == (6, 64, 64)
    best, at = 1.0, 0
    for t, s in enumerate(scores):
        if s < best:
            best, at = s, t
        assert out["ref_frame_index"][t] == at
    off = srr.Model(seed=4).infer(frames, reference_mode="off")
    assert not np.array_equal(off["scores"], scores)


def test_train_lowers_loss_and_checkpoint_round_trip(tmp_path):
    frames, masks = srr.synth(frames=4)
    model = srr.Model(seed=5)
    losses = model.train(frames, masks, iterations=30, lr=1e-3)
    assert len(losses) == 30
    assert losses[-1]["bce"] < losses[0]["bce"]
    path = str(tmp_path / "m.srr")
    model.save(path)
    again = srr.Model.load(path)
    assert np.array_equal(again.infer(frames)["scores"], model.infer(frames)["scores"])


def test_gradcheck_sampled():
    rep = srr.Model(seed=6).gradcheck(size=32, max_per_tensor=1)
    assert rep["passed"]
    assert rep["max_rel"] < 1e-3


def test_metrics():
    rng = np.random.default_rng(0)
    gt = (rng.random((8, 8)) > 0.6).astype(float)
    gt[0, 0] = 1
    assert srr.mae(gt, gt) == 0.0
    assert srr.dice(gt, gt) == 1.0
    assert srr.iou(gt, gt) == 1.0
    assert srr.s_measure(gt, gt) == pytest.approx(1.0)
    assert srr.weighted_fbeta(gt, gt) == pytest.approx(1.0)
    assert srr.weighted_fbeta(gt, np.zeros((8, 8))) is None
    assert srr.spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
