import math

import numpy as np
import pytest

import hsthdr


def test_tonemap_endpoints():
    h = np.array([[0.0, 1.0, 0.1]])
    t = hsthdr.tonemap_mu(h)
    assert t[0, 0] == 0.0
    assert t[0, 1] == pytest.approx(1.0, abs=1e-15)
    assert t[0, 2] == pytest.approx(math.log(501) / math.log(5001), rel=1e-12)


def test_lift_matches_numpy_reference():
    rng = np.random.default_rng(3)
    img = rng.uniform(0.01, 1.0, size=(8, 8, 3))
    for ev in (-2.0, 0.0, 2.0):
        lifted = hsthdr.ldr_to_hdr(img, ev)
        ref = img**2.2 / 2.0**ev
        assert np.allclose(lifted, ref, rtol=1e-6)


def test_st_map_zero_for_flat_and_bounded():
    flat = np.full((16, 16), 0.7)
    assert np.all(hsthdr.st_map(flat) == 0.0)

    rng = np.random.default_rng(5)
    noisy = rng.uniform(size=(32, 32))
    m = hsthdr.st_map(noisy)
    assert m.shape == (32, 32)
    assert m.min() >= 0.0 and m.max() <= 1.0


def test_luminance_weights():
    red = np.zeros((8, 8, 3))
    red[..., 0] = 1.0
    assert np.allclose(hsthdr.luminance(red), 0.2126)


def test_params_deterministic_and_countable(tmp_path):
    cfg = hsthdr.tiny_config()
    a = hsthdr.init_params(cfg, 11)
    b = hsthdr.init_params(cfg, 11)
    assert a.count == hsthdr.expected_param_count(cfg)
    assert np.array_equal(a.flat(), b.flat())

    path = str(tmp_path / "p.bin")
    a.save(path)
    c = hsthdr.load_params(path)
    assert np.array_equal(a.flat(), c.flat())


def test_forward_shape_and_determinism():
    cfg = hsthdr.tiny_config()
    params = hsthdr.init_params(cfg, 21)
    rng = np.random.default_rng(21)
    x1 = rng.uniform(size=(8, 8, 7))
    x2 = rng.uniform(size=(8, 8, 7))
    out1 = hsthdr.forward(params, x1, x2)
    out2 = hsthdr.forward(params, x1, x2)
    assert out1.shape == (8, 8, 3)
    assert np.array_equal(out1, out2)
    assert np.all((out1 > 0.0) & (out1 < 1.0))


def test_psnr_closed_form():
    gt = np.full((8, 8, 3), 0.5)
    h = np.full((8, 8, 3), 0.6)
    assert hsthdr.psnr_l(h, gt) == pytest.approx(20.0, abs=1e-9)
    assert hsthdr.psnr_l(gt, gt) == 99.0


def test_loss_decomposition():
    rng = np.random.default_rng(31)
    h = rng.uniform(size=(16, 16, 3))
    gt = rng.uniform(size=(16, 16, 3))
    lv = hsthdr.loss(h, gt, lam=0.01)
    assert lv["total"] == lv["mse"] + 0.01 * lv["st"]
    assert hsthdr.loss(h, h)["total"] == 0.0


def test_select_reference():
    assert hsthdr.select_reference([-2.0, 0.0, 2.0]) == 1
    assert hsthdr.select_reference([-3.0, -1.0, 1.0, 3.0]) == 1
    with pytest.raises(hsthdr.HstError):
        hsthdr.select_reference([])


def test_sequence_fusion_counts_pairs():
    scene = hsthdr.synth_scene(7, size=32, displacement=3)
    params = hsthdr.init_params(hsthdr.tiny_config(), 7)
    inputs = list(zip(scene["ldr"], scene["evs"]))
    fused, pairs = hsthdr.fuse_sequence(inputs, params)
    assert pairs == 2
    assert fused.shape == (32, 32, 3)

    manual_first = hsthdr.fuse_pair(scene["ldr"][0], -2.0, scene["ldr"][1], 0.0, params)
    manual = hsthdr.fuse_pair(scene["ldr"][2], 2.0, np.clip(manual_first, 0.0, 1.0), 0.0, params)
    assert np.array_equal(fused, manual)


def test_pfm_round_trip(tmp_path):
    rng = np.random.default_rng(41)
    img = np.float64(np.float32(rng.uniform(0.0, 4.0, size=(6, 5, 3))))
    path = str(tmp_path / "x.pfm")
    hsthdr.save_hdr(path, img)
    back = hsthdr.load_hdr(path)
    assert np.array_equal(back, img)


def test_grad_check_small():
    report = hsthdr.grad_check(seed=3, epsilon=1e-3, probes=20)
    assert report["probes"] == 20
    assert report["max_rel_error"] < 1e-3


def test_train_toy_short_run():
    params, curve = hsthdr.train_toy(seed=5, steps=4)
    assert curve.shape == (5, 4)
    assert np.all(np.isfinite(curve))
    assert params.count == hsthdr.expected_param_count(hsthdr.tiny_config())
