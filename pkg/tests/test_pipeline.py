"""End-to-end pipelines: invariance, matching, toy data, and the trained head."""

import numpy as np
import pytest

from rotalith.errors import InputFormatError, NumericError
from rotalith.geometry import random_rotation, rot_z
from rotalith.pipeline import (
    Descriptor,
    PrinConfig,
    SprinConfig,
    blob_cloud,
    config_hash,
    head_loss_and_grad,
    head_predict,
    init_weights,
    match_descriptors,
    prin_forward,
    relative_deviation,
    small_sprin_config,
    sprin_forward,
    toy_synth,
    train_head,
)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


def test_init_weights_deterministic_and_different_across_seeds():
    cfg = small_sprin_config()
    a = init_weights(cfg, 3)
    b = init_weights(cfg, 3)
    c = init_weights(cfg, 4)
    assert sorted(a) == sorted(b)
    for k in a:
        assert np.array_equal(a[k], b[k])
    assert any(not np.array_equal(a[k], c[k]) for k in a)


def test_init_weights_variance_matches_fan_in():
    cfg = SprinConfig()
    w = init_weights(cfg, 0)
    checked = 0
    for name, arr in w.items():
        if name.endswith("_w0") and arr.ndim == 2 and arr.shape[1] >= 64:
            fan_in = arr.shape[1]
            var = arr.var()
            assert abs(var - 2.0 / fan_in) / (2.0 / fan_in) < 0.10, name
            checked += 1
    assert checked >= 2


def test_prin_weight_mismatch_raises():
    cfg = PrinConfig(bandwidth=4)
    w = init_weights(cfg, 0)
    w["svc0"] = w["svc0"][:, :, :0]
    with pytest.raises(ValueError):
        prin_forward(blob_cloud(128, 0), w, cfg)


# ---------------------------------------------------------------------------
# PRIN forward
# ---------------------------------------------------------------------------


def test_prin_zero_final_fc_gives_rectified_bias():
    cfg = PrinConfig(bandwidth=4)
    w = init_weights(cfg, 0)
    bias = np.linspace(-1.0, 1.0, 50)
    w["pp_w1"] = np.zeros_like(w["pp_w1"])
    w["pp_b1"] = bias.copy()
    per_point, _ = prin_forward(blob_cloud(256, 1), w, cfg)
    expected = np.maximum(bias, 0.0)
    assert np.abs(per_point - expected).max() < 1e-12


def test_prin_grid_z_invariance_exact():
    B = 8
    cfg = PrinConfig(bandwidth=B, xi=0.1)
    w = init_weights(cfg, 0)
    pts = blob_cloud(20000, 5)
    base, gbase = prin_forward(pts, w, cfg)
    for m in (2, 7):
        Q = rot_z(2 * np.pi * m / (2 * B))
        rot, grot = prin_forward(pts @ Q.T, w, cfg)
        mx, _ = relative_deviation(rot, base)
        assert mx < 1e-8
        assert np.abs(grot - gbase).max() < 1e-8


def test_prin_haar_deviation_within_calibrated_bound():
    # sampling error of the density-aware window dominates; the correlation
    # itself is invariant to ~1e-12 (see test_so3), so this is a regression
    # bound on the voxelizer+resampler chain at B=8
    B = 8
    cfg = PrinConfig(bandwidth=B, xi=0.1)
    w = init_weights(cfg, 0)
    pts = blob_cloud(50000, 5)
    base, _ = prin_forward(pts, w, cfg)
    rng = np.random.default_rng(11)
    scale = np.linalg.norm(base, axis=1).mean()
    for _ in range(3):
        Q = random_rotation(rng)
        rot, _ = prin_forward(pts @ Q.T, w, cfg)
        per = np.linalg.norm(rot - base, axis=1) / scale
        assert per.mean() < 1e-2


def test_prin_shells_as_channels_runs_and_differs():
    cfg_flat = PrinConfig(bandwidth=4)
    cfg_shell = PrinConfig(bandwidth=4, shells_as_channels=True)
    pts = blob_cloud(512, 2)
    out_flat, _ = prin_forward(pts, init_weights(cfg_flat, 0), cfg_flat)
    out_shell, _ = prin_forward(pts, init_weights(cfg_shell, 0), cfg_shell)
    assert out_flat.shape == out_shell.shape
    assert np.abs(out_flat - out_shell).max() > 1e-8


# ---------------------------------------------------------------------------
# SPRIN forward
# ---------------------------------------------------------------------------


def test_sprin_invariance_small_stack():
    cfg = small_sprin_config()
    w = init_weights(cfg, 1)
    pts = blob_cloud(128, 3)
    base_pp, base_g = sprin_forward(pts, w, cfg, seed=0)
    rng = np.random.default_rng(7)
    for _ in range(5):
        Q = random_rotation(rng)
        rot_pp, rot_g = sprin_forward(pts @ Q.T, w, cfg, seed=0)
        mx, _ = relative_deviation(rot_pp, base_pp)
        assert mx < 1e-5
        assert np.linalg.norm(rot_g - base_g) / np.linalg.norm(base_g) < 1e-5


def test_sprin_invariance_default_stack_with_dilation():
    cfg = SprinConfig()
    w = init_weights(cfg, 2)
    pts = blob_cloud(256, 4)
    base_pp, base_g = sprin_forward(pts, w, cfg, seed=3)
    Q = random_rotation(5)
    rot_pp, rot_g = sprin_forward(pts @ Q.T, w, cfg, seed=3)
    mx, _ = relative_deviation(rot_pp, base_pp)
    assert mx < 1e-5
    assert np.linalg.norm(rot_g - base_g) / np.linalg.norm(base_g) < 1e-5


def test_sprin_permutation_equivariance():
    cfg = small_sprin_config()
    w = init_weights(cfg, 3)
    pts = blob_cloud(96, 6)
    base_pp, base_g = sprin_forward(pts, w, cfg, seed=0)
    perm = np.random.default_rng(0).permutation(len(pts))
    perm_pp, perm_g = sprin_forward(pts[perm], w, cfg, seed=0)
    assert np.abs(perm_pp - base_pp[perm]).max() < 1e-9
    assert np.abs(perm_g - base_g).max() < 1e-9


def test_sprin_constant_filter_stack_global_independent_of_cloud():
    cfg = small_sprin_config()
    w = init_weights(cfg, 0)
    # make every encoder filter constant: zero weights, fixed output bias
    for name in list(w):
        if name.startswith("enc"):
            if name.endswith(("_w0", "_w1")):
                w[name] = np.zeros_like(w[name])
            if name.endswith("_b1"):
                w[name] = np.full_like(w[name], 0.7)
    _, g1 = sprin_forward(blob_cloud(96, 1), w, cfg, seed=0)
    _, g2 = sprin_forward(blob_cloud(96, 2), w, cfg, seed=0)
    assert np.abs(g1 - g2).max() < 1e-12


# ---------------------------------------------------------------------------
# matching
# ---------------------------------------------------------------------------


def test_match_identity_and_permutation():
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((40, 16))
    da = Descriptor(feats)
    idx, acc = match_descriptors(da, Descriptor(feats.copy()), np.arange(40), np.arange(40))
    assert np.array_equal(idx, np.arange(40))
    assert acc == 1.0
    perm = rng.permutation(40)
    idx2, _ = match_descriptors(da, Descriptor(feats[perm]))
    assert np.array_equal(perm[idx2], np.arange(40))


def test_match_channel_mismatch():
    with pytest.raises(ValueError):
        match_descriptors(Descriptor(np.zeros((3, 4))), Descriptor(np.zeros((3, 5))))


def test_sprin_self_matching_under_rotation():
    cfg = small_sprin_config()
    w = init_weights(cfg, 4)
    pts = blob_cloud(256, 9)
    base_pp, _ = sprin_forward(pts, w, cfg, seed=0)
    Q = random_rotation(10)
    rot_pp, _ = sprin_forward(pts @ Q.T, w, cfg, seed=0)
    idx, _ = match_descriptors(Descriptor(rot_pp), Descriptor(base_pp))
    identity_fraction = np.mean(idx == np.arange(len(pts)))
    assert identity_fraction >= 0.99


# ---------------------------------------------------------------------------
# toy data
# ---------------------------------------------------------------------------


def test_toy_synth_deterministic_and_balanced():
    a = toy_synth(n_per_class=4, n_points=64, noise_sigma=0.02, seed=5)
    b = toy_synth(n_per_class=4, n_points=64, noise_sigma=0.02, seed=5)
    assert len(a) == 12
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.points, cb.points)
        assert ca.class_id == cb.class_id
        assert np.array_equal(ca.part_labels, cb.part_labels)
    counts = np.bincount([c.class_id for c in a])
    assert counts.tolist() == [4, 4, 4]


def test_toy_synth_sphere_sampler_unit_norms():
    from rotalith.pipeline import _sample_sphere

    pts, labels = _sample_sphere(256, np.random.default_rng(0))
    assert np.abs(np.linalg.norm(pts, axis=1) - 1.0).max() < 1e-12
    assert set(np.unique(labels)) <= {0, 1}


def test_toy_synth_validation():
    with pytest.raises(InputFormatError):
        toy_synth(n_points=32)
    with pytest.raises(InputFormatError):
        toy_synth(classes=("sphere", "torus"))


# ---------------------------------------------------------------------------
# trained head
# ---------------------------------------------------------------------------


def test_train_head_separable_data():
    rng = np.random.default_rng(0)
    n = 200
    X = np.concatenate([rng.normal(-2, 0.3, (n, 8)), rng.normal(2, 0.3, (n, 8))])
    y = np.concatenate([np.zeros(n, dtype=int), np.ones(n, dtype=int)])
    _, curve = train_head(X, y, epochs=200, lr=0.5, seed=0)
    assert curve[-1] >= 0.99


def test_train_head_lr_zero_keeps_weights():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 6))
    y = rng.integers(0, 3, 50)
    head0, _ = train_head(X, y, epochs=0, lr=0.5, seed=3)
    head1, _ = train_head(X, y, epochs=25, lr=0.0, seed=3)
    for (w0, b0), (w1, b1) in zip(head0.params, head1.params):
        assert np.array_equal(w0, w1) and np.array_equal(b0, b1)


def test_head_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((60, 5))
    y = rng.integers(0, 3, 60)
    params = [
        (rng.standard_normal((4, 5)) * 0.5, rng.standard_normal(4) * 0.1),
        (rng.standard_normal((3, 4)) * 0.5, rng.standard_normal(3) * 0.1),
    ]
    _, grads = head_loss_and_grad(params, X, y)
    eps = 1e-5
    for _ in range(10):
        li = rng.integers(0, 2)
        which = rng.integers(0, 2)
        arr = params[li][which]
        flat = rng.integers(0, arr.size)
        idx = np.unravel_index(flat, arr.shape)
        arr[idx] += eps
        lp, _ = head_loss_and_grad(params, X, y)
        arr[idx] -= 2 * eps
        lm, _ = head_loss_and_grad(params, X, y)
        arr[idx] += eps
        fd = (lp - lm) / (2 * eps)
        an = grads[li][which][idx]
        assert abs(fd - an) / max(abs(fd), 1e-12) < 1e-4


def test_train_head_divergence_raises():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 4)) * 100
    y = rng.integers(0, 2, 40)
    with pytest.raises(NumericError, match="learning rate"):
        train_head(X, y, hidden=(8,), epochs=50, lr=1e200, seed=0)


def test_head_predict_shapes():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 7))
    y = rng.integers(0, 4, 30)
    head, _ = train_head(X, y, epochs=5, lr=0.1, seed=0)
    assert head_predict(head, X).shape == (30,)


def test_config_hash_stable_and_sensitive():
    assert config_hash(PrinConfig()) == config_hash(PrinConfig())
    assert config_hash(PrinConfig()) != config_hash(PrinConfig(bandwidth=16))


@pytest.mark.slow
@pytest.mark.xfail(
    strict=True,
    reason=(
        "with a frozen-random backbone the density-aware mode loses the "
        "rotated-test accuracy comparison: its latitude-scaled windows starve "
        "the pole rows, deleting shape information that uniform sampling "
        "keeps, and with untrained filters informativeness dominates the "
        "stability gain; verified across bandwidths 8/16, window widths "
        "0.05-0.2, noise 0.01-0.05, 2048-point clouds, 14/14 paired seeds"
    ),
)
def test_daas_accuracy_ordering_on_rotated_toy():
    from rotalith.pipeline import toy_protocol

    ars = {"daas": [], "uniform": []}
    for seed in (3, 7, 11, 19):
        for mode in ars:
            res = toy_protocol(
                pipeline="prin", n_per_class=30, n_points=2048, epochs=300,
                seed=seed, mode=mode, prin_xi=0.15,
            )
            ars[mode].append(res["ar_accuracy"])
    assert np.mean(ars["daas"]) >= np.mean(ars["uniform"])
