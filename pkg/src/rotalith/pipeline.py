"""End-to-end dense and sparse feature pipelines, descriptor matching, and the
toy classification protocol used to demonstrate that training without
rotations transfers to arbitrarily rotated inputs.

Backbone weights are random, seeded, and frozen: invariance is a property of
the architecture, not of training, so random invariant features are enough to
exercise every invariance claim.  Only the small classification head is
trained (plain gradient descent with analytic gradients).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

from .errors import InputFormatError, NumericError
from .geometry import cart_to_spherical, random_rotation, rot_z
from .resample import trilinear_sample
from .so3 import SphericalFilter, shells_to_channels, svc_spectral
from .sprin import (
    MlpFilter,
    SprinLayerCfg,
    correlate_at,
    farthest_point_sampling,
    sparse_correlate,
)
from .voxelize import SamplingConfig, normalize_cloud, voxelize
from . import harmonics as sh


@dataclass
class PrinConfig:
    """Dense-path hyperparameters; desk-scale defaults (bandwidth 8)."""

    bandwidth: int = 8
    xi: float = 1.0 / 32.0
    mode: str = "daas"
    svc_channels: int = 40
    conv_channels: tuple[int, ...] = (40, 50)
    fc_widths: tuple[int, ...] = (50, 50)
    shells_as_channels: bool = False
    filter_degree: int | None = None

    def __post_init__(self):
        if self.bandwidth < 2:
            raise ValueError(f"bandwidth must be >= 2, got {self.bandwidth}")
        if min((self.svc_channels,) + self.conv_channels + self.fc_widths) < 1:
            raise ValueError("all channel widths must be >= 1")

    @property
    def degree(self) -> int:
        return self.bandwidth - 1 if self.filter_degree is None else self.filter_degree

    @property
    def layer_channels(self) -> tuple[int, ...]:
        c0 = 2 * self.bandwidth if self.shells_as_channels else 1
        return (c0, self.svc_channels) + self.conv_channels


@dataclass
class SprinConfig:
    """Sparse-path layer stack.

    ``encoder`` stages are ``(m, layers)``: FPS to m centers (None keeps the
    current points) followed by correlation layers given as (k, d) pairs.
    ``decoder`` stages mirror the downsamplings in reverse; the first layer of
    each stage propagates features up to the next-finer level.
    """

    encoder: tuple = (
        (None, ((64, 2), (64, 2))),
        (128, ((72, 3), (32, 1), (32, 1))),
        (32, ((32, 1), (32, 1), (32, 1))),
    )
    decoder: tuple = (
        ((16, 1), (32, 1)),
        ((32, 1), (48, 2), (96, 3)),
    )
    hidden: int = 64
    channels: int = 64
    cls_head: tuple[int, ...] = (256, 64)
    seg_head: tuple[int, ...] = (128, 256)
    aggregate: str = "mean"

    def __post_init__(self):
        n_down = sum(1 for m, _ in self.encoder if m is not None)
        if len(self.decoder) != n_down:
            raise ValueError(
                f"decoder must have one stage per downsampling, got {len(self.decoder)} for {n_down}"
            )


def small_sprin_config(k: int = 16, d: int = 1, m: int = 16) -> SprinConfig:
    """A light stack for quick experiments and tests on small clouds."""
    return SprinConfig(
        encoder=((None, ((k, d),)), (m, ((k, d), (k, d)))),
        decoder=(((k, d), (k, d)),),
        hidden=32,
        channels=32,
        cls_head=(64, 32),
        seg_head=(32, 64),
    )


@dataclass
class Descriptor:
    """Per-point or global invariant features plus provenance."""

    feats: np.ndarray = field(repr=False)
    shape_id: str = ""
    point_indices: np.ndarray | None = None
    config_hash: str = ""

    def __post_init__(self):
        self.feats = np.asarray(self.feats, dtype=float)
        if not np.all(np.isfinite(self.feats)):
            raise ValueError("descriptor contains non-finite entries")

    @property
    def channels(self) -> int:
        return self.feats.shape[-1]


def config_hash(cfg) -> str:
    """Stable digest of a config dataclass for descriptor provenance."""
    blob = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# weight initialization
# ---------------------------------------------------------------------------


def _init_mlp(prefix: str, widths: tuple[int, ...], rng, out: dict) -> None:
    for j, (w_in, w_out) in enumerate(zip(widths[:-1], widths[1:])):
        out[f"{prefix}_w{j}"] = rng.standard_normal((w_out, w_in)) * np.sqrt(2.0 / w_in)
        out[f"{prefix}_b{j}"] = np.zeros(w_out)


def init_weights(cfg, seed: int) -> dict[str, np.ndarray]:
    """Seeded scaled-normal initialization for every filter and head."""
    rng = np.random.default_rng(seed)
    out: dict[str, np.ndarray] = {}
    if isinstance(cfg, PrinConfig):
        chans = cfg.layer_channels
        nc = sh.n_coeffs(cfg.degree)
        for li, (c_in, c_out) in enumerate(zip(chans[:-1], chans[1:])):
            out[f"svc{li}"] = rng.standard_normal((nc, c_out, c_in)) * np.sqrt(2.0 / c_in)
        _init_mlp("pp", (chans[-1],) + cfg.fc_widths, rng, out)
        _init_mlp("gl", (chans[-1],) + cfg.fc_widths, rng, out)
        return out
    if isinstance(cfg, SprinConfig):
        c = 0
        for si, (_, layers) in enumerate(cfg.encoder):
            for li in range(len(layers)):
                _init_mlp(f"enc{si}_{li}", (8 + c, cfg.hidden, cfg.channels), rng, out)
                c = cfg.channels
        _init_mlp("cls", (2 * cfg.channels,) + cfg.cls_head, rng, out)
        for si, layers in enumerate(cfg.decoder):
            for li in range(len(layers)):
                _init_mlp(f"dec{si}_{li}", (8 + cfg.channels, cfg.hidden, cfg.channels), rng, out)
        _init_mlp("seg", (cfg.channels,) + cfg.seg_head, rng, out)
        return out
    raise TypeError(f"unsupported config type {type(cfg).__name__}")


def _mlp_from(weights: dict, prefix: str) -> MlpFilter:
    layers = []
    j = 0
    while f"{prefix}_w{j}" in weights:
        layers.append((np.asarray(weights[f"{prefix}_w{j}"]), np.asarray(weights[f"{prefix}_b{j}"])))
        j += 1
    if not layers:
        raise ValueError(f"no weights found under prefix {prefix!r}")
    return MlpFilter(layers)


def _head_apply(weights: dict, prefix: str, x: np.ndarray) -> np.ndarray:
    """FC head: rectifier after every layer, including the last."""
    j = 0
    while f"{prefix}_w{j}" in weights:
        x = np.maximum(x @ weights[f"{prefix}_w{j}"].T + weights[f"{prefix}_b{j}"], 0.0)
        j += 1
    if j == 0:
        raise ValueError(f"no weights found under prefix {prefix!r}")
    return x


def _canonical_fps_start(points: np.ndarray) -> int:
    """Permutation-stable start: the point farthest from the centroid."""
    diff = points - points.mean(axis=0)
    return int(np.argmax(np.einsum("nk,nk->n", diff, diff)))


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------


def prin_forward(
    points: np.ndarray, weights: dict[str, np.ndarray], cfg: PrinConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Dense path: voxelize, correlate, re-sample at the input points.

    Returns ``(per_point (N, fc_widths[-1]), global (fc_widths[-1],))``.
    The cloud must already be normalized into the unit ball.
    """
    points = np.asarray(points, dtype=float)
    grid = voxelize(points, cfg.bandwidth, SamplingConfig(cfg.xi, cfg.mode))
    if cfg.shells_as_channels:
        grid = shells_to_channels(grid)
    chans = cfg.layer_channels
    n_layers = len(chans) - 1
    for li in range(n_layers):
        key = f"svc{li}"
        if key not in weights:
            raise ValueError(f"weights are missing {key!r}; config/weight mismatch")
        coeffs = np.asarray(weights[key])
        if coeffs.shape != (sh.n_coeffs(cfg.degree), chans[li + 1], chans[li]):
            raise ValueError(
                f"{key} has shape {coeffs.shape}, config wants "
                f"{(sh.n_coeffs(cfg.degree), chans[li + 1], chans[li])}"
            )
        grid = svc_spectral(grid, SphericalFilter(cfg.bandwidth, coeffs=coeffs))
        if li != n_layers - 1:
            np.maximum(grid.data, 0.0, out=grid.data)
    alpha, beta, h = cart_to_spherical(points)
    voxel_feats = trilinear_sample(grid, alpha, beta, h)
    per_point = _head_apply(weights, "pp", voxel_feats)
    pooled = grid.data.max(axis=(0, 1, 2))
    global_feat = _head_apply(weights, "gl", pooled)
    return per_point, global_feat


def sprin_forward(
    points: np.ndarray, weights: dict[str, np.ndarray], cfg: SprinConfig, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse path: encoder with set abstraction, pooled head, and a
    propagation decoder back to full resolution.

    Returns ``(per_point (N, seg_head[-1]), global (cls_head[-1],))``.
    """
    points = np.asarray(points, dtype=float)
    rng = np.random.default_rng(seed)
    levels: list[tuple[np.ndarray, np.ndarray | None]] = []
    cur_pts, cur_feats = points, None
    for si, (m, layers) in enumerate(cfg.encoder):
        for li, (k, d) in enumerate(layers):
            filt = _mlp_from(weights, f"enc{si}_{li}")
            lcfg = SprinLayerCfg(k=k, d=d, aggregate=cfg.aggregate)
            if li == 0 and m is not None:
                idx = farthest_point_sampling(cur_pts, m, _canonical_fps_start(cur_pts))
                new_pts = cur_pts[idx]
                cur_feats = correlate_at(
                    cur_pts, cur_feats, new_pts, filt, lcfg, rng, cur_pts.mean(axis=0)
                )
                cur_pts = new_pts
            else:
                cur_feats = sparse_correlate(
                    cur_pts, cur_feats, np.arange(len(cur_pts)), filt, lcfg, rng
                )
        levels.append((cur_pts, cur_feats))

    pooled = np.concatenate([cur_feats.max(axis=0), cur_feats.mean(axis=0)])
    global_feat = _head_apply(weights, "cls", pooled)

    up_targets = list(reversed(levels[:-1]))
    dn_pts, dn_feats = levels[-1]
    for si, layers in enumerate(cfg.decoder):
        up_pts = up_targets[si][0]
        for li, (k, d) in enumerate(layers):
            filt = _mlp_from(weights, f"dec{si}_{li}")
            lcfg = SprinLayerCfg(k=k, d=d, aggregate=cfg.aggregate)
            if li == 0:
                dn_feats = correlate_at(
                    dn_pts, dn_feats, up_pts, filt, lcfg, rng, dn_pts.mean(axis=0)
                )
                dn_pts = up_pts
            else:
                dn_feats = sparse_correlate(
                    dn_pts, dn_feats, np.arange(len(dn_pts)), filt, lcfg, rng
                )
    per_point = _head_apply(weights, "seg", dn_feats)
    return per_point, global_feat


# ---------------------------------------------------------------------------
# descriptor matching
# ---------------------------------------------------------------------------


def match_descriptors(
    da: Descriptor,
    db: Descriptor,
    labels_a: np.ndarray | None = None,
    labels_b: np.ndarray | None = None,
) -> tuple[np.ndarray, float | None]:
    """Nearest-neighbor match of each row of ``da`` into ``db``.

    Returns the index map and, when both label arrays are given, the fraction
    of matches whose labels agree.
    """
    if da.channels != db.channels:
        raise ValueError(f"channel mismatch: {da.channels} vs {db.channels}")
    a, b = da.feats, db.feats
    d2 = np.einsum("ik,ik->i", a, a)[:, None] - 2.0 * a @ b.T + np.einsum("jk,jk->j", b, b)[None, :]
    idx = np.argmin(d2, axis=1)
    acc = None
    if labels_a is not None and labels_b is not None:
        acc = float(np.mean(np.asarray(labels_b)[idx] == np.asarray(labels_a)))
    return idx, acc


# ---------------------------------------------------------------------------
# toy data and the trained head
# ---------------------------------------------------------------------------

TOY_CLASSES = ("sphere", "cube", "cylinder")


class ToyCloud(NamedTuple):
    points: np.ndarray
    class_id: int
    part_labels: np.ndarray


def _sample_sphere(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d, (d[:, 2] > 0).astype(np.int64)


def _sample_cube(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    face = rng.integers(0, 6, n)
    uv = rng.uniform(-1.0, 1.0, (n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    for a in range(3):
        sel = axis == a
        others = [i for i in range(3) if i != a]
        pts[sel, a] = sign[sel]
        pts[np.ix_(sel, others)] = uv[sel]
    return pts, face.astype(np.int64)


def _sample_cylinder(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    r0, hh = 0.6, 1.0
    lateral = 2.0 * np.pi * r0 * 2.0 * hh
    cap = np.pi * r0 * r0
    probs = np.array([lateral, cap, cap])
    probs = probs / probs.sum()
    part = rng.choice(3, size=n, p=probs)  # 0 lateral, 1 top, 2 bottom
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    pts = np.empty((n, 3))
    lat = part == 0
    pts[lat, 0] = r0 * np.cos(theta[lat])
    pts[lat, 1] = r0 * np.sin(theta[lat])
    pts[lat, 2] = rng.uniform(-hh, hh, int(lat.sum()))
    for pid, z in ((1, hh), (2, -hh)):
        sel = part == pid
        rho = r0 * np.sqrt(rng.uniform(0.0, 1.0, int(sel.sum())))
        pts[sel, 0] = rho * np.cos(theta[sel])
        pts[sel, 1] = rho * np.sin(theta[sel])
        pts[sel, 2] = z
    return pts, part.astype(np.int64)


_SAMPLERS = {"sphere": _sample_sphere, "cube": _sample_cube, "cylinder": _sample_cylinder}


def toy_synth(
    classes: tuple[str, ...] = TOY_CLASSES,
    n_per_class: int = 100,
    n_points: int = 512,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> list[ToyCloud]:
    """Labeled synthetic clouds: surface samples plus optional Gaussian noise,
    normalized into the unit ball.  Exactly ``n_per_class`` clouds per class."""
    if n_points < 64:
        raise InputFormatError(f"n_points must be >= 64, got {n_points}")
    unknown = [c for c in classes if c not in _SAMPLERS]
    if unknown:
        raise InputFormatError(f"unknown classes {unknown}; pick from {sorted(_SAMPLERS)}")
    rng = np.random.default_rng(seed)
    clouds = []
    for cid, cname in enumerate(classes):
        for _ in range(n_per_class):
            pts, labels = _SAMPLERS[cname](n_points, rng)
            if noise_sigma > 0.0:
                pts = pts + noise_sigma * rng.standard_normal(pts.shape)
            clouds.append(ToyCloud(normalize_cloud(pts), cid, labels))
    return clouds


def blob_cloud(n_points: int, seed: int) -> np.ndarray:
    """A smooth star-shaped cloud whose density respects low band limits.

    Radius is a fixed low-degree function of direction, so the voxelized
    signal is slowly varying and rotation experiments are dominated by the
    pipeline rather than by sampling roughness.
    """
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n_points, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    u1 = np.array([0.36, -0.48, 0.8])
    u2 = np.array([0.8, 0.6, 0.0])
    r = 0.62 + 0.14 * (d @ u1) + 0.10 * (d @ u2) ** 2
    return normalize_cloud(r[:, None] * d)


@dataclass
class TrainedHead:
    """A trained softmax head with its input standardization."""

    params: list[tuple[np.ndarray, np.ndarray]]
    mean: np.ndarray
    std: np.ndarray


def _head_forward(params, X):
    acts = [X]
    h = X
    # overflow here is reported as a divergence error by the caller
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (W, b) in enumerate(params):
            z = h @ W.T + b
            h = np.maximum(z, 0.0) if i < len(params) - 1 else z
            acts.append(h)
    return acts


def head_loss_and_grad(params, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and analytic gradients for a rectifier head.

    ``X`` is standardized features ``(N, D)``; ``y`` integer labels.  Returns
    ``(loss, grads)`` with grads shaped like params.
    """
    n = X.shape[0]
    acts = _head_forward(params, X)
    logits = acts[-1]
    with np.errstate(invalid="ignore"):
        shifted = logits - logits.max(axis=1, keepdims=True)
        expz = np.exp(shifted)
        prob = expz / expz.sum(axis=1, keepdims=True)
        loss = -np.mean(np.log(np.maximum(prob[np.arange(n), y], 1e-300)))
    delta = prob.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        inp = acts[i]
        grads[i] = (delta.T @ inp, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W) * (acts[i] > 0.0)
    return float(loss), grads


def train_head(
    feats: np.ndarray,
    labels: np.ndarray,
    hidden: tuple[int, ...] = (),
    epochs: int = 200,
    lr: float = 0.5,
    seed: int = 0,
) -> tuple[TrainedHead, list[float]]:
    """Fit a softmax head by full-batch gradient descent; deterministic per seed.

    Features are standardized column-wise before training.  Raises
    :class:`NumericError` if the loss goes non-finite.
    """
    feats = np.asarray(feats, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1
    mu = feats.mean(axis=0)
    sd = np.maximum(feats.std(axis=0), 1e-9)
    X = (feats - mu) / sd
    rng = np.random.default_rng(seed)
    widths = (feats.shape[1],) + tuple(hidden) + (n_classes,)
    params = [
        (rng.standard_normal((o, i)) * np.sqrt(2.0 / i), np.zeros(o))
        for i, o in zip(widths[:-1], widths[1:])
    ]
    curve: list[float] = []
    for epoch in range(epochs):
        loss, grads = head_loss_and_grad(params, X, labels)
        if not np.isfinite(loss) or not all(
            np.all(np.isfinite(W)) and np.all(np.isfinite(b)) for W, b in params
        ):
            raise NumericError(
                f"head training diverged at epoch {epoch} (loss={loss}); lower the learning rate"
            )
        params = [(W - lr * gW, b - lr * gb) for (W, b), (gW, gb) in zip(params, grads)]
        pred = np.argmax(_head_forward(params, X)[-1], axis=1)
        curve.append(float(np.mean(pred == labels)))
    return TrainedHead(params, mu, sd), curve


def head_predict(head: TrainedHead, feats: np.ndarray) -> np.ndarray:
    X = (np.asarray(feats, dtype=float) - head.mean) / head.std
    return np.argmax(_head_forward(head.params, X)[-1], axis=1)


# ---------------------------------------------------------------------------
# toy protocol
# ---------------------------------------------------------------------------


def relative_deviation(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Per-row relative deviation between feature matrices: (max, mean)."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    num = np.linalg.norm(a - b, axis=-1)
    den = np.maximum(np.linalg.norm(b, axis=-1), 1e-30)
    rel = num / den
    return float(rel.max()), float(rel.mean())


def equivariance_trial(
    pipeline: str,
    seed: int,
    rotation: str = "haar",
    bandwidth: int = 8,
    n_points: int | None = None,
    sprin_cfg: SprinConfig | None = None,
    xi: float | None = None,
) -> dict[str, float]:
    """Compare per-point features of a cloud and its rotated copy.

    ``rotation`` is ``haar`` or ``grid-z`` (a z-rotation by a whole grid
    step).  The sparse path uses a dilation-free stack so invariance is exact
    up to float accumulation; the dense path rotates the raw cloud, so the
    haar numbers include the sampling error of the voxelizer.
    """
    rng = np.random.default_rng(seed)
    if rotation == "grid-z":
        m = int(rng.integers(1, 2 * bandwidth))
        Q = rot_z(2.0 * np.pi * m / (2 * bandwidth))
    elif rotation == "haar":
        Q = random_rotation(rng)
    else:
        raise InputFormatError(f"rotation must be 'haar' or 'grid-z', got {rotation!r}")

    if pipeline == "sprin":
        n = 192 if n_points is None else n_points
        cfg = sprin_cfg if sprin_cfg is not None else small_sprin_config()
        weights = init_weights(cfg, seed)
        cloud = blob_cloud(n, seed + 17)
        base, _ = sprin_forward(cloud, weights, cfg, seed=0)
        rot, _ = sprin_forward(cloud @ Q.T, weights, cfg, seed=0)
    elif pipeline == "prin":
        n = 20000 if n_points is None else n_points
        cfg = PrinConfig(bandwidth=bandwidth, xi=(0.1 if xi is None else xi))
        weights = init_weights(cfg, seed)
        cloud = blob_cloud(n, seed + 17)
        base, _ = prin_forward(cloud, weights, cfg)
        rot, _ = prin_forward(cloud @ Q.T, weights, cfg)
    else:
        raise InputFormatError(f"pipeline must be 'prin' or 'sprin', got {pipeline!r}")
    mx, mn = relative_deviation(rot, base)
    return {"max_abs_err": mx, "mean_abs_err": mn}


def toy_protocol(
    pipeline: str = "sprin",
    classes: tuple[str, ...] = TOY_CLASSES,
    n_per_class: int = 100,
    n_points: int = 512,
    epochs: int = 300,
    lr: float = 0.5,
    seed: int = 7,
    bandwidth: int = 8,
    mode: str = "daas",
    noise_sigma: float = 0.01,
    sprin_cfg: SprinConfig | None = None,
    prin_xi: float = 0.15,
) -> dict[str, float]:
    """Train a head on unrotated features, evaluate on rotated test clouds.

    Splits each class half/half into train and test, extracts global features
    from the frozen backbone, and reports accuracy with no rotation (NR) and
    under per-cloud Haar rotations (AR).
    """
    if pipeline not in ("prin", "sprin"):
        raise InputFormatError(f"pipeline must be 'prin' or 'sprin', got {pipeline!r}")
    clouds = toy_synth(classes, n_per_class, n_points, noise_sigma, seed)
    if pipeline == "sprin":
        cfg = sprin_cfg if sprin_cfg is not None else SprinConfig()
        weights = init_weights(cfg, seed)

        def embed(pts, fseed):
            return sprin_forward(pts, weights, cfg, seed=fseed)[1]
    else:
        # window width sized for desk-scale clouds: narrow default windows
        # leave a few-hundred-point cloud almost entirely in empty voxels
        cfg = PrinConfig(bandwidth=bandwidth, mode=mode, xi=prin_xi)
        weights = init_weights(cfg, seed)

        def embed(pts, fseed):
            return prin_forward(pts, weights, cfg)[1]

    train_idx = [i for i in range(len(clouds)) if i % 2 == 0]
    test_idx = [i for i in range(len(clouds)) if i % 2 == 1]
    rot_rng = np.random.default_rng(seed + 1)
    rotations = random_rotation(rot_rng, num=len(test_idx))

    train_feats = np.stack([embed(clouds[i].points, 1000 + i) for i in train_idx])
    train_labels = np.array([clouds[i].class_id for i in train_idx])
    test_feats = np.stack([embed(clouds[i].points, 1000 + i) for i in test_idx])
    test_feats_rot = np.stack(
        [embed(clouds[i].points @ rotations[t].T, 1000 + i) for t, i in enumerate(test_idx)]
    )
    test_labels = np.array([clouds[i].class_id for i in test_idx])

    head, _ = train_head(train_feats, train_labels, hidden=(32,), epochs=epochs, lr=lr, seed=seed)
    nr = float(np.mean(head_predict(head, test_feats) == test_labels))
    ar = float(np.mean(head_predict(head, test_feats_rot) == test_labels))
    return {"nr_accuracy": nr, "ar_accuracy": ar, "gap": nr - ar}
