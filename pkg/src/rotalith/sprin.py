"""Sparse rotation-invariant correlation over kNN neighborhoods.

Every quantity the learnable filter sees is a rotation-invariant scalar, so
per-point outputs are unchanged when the whole cloud rotates.  For each
(neighbor x_i, center x_j) pair with cloud centroid c the filter input is the
8-vector

    [beta_rel, h_rel, s1, s2, s3, a1, a2, a3]

where beta_rel is the angle between the directions of x_i and x_j seen from
the origin (the polar angle of ``tmap(x_j)^-1 @ x_i``), h_rel = |x_i|, the
s's are the side lengths of the triangle (x_i, x_j, c) and the a's its inner
angles at x_i, x_j, c.  Filters are plain fully connected stacks; since the
azimuth of the relative point never enters, constancy on the z-coset holds
identically rather than approximately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INVARIANT_FIELDS = ("beta_rel", "h_rel", "s1", "s2", "s3", "a1", "a2", "a3")

# below this side length a triangle angle is undefined; see relative_invariants
_DEGENERATE_SIDE = 1e-12


@dataclass
class SprinLayerCfg:
    """Neighborhood size k, dilation rate d, and the neighbor aggregation."""

    k: int
    d: int = 1
    aggregate: str = "mean"

    def __post_init__(self):
        if self.k < 1 or self.d < 1:
            raise ValueError(f"need k >= 1 and d >= 1, got k={self.k}, d={self.d}")
        if self.aggregate not in ("mean", "max"):
            raise ValueError(f"aggregate must be 'mean' or 'max', got {self.aggregate!r}")


@dataclass
class MlpFilter:
    """Fully connected filter: rectifier between layers, linear output."""

    layers: list[tuple[np.ndarray, np.ndarray]] = field(repr=False)

    def __post_init__(self):
        prev = None
        for W, b in self.layers:
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError("each layer needs W of shape (out, in) and b of shape (out,)")
            if prev is not None and W.shape[1] != prev:
                raise ValueError(f"layer input width {W.shape[1]} does not match previous output {prev}")
            prev = W.shape[0]

    @property
    def in_width(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_width(self) -> int:
        return self.layers[-1][0].shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Evaluate on inputs of shape ``(..., in_width)``."""
        y = np.asarray(x, dtype=float)
        last = len(self.layers) - 1
        for i, (W, b) in enumerate(self.layers):
            y = y @ W.T + b
            if i != last:
                np.maximum(y, 0.0, out=y)
        return y

    @classmethod
    def create(cls, widths: tuple[int, ...], rng: np.random.Generator) -> "MlpFilter":
        """Seeded scaled-normal init (variance 2 / fan_in), zero biases."""
        layers = []
        for w_in, w_out in zip(widths[:-1], widths[1:]):
            W = rng.standard_normal((w_out, w_in)) * np.sqrt(2.0 / w_in)
            layers.append((W, np.zeros(w_out)))
        return cls(layers)


def relative_invariants(x_i: np.ndarray, x_j: np.ndarray, c: np.ndarray) -> np.ndarray:
    """The 8 rotation-invariant scalars for neighbor/center/centroid triples.

    Broadcasts over leading axes; returns shape ``(..., 8)`` with columns in
    ``INVARIANT_FIELDS`` order.  When a triangle side vanishes the angles are
    set to ``(0, pi/2, pi/2)`` so the map is total.
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    c = np.asarray(c, dtype=float)
    x_i, x_j, c = np.broadcast_arrays(x_i, x_j, c)

    ni = np.linalg.norm(x_i, axis=-1)
    nj = np.linalg.norm(x_j, axis=-1)
    dot = np.einsum("...k,...k->...", x_i, x_j)
    denom = ni * nj
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_rel = np.where(denom > 0.0, dot / np.maximum(denom, np.finfo(float).tiny), 1.0)
    beta_rel = np.arccos(np.clip(cos_rel, -1.0, 1.0))

    e_ij = x_j - x_i
    e_ic = c - x_i
    e_jc = c - x_j
    s1 = np.linalg.norm(e_ij, axis=-1)
    s2 = np.linalg.norm(e_ic, axis=-1)
    s3 = np.linalg.norm(e_jc, axis=-1)

    def _angle(u, v, nu, nv):
        d = np.einsum("...k,...k->...", u, v)
        nn = np.maximum(nu * nv, np.finfo(float).tiny)
        return np.arccos(np.clip(d / nn, -1.0, 1.0))

    a1 = _angle(e_ij, e_ic, s1, s2)
    a2 = _angle(-e_ij, e_jc, s1, s3)
    a3 = _angle(-e_ic, -e_jc, s2, s3)
    degenerate = (s1 < _DEGENERATE_SIDE) | (s2 < _DEGENERATE_SIDE) | (s3 < _DEGENERATE_SIDE)
    a1 = np.where(degenerate, 0.0, a1)
    a2 = np.where(degenerate, np.pi / 2.0, a2)
    a3 = np.where(degenerate, np.pi / 2.0, a3)

    return np.stack([beta_rel, ni, s1, s2, s3, a1, a2, a3], axis=-1)


def _knn_from_distances(d2_row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries; ties broken by lower index."""
    order = np.argsort(d2_row, kind="stable")
    return order[:k]


def _dilated_subset(knn_idx: np.ndarray, k: int, d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return knn_idx
    need = -(-k // d)  # ceil
    sel = rng.choice(k, size=need, replace=False)
    return knn_idx[sel]


def dilated_knn(points: np.ndarray, center_idx: int, k: int, d: int, rng) -> np.ndarray:
    """A random ceil(k/d)-subset of the k nearest neighbors of a cloud point.

    With d = 1 this is exactly the k nearest neighbors sorted by
    (distance, index); the subset is deterministic given the generator state.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds point count {n}")
    if d < 1:
        raise ValueError(f"dilation rate must be >= 1, got {d}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    diff = points - points[center_idx]
    d2 = np.einsum("nk,nk->n", diff, diff)
    return _dilated_subset(_knn_from_distances(d2, k), k, d, rng)


def farthest_point_sampling(points: np.ndarray, m: int, start_idx: int = 0) -> np.ndarray:
    """Greedy max-min subset of m indices, deterministic, ties to lower index."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}, got m={m}")
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = start_idx
    diff = points - points[start_idx]
    best = np.einsum("nk,nk->n", diff, diff)
    for t in range(1, m):
        nxt = int(np.argmax(best))
        chosen[t] = nxt
        diff = points - points[nxt]
        best = np.minimum(best, np.einsum("nk,nk->n", diff, diff))
    return chosen


def _pair_features(
    nbr_pos: np.ndarray,
    center_pos: np.ndarray,
    centroid: np.ndarray,
    nbr_feats: np.ndarray | None,
) -> np.ndarray:
    inv = relative_invariants(nbr_pos, center_pos[:, None, :], centroid)
    if nbr_feats is None:
        return inv
    return np.concatenate([inv, nbr_feats], axis=-1)


def correlate_at(
    source_points: np.ndarray,
    source_feats: np.ndarray | None,
    center_pos: np.ndarray,
    filt: MlpFilter,
    cfg: SprinLayerCfg,
    rng: np.random.Generator,
    centroid: np.ndarray,
) -> np.ndarray:
    """Shared core: correlate arbitrary center positions against a source cloud."""
    n = source_points.shape[0]
    if cfg.k > n:
        raise ValueError(f"k={cfg.k} exceeds source point count {n}")
    diff = center_pos[:, None, :] - source_points[None, :, :]
    d2 = np.einsum("cnk,cnk->cn", diff, diff)
    order = np.argsort(d2, axis=1, kind="stable")[:, : cfg.k]
    if cfg.d == 1:
        nbr = order
    else:
        nbr = np.stack(
            [_dilated_subset(order[i], cfg.k, cfg.d, rng) for i in range(order.shape[0])]
        )
    x = _pair_features(
        source_points[nbr],
        center_pos,
        centroid,
        None if source_feats is None else source_feats[nbr],
    )
    y = filt.apply(x)
    if cfg.aggregate == "max":
        return y.max(axis=1)
    return y.mean(axis=1)


def sparse_correlate(
    points: np.ndarray,
    in_feats: np.ndarray | None,
    centers: np.ndarray,
    filt: MlpFilter,
    cfg: SprinLayerCfg,
    rng,
) -> np.ndarray:
    """Empirical filter expectation over dilated kNN neighborhoods.

    ``out(x_j) = mean over selected neighbors x_i of
    filt([invariants(x_i, x_j, centroid) || in_feats(x_i)])`` for each center
    index ``x_j``; the centroid is the mean of ``points``.
    """
    points = np.asarray(points, dtype=float)
    centers = np.asarray(centers, dtype=np.int64)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    expected = 8 + (0 if in_feats is None else in_feats.shape[1])
    if filt.in_width != expected:
        raise ValueError(f"filter expects input width {filt.in_width}, features give {expected}")
    centroid = points.mean(axis=0)
    return correlate_at(points, in_feats, points[centers], filt, cfg, rng, centroid)


def set_abstraction(
    points: np.ndarray,
    in_feats: np.ndarray | None,
    m: int,
    filt: MlpFilter,
    cfg: SprinLayerCfg,
    rng,
) -> tuple[np.ndarray, np.ndarray]:
    """Farthest-point sample m centers, then correlate at them."""
    points = np.asarray(points, dtype=float)
    idx = farthest_point_sampling(points, m)
    feats = sparse_correlate(points, in_feats, idx, filt, cfg, rng)
    return points[idx], feats


def feature_propagation(
    up_points: np.ndarray,
    down_points: np.ndarray,
    down_feats: np.ndarray,
    filt: MlpFilter,
    cfg: SprinLayerCfg,
    rng,
) -> np.ndarray:
    """Correlate up-sampled points against the coarser featured cloud."""
    up_points = np.asarray(up_points, dtype=float)
    down_points = np.asarray(down_points, dtype=float)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    centroid = down_points.mean(axis=0)
    return correlate_at(down_points, down_feats, up_points, filt, cfg, rng, centroid)
