"""Real spherical harmonics and exact quadrature on the offset equal-angle grid.

Grid conventions at bandwidth B (shared by the voxelizer, the rotation-group
signals, and the resampler):

* ``alpha_i = pi * i / B``            for i in [0, 2B)
* ``beta_j  = pi * (2j + 1) / (4B)``  for j in [0, 2B)   (offset, pole-free)
* ``gamma_k = 2*pi * k / (2B)``       for k in [0, 2B)
* ``h_k     = k / (2B)``              for k in [0, 2B)

The beta weights returned by :func:`beta_weights` integrate ``f(beta) *
sin(beta)`` exactly for trigonometric polynomials of degree < 2B, which is
what makes analysis/synthesis on this grid an exact round trip for
band-limited signals.

The real basis is orthonormal: ``Y_{l,0}`` is the zonal harmonic, and for
m > 0 the pair ``(Y_{l,m}, Y_{l,-m})`` carries ``sqrt(2) * P~_l^m(cos beta) *
(cos(m alpha), sin(m alpha))`` with the Condon-Shortley sign kept in the
Legendre recursion.  Coefficients are stored flat with ``index(l, m) =
l*l + l + m``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_LEGENDRE_CHUNK = 65536


def alpha_nodes(B: int) -> np.ndarray:
    return np.pi * np.arange(2 * B) / B


def beta_nodes(B: int) -> np.ndarray:
    return np.pi * (2 * np.arange(2 * B) + 1) / (4 * B)


def gamma_nodes(B: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(2 * B) / (2 * B)


def h_nodes(B: int) -> np.ndarray:
    return np.arange(2 * B) / (2 * B)


def n_coeffs(L: int) -> int:
    return (L + 1) * (L + 1)


def coeff_index(l: int, m: int) -> int:
    return l * l + l + m


@lru_cache(maxsize=None)
def _beta_weights_cached(B: int) -> np.ndarray:
    bj = beta_nodes(B)
    k = np.arange(B)
    terms = np.sin((2 * k[None, :] + 1) * bj[:, None]) / (2 * k[None, :] + 1)
    w = (2.0 / B) * np.sin(bj) * terms.sum(axis=1)
    w.setflags(write=False)
    return w


def beta_weights(B: int) -> np.ndarray:
    """Quadrature weights on ``beta_nodes(B)``; total mass 2 = int sin(beta)."""
    return _beta_weights_cached(B)


def grid_area_weights(B: int) -> np.ndarray:
    """Full S^2 quadrature weights, shape (2B, 2B) over (alpha, beta); mass 4*pi."""
    return np.broadcast_to(beta_weights(B)[None, :] * (np.pi / B), (2 * B, 2 * B))


def legendre_normalized(L: int, x: np.ndarray, s: np.ndarray | None = None) -> np.ndarray:
    """Fully normalized associated Legendre values, shape ``(L+1, L+1, *x.shape)``.

    Entry ``[l, m]`` holds ``P~_l^m(x)`` such that ``Y_{l,0} = P~_l^0`` and the
    non-zonal real harmonics are ``sqrt(2) * P~_l^m * cos/sin(m alpha)``.
    ``s`` overrides ``sqrt(1 - x^2)`` when the caller has a more accurate
    value (unit vectors near the poles).
    """
    x = np.asarray(x, dtype=float)
    if s is None:
        s = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    P = np.zeros((L + 1, L + 1) + x.shape)
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, L + 1):
        P[m, m] = -np.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(L):
        P[m + 1, m] = np.sqrt(2 * m + 3.0) * x * P[m, m]
    for m in range(L + 1):
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def sh_basis(L: int, beta: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Real SH basis matrix, shape ``(*pts, (L+1)^2)``.

    Evaluation is chunked so the intermediate Legendre table stays small for
    large point batches.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    alpha = np.asarray(alpha, dtype=float).ravel()
    npts = beta.size
    out = np.empty((npts, n_coeffs(L)))
    for lo in range(0, npts, _LEGENDRE_CHUNK):
        hi = min(npts, lo + _LEGENDRE_CHUNK)
        P = legendre_normalized(L, np.cos(beta[lo:hi]))
        a = alpha[lo:hi]
        for l in range(L + 1):
            out[lo:hi, coeff_index(l, 0)] = P[l, 0]
            for m in range(1, l + 1):
                pm = np.sqrt(2.0) * P[l, m]
                out[lo:hi, coeff_index(l, m)] = pm * np.cos(m * a)
                out[lo:hi, coeff_index(l, -m)] = pm * np.sin(m * a)
    return out


def sh_basis_dirs(L: int, dirs: np.ndarray) -> np.ndarray:
    """Real SH basis at unit vectors ``dirs`` of shape ``(N, 3)``.

    Avoids transcendental calls: ``cos(beta)`` is the z component and the
    azimuthal factors follow the angle-addition recurrence from the first
    harmonic.  On the poles the azimuth defaults to 0, where the associated
    Legendre factors vanish for m > 0 anyway.
    """
    dirs = np.asarray(dirs, dtype=float)
    npts = dirs.shape[0]
    out = np.empty((npts, n_coeffs(L)))
    root2 = np.sqrt(2.0)
    for lo in range(0, npts, _LEGENDRE_CHUNK):
        hi = min(npts, lo + _LEGENDRE_CHUNK)
        x, y, z = dirs[lo:hi, 0], dirs[lo:hi, 1], dirs[lo:hi, 2]
        rho = np.sqrt(x * x + y * y)
        safe = np.maximum(rho, np.finfo(float).tiny)
        c1 = np.where(rho > 0.0, x / safe, 1.0)
        s1 = np.where(rho > 0.0, y / safe, 0.0)
        P = legendre_normalized(L, np.clip(z, -1.0, 1.0), s=rho)
        buf = np.empty((n_coeffs(L), hi - lo))  # coeff-major for contiguous writes
        for l in range(L + 1):
            buf[coeff_index(l, 0)] = P[l, 0]
        cm, sm = c1, s1
        for m in range(1, L + 1):
            for l in range(m, L + 1):
                pm = root2 * P[l, m]
                np.multiply(pm, cm, out=buf[coeff_index(l, m)])
                np.multiply(pm, sm, out=buf[coeff_index(l, -m)])
            cm, sm = cm * c1 - sm * s1, sm * c1 + cm * s1
        out[lo:hi] = buf.T
    return out


def sh_eval_dirs(coeffs: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Evaluate coefficients at unit vectors ``(N, 3)``.

    Fuses the Legendre recursion with the coefficient contraction so no
    basis matrix is materialized; this is the hot path of the brute-force
    group correlation.
    """
    c = np.asarray(coeffs, dtype=float)
    L = int(round(np.sqrt(c.shape[0]))) - 1
    if n_coeffs(L) != c.shape[0]:
        raise ValueError(f"coefficient count {c.shape[0]} is not a perfect square")
    dirs = np.asarray(dirs, dtype=float)
    cmat = c.reshape(c.shape[0], -1)
    n_chan = cmat.shape[1]
    vals = np.empty((dirs.shape[0], n_chan))
    root2 = np.sqrt(2.0)
    for lo in range(0, dirs.shape[0], _LEGENDRE_CHUNK):
        hi = min(dirs.shape[0], lo + _LEGENDRE_CHUNK)
        x, y, z = dirs[lo:hi, 0], dirs[lo:hi, 1], dirs[lo:hi, 2]
        z = np.clip(z, -1.0, 1.0)
        # for unit vectors sin(beta) is hypot(x, y), which stays accurate
        # near the poles where sqrt(1 - z^2) cancels
        s = np.sqrt(x * x + y * y)
        safe = np.maximum(s, np.finfo(float).tiny)
        c1 = np.where(s > 0.0, x / safe, 1.0)
        s1 = np.where(s > 0.0, y / safe, 0.0)
        acc = np.zeros((hi - lo, n_chan))
        sect = np.full(hi - lo, 1.0 / np.sqrt(4.0 * np.pi))  # P~_m^m climbing in m
        cm = np.ones(hi - lo)
        sm = np.zeros(hi - lo)

        def _add(l, m, p):
            if m == 0:
                acc[...] += p[:, None] * cmat[coeff_index(l, 0)]
            else:
                t = root2 * p
                acc[...] += (t * cm)[:, None] * cmat[coeff_index(l, m)]
                acc[...] += (t * sm)[:, None] * cmat[coeff_index(l, -m)]

        for m in range(L + 1):
            if m > 0:
                sect = -np.sqrt((2 * m + 1) / (2.0 * m)) * s * sect
                cm, sm = cm * c1 - sm * s1, sm * c1 + cm * s1
            p_prev = sect
            _add(m, m, p_prev)
            if m + 1 <= L:
                p_cur = np.sqrt(2 * m + 3.0) * z * p_prev
                _add(m + 1, m, p_cur)
                for l in range(m + 2, L + 1):
                    a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                    b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                    p_next = a * (z * p_cur - b * p_prev)
                    _add(l, m, p_next)
                    p_prev, p_cur = p_cur, p_next
        vals[lo:hi] = acc
    return vals.reshape((dirs.shape[0],) + c.shape[1:])


@lru_cache(maxsize=None)
def _grid_basis_cached(B: int, L: int) -> np.ndarray:
    ai = alpha_nodes(B)
    bj = beta_nodes(B)
    AA, BB = np.meshgrid(ai, bj, indexing="ij")
    Y = sh_basis(L, BB.ravel(), AA.ravel())
    Y.setflags(write=False)
    return Y


def grid_basis(B: int, L: int) -> np.ndarray:
    """Basis at the (alpha, beta) grid nodes, shape ``(4B^2, (L+1)^2)``."""
    return _grid_basis_cached(B, int(L))


def sh_analysis(values: np.ndarray, B: int, L: int) -> np.ndarray:
    """Grid values ``(2B, 2B, ...)`` to coefficients ``((L+1)^2, ...)``.

    Exact for signals band-limited to degree <= min(L, B-1).
    """
    if L >= B:
        raise ValueError(f"degree cutoff L={L} must be < bandwidth B={B}")
    v = np.asarray(values, dtype=float)
    lead = v.shape[2:]
    flat = v.reshape(4 * B * B, -1)
    w = grid_area_weights(B).reshape(-1, 1)
    coeffs = grid_basis(B, L).T @ (w * flat)
    return coeffs.reshape((n_coeffs(L),) + lead)


def sh_synthesis(coeffs: np.ndarray, B: int) -> np.ndarray:
    """Coefficients ``((L+1)^2, ...)`` to grid values ``(2B, 2B, ...)``."""
    c = np.asarray(coeffs, dtype=float)
    L = int(round(np.sqrt(c.shape[0]))) - 1
    if n_coeffs(L) != c.shape[0]:
        raise ValueError(f"coefficient count {c.shape[0]} is not a perfect square")
    if L >= B:
        raise ValueError(f"degree cutoff L={L} must be < bandwidth B={B}")
    lead = c.shape[1:]
    flat = grid_basis(B, L) @ c.reshape(c.shape[0], -1)
    return flat.reshape((2 * B, 2 * B) + lead)


def sh_eval(coeffs: np.ndarray, beta: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Evaluate a coefficient vector ``((L+1)^2, ...)`` at arbitrary points."""
    c = np.asarray(coeffs, dtype=float)
    L = int(round(np.sqrt(c.shape[0]))) - 1
    if n_coeffs(L) != c.shape[0]:
        raise ValueError(f"coefficient count {c.shape[0]} is not a perfect square")
    beta = np.asarray(beta, dtype=float)
    bflat = beta.ravel()
    aflat = np.asarray(alpha, dtype=float).ravel()
    lead = c.shape[1:]
    cmat = c.reshape(c.shape[0], -1)
    vals = np.empty((bflat.size, cmat.shape[1]))
    for lo in range(0, bflat.size, _LEGENDRE_CHUNK):
        hi = min(bflat.size, lo + _LEGENDRE_CHUNK)
        vals[lo:hi] = sh_basis(L, bflat[lo:hi], aflat[lo:hi]) @ cmat
    return vals.reshape(beta.shape + lead)
