"""Hand-checked reference routes used to pin expected test values.

Everything here prefers transparency over speed: adaptive quadrature
through mpmath, dense matrix truncations, and small closed forms worked
out on paper.  None of it shares code with the package's fast paths, so
agreement between the two is evidence, not tautology.
"""

from __future__ import annotations

import numpy as np
import mpmath as mp

mp.mp.dps = 30


def complex_quad(fn, lo, hi):
    """Adaptive quadrature of a complex-valued integrand on [lo, hi]."""
    re = mp.quad(lambda t: mp.re(fn(t)), [lo, hi])
    im = mp.quad(lambda t: mp.im(fn(t)), [lo, hi])
    return complex(re) + 1j * complex(im)


def gauss_axis(center, sigma, momentum):
    """exp(-(t-c)^2 / (2 s^2) + 2 pi i k t) as an mpmath callable."""
    c, s, k = mp.mpf(center), mp.mpf(sigma), mp.mpf(momentum)

    def fn(t):
        return mp.e ** (-((t - c) ** 2) / (2 * s**2) + 2j * mp.pi * k * t)

    return fn


def axis_overlap(axis1, axis2):
    """Integral of axis1 * conj(axis2) over the line, clipped at 14 sigma."""
    (c1, s1, k1), (c2, s2, k2) = axis1, axis2
    f1 = gauss_axis(c1, s1, k1)
    f2 = gauss_axis(c2, s2, -k2)
    lo = min(c1 - 14 * s1, c2 - 14 * s2)
    hi = max(c1 + 14 * s1, c2 + 14 * s2)
    return complex_quad(lambda t: f1(t) * f2(t), lo, hi)


def packet_axes(p):
    """Per-axis (center, sigma, momentum) triples of a separable packet."""
    return [
        (float(p.center[d]), float(p.sigma[d]), float(p.momentum[d]))
        for d in range(len(p.center))
    ]


def packet_overlap(p, q):
    """<p, q> with q conjugated, one adaptive quadrature per axis."""
    total = complex(p.amp) * np.conj(complex(q.amp))
    for a1, a2 in zip(packet_axes(p), packet_axes(q)):
        total *= axis_overlap(a1, a2)
    return total


def fourier_axis_value(center, sigma, momentum, z, sign=-1.0):
    """One-axis transform integral at dual coordinate z.

    Integrand exp(-(t-c)^2/(2 s^2)) e^{2 pi i k t} e^{sign 2 pi i z t};
    the closed form is s sqrt(2 pi) exp(-2 pi^2 s^2 (z + sign k)^2 ...)
    but this route just integrates adaptively.
    """
    f = gauss_axis(center, sigma, momentum)

    def fn(t):
        return f(t) * mp.e ** (sign * 2j * mp.pi * mp.mpf(z) * t)

    return complex_quad(fn, center - 14 * sigma, center + 14 * sigma)


def legendre_axis(lo, hi, m):
    """Gauss-Legendre nodes and weights mapped onto [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(int(m))
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def matrix_hs_norm_sq(kernel, row_axes, col_axes):
    """Squared Hilbert-Schmidt norm of a kernel by dense matrix truncation.

    Materializes the operator matrix M[i, j] = sqrt(w_i) K(row_i, col_j)
    sqrt(w_j) on tensor Gauss-Legendre grids and returns its squared
    Frobenius norm.  Independent of any factorized or skeletonized sum.
    """
    row_grids = [legendre_axis(lo, hi, m) for lo, hi, m in row_axes]
    col_grids = [legendre_axis(lo, hi, m) for lo, hi, m in col_axes]
    row_pts = np.stack(
        [g.ravel() for g in np.meshgrid(*[x for x, _ in row_grids], indexing="ij")],
        axis=-1,
    )
    col_pts = np.stack(
        [g.ravel() for g in np.meshgrid(*[x for x, _ in col_grids], indexing="ij")],
        axis=-1,
    )
    row_w = np.ones(1)
    for _, w in row_grids:
        row_w = np.kron(row_w, w)
    col_w = np.ones(1)
    for _, w in col_grids:
        col_w = np.kron(col_w, w)
    pairs = np.concatenate(
        [
            np.repeat(row_pts, len(col_pts), axis=0),
            np.tile(col_pts, (len(row_pts), 1)),
        ],
        axis=-1,
    )
    mat = kernel(pairs).reshape(len(row_pts), len(col_pts))
    mat = np.sqrt(row_w)[:, None] * mat * np.sqrt(col_w)[None, :]
    return float(np.linalg.norm(mat, "fro") ** 2)


def heisenberg_product(u, v, beta_sign=1.0):
    """Group law (x, y, z)(x', y', z') = (x+x', y+y', z+z'+x.y')."""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    n = (u.shape[-1] - 1) // 2
    out = u + v
    out[..., 2 * n] += beta_sign * np.sum(u[..., :n] * v[..., n : 2 * n], axis=-1)
    return out


def heisenberg_inverse(u):
    """Inverse (-x, -y, -z + x.y) for the group law above."""
    u = np.asarray(u, dtype=float)
    n = (u.shape[-1] - 1) // 2
    out = -u
    out[..., 2 * n] += np.sum(u[..., :n] * u[..., n : 2 * n], axis=-1)
    return out


def eta_reference(lam, r):
    """Deformation rate function via expm1, good near lam = 0 too."""
    if lam == 0.0:
        return mp.mpf(r)
    return mp.expm1(2 * mp.mpf(lam) * mp.mpf(r)) / (2 * mp.mpf(lam))
