"""Fourier transforms along the r axis and over a whole leg.

Transforms are quadrature-backed: the integral over the source support is
evaluated with a Gauss-Legendre rule, so the transform of a field is again a
field that can be evaluated anywhere.  Sign convention: ``sign=-1`` applies
exp(-2*pi*i t rho) (the forward direction used throughout), ``sign=+1`` the
inverse; the pair is unitary with plain Lebesgue measure on both sides.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import TWO_PI
from .fields import LazyField, SampledField, Support
from .quadrature import GAUSS, axis_rule

__all__ = [
    "partial_fourier_r",
    "full_fourier",
    "full_fourier_sampled",
    "fourier_xy_sampled",
]

# Cap on source evaluations per vectorized block.
_BLOCK = 1 << 21


def partial_fourier_r(
    src,
    dual_half_width: float,
    sign: float = -1.0,
    nodes: int = 64,
    rule: str = GAUSS,
):
    """Fourier transform in the last (r) coordinate of a one-leg field."""
    if src.legs != 1:
        raise ValueError("partial transform defined on one-leg fields")
    lo, hi = src.support.intervals(1.05)[-1]
    t, w = axis_rule(lo, hi, nodes, rule)
    m = len(t)
    width = src.params.width

    def fn(pts: np.ndarray) -> np.ndarray:
        flat = pts.reshape(-1, width)
        out = np.empty(flat.shape[0], dtype=complex)
        step = max(1, _BLOCK // m)
        for a in range(0, flat.shape[0], step):
            blk = flat[a : a + step]
            args = np.repeat(blk[:, None, :], m, axis=1)
            args[:, :, -1] = t
            vals = src.eval(args.reshape(-1, width)).reshape(len(blk), m)
            phases = np.exp(sign * TWO_PI * 1j * np.outer(blk[:, -1], t))
            out[a : a + step] = (vals * phases) @ w
        return out.reshape(pts.shape[:-1])

    sup = Support(
        src.support.lo[:-1] + (-dual_half_width,),
        src.support.hi[:-1] + (dual_half_width,),
    )
    return LazyField(src.params, 1, fn, sup)


def _grid_values(src, axes_nodes: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Weighted sample tensor w_1...w_D * f on a tensor grid."""
    xs = [t for t, _ in axes_nodes]
    if hasattr(src, "eval_grid"):
        vals = src.eval_grid(xs)
    else:
        mesh = np.meshgrid(*xs, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        vals = src.eval(pts).reshape([len(x) for x in xs])
    for d, (_, w) in enumerate(axes_nodes):
        shape = [1] * vals.ndim
        shape[d] = len(w)
        vals = vals * w.reshape(shape)
    return vals


def full_fourier(
    src,
    dual_half_widths: Sequence[float],
    sign: float = -1.0,
    nodes: Sequence[int] | int = 48,
    rule: str = GAUSS,
):
    """Fourier transform in every coordinate of a one-leg field."""
    if src.legs != 1:
        raise ValueError("full transform defined on one-leg fields")
    width = src.params.width
    if isinstance(nodes, int):
        nodes = (nodes,) * width
    iv = src.support.intervals(1.05)
    axes_nodes = [axis_rule(lo, hi, m, rule) for (lo, hi), m in zip(iv, nodes)]
    weighted = _grid_values(src, axes_nodes)

    def fn(pts: np.ndarray) -> np.ndarray:
        flat = pts.reshape(-1, width)
        out = np.empty(flat.shape[0], dtype=complex)
        step = max(1, (1 << 17) // max(np.prod(weighted.shape[1:]), 1))
        for a in range(0, flat.shape[0], step):
            blk = flat[a : a + step]
            # Contract one source axis at a time against this block's phases.
            acc = np.exp(
                sign * TWO_PI * 1j * np.outer(blk[:, 0], axes_nodes[0][0])
            ) @ weighted.reshape(weighted.shape[0], -1)
            acc = acc.reshape((len(blk),) + weighted.shape[1:])
            for d in range(1, width):
                ph = np.exp(sign * TWO_PI * 1j * blk[:, d, None] * axes_nodes[d][0])
                acc = np.einsum("ij,ij...->i...", ph, acc)
            out[a : a + step] = acc
        return out.reshape(pts.shape[:-1])

    sup = Support(
        tuple(-h for h in dual_half_widths), tuple(float(h) for h in dual_half_widths)
    )
    return LazyField(src.params, 1, fn, sup)


def fourier_xy_sampled(
    src,
    momentum_axes: Sequence[np.ndarray],
    sign: float = -1.0,
    nodes: int = 48,
    r_nodes: int = 64,
    rule: str = GAUSS,
) -> SampledField:
    """Transform the x/y coordinates only, keeping r; sampled on a grid.

    The r axis of the result is the uniform sampling grid itself, so the
    source is evaluated there directly rather than through quadrature.
    """
    params = src.params
    n = params.n
    if src.legs != 1:
        raise ValueError("x/y transform defined on one-leg fields")
    iv = src.support.intervals(1.05)
    xy_nodes = [axis_rule(lo, hi, nodes, rule) for lo, hi in iv[: 2 * n]]
    lo_r, hi_r = iv[2 * n]
    r_axis = np.linspace(lo_r, hi_r, r_nodes)
    acc = _grid_values(src, xy_nodes + [(r_axis, np.ones(r_nodes))])
    for d in range(2 * n):
        ph = np.exp(
            sign * TWO_PI * 1j * np.outer(momentum_axes[d], xy_nodes[d][0])
        )
        acc = np.moveaxis(np.tensordot(ph, acc, axes=([1], [d])), 0, d)
    axes = [np.asarray(a, dtype=float) for a in momentum_axes] + [r_axis]
    sup = Support(
        tuple(float(a[0]) for a in axes), tuple(float(a[-1]) for a in axes)
    )
    return SampledField(params, 1, axes, acc, sup)


def full_fourier_sampled(
    src,
    dual_axes: Sequence[np.ndarray],
    sign: float = -1.0,
    nodes: Sequence[int] | int = 48,
    rule: str = GAUSS,
) -> SampledField:
    """Full transform materialized on a uniform dual grid for cheap reuse."""
    width = src.params.width
    if isinstance(nodes, int):
        nodes = (nodes,) * width
    iv = src.support.intervals(1.05)
    axes_nodes = [axis_rule(lo, hi, m, rule) for (lo, hi), m in zip(iv, nodes)]
    acc = _grid_values(src, axes_nodes)
    for d in range(width):
        ph = np.exp(sign * TWO_PI * 1j * np.outer(dual_axes[d], axes_nodes[d][0]))
        acc = np.moveaxis(np.tensordot(ph, acc, axes=([1], [d])), 0, d)
    sup = Support(
        tuple(float(a[0]) for a in dual_axes), tuple(float(a[-1]) for a in dual_axes)
    )
    return SampledField(src.params, 1, dual_axes, acc, sup)
