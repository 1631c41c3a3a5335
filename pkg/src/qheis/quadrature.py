"""Tensor-product quadrature over truncation boxes.

Gauss-Legendre is the default rule; a uniform trapezoid rule is kept as a
cross-check.  Integrands are evaluated in chunks so that high-dimensional
tensor grids (up to 6-dim here) never materialize at once.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .core import QuadratureSpec, TruncationBox

__all__ = [
    "axis_rule",
    "tensor_blocks",
    "integrate",
    "inner",
    "norm_l2",
    "grid_axes",
]

GAUSS = "gauss-legendre"
TRAPEZOID = "trapezoid"

# Upper bound on points per evaluation chunk; keeps peak memory of the
# broadcast integrand arrays in the low hundreds of MB.
CHUNK = 1 << 21


@lru_cache(maxsize=256)
def _leggauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def axis_rule(lo: float, hi: float, m: int, rule: str = GAUSS):
    """Nodes and weights for one axis on [lo, hi]."""
    if hi <= lo:
        raise ValueError("empty interval")
    if rule == GAUSS:
        t, w = _leggauss(m)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        return mid + half * t, half * w
    if rule == TRAPEZOID:
        x = np.linspace(lo, hi, m)
        w = np.full(m, (hi - lo) / (m - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return x, w
    raise ValueError(f"unknown quadrature rule {rule!r}")


def grid_axes(
    intervals: Sequence[tuple[float, float]],
    nodes: Sequence[int],
    rule: str = GAUSS,
) -> list[tuple[np.ndarray, np.ndarray]]:
    if len(intervals) != len(nodes):
        raise ValueError("one node count per interval required")
    return [axis_rule(lo, hi, m, rule) for (lo, hi), m in zip(intervals, nodes)]


def tensor_blocks(
    axes: Sequence[tuple[np.ndarray, np.ndarray]],
    chunk: int = CHUNK,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (points (M, D), weights (M,)) blocks of the tensor-product grid."""
    sizes = [len(x) for x, _ in axes]
    total = int(np.prod(sizes))
    dim = len(axes)
    # Find how many leading axes must be iterated so the rest fits in a chunk.
    lead = 0
    rest = total
    while rest > chunk and lead < dim - 1:
        rest //= sizes[lead]
        lead += 1
    tail_axes = axes[lead:]
    tail_pts = np.stack(
        [g.ravel() for g in np.meshgrid(*[x for x, _ in tail_axes], indexing="ij")],
        axis=-1,
    )
    tail_w = np.ones(1)
    for _, w in tail_axes:
        tail_w = np.multiply.outer(tail_w, w)
    tail_w = tail_w.ravel()
    m = tail_pts.shape[0]
    if lead == 0:
        yield tail_pts, tail_w
        return
    lead_sizes = sizes[:lead]
    for flat in range(int(np.prod(lead_sizes))):
        idx = np.unravel_index(flat, lead_sizes)
        head = np.array([axes[d][0][idx[d]] for d in range(lead)])
        head_w = float(np.prod([axes[d][1][idx[d]] for d in range(lead)]))
        pts = np.empty((m, dim))
        pts[:, :lead] = head
        pts[:, lead:] = tail_pts
        yield pts, head_w * tail_w


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    intervals: Sequence[tuple[float, float]],
    nodes: Sequence[int],
    rule: str = GAUSS,
) -> complex:
    """Tensor-product quadrature of ``f`` (callable or field-like) over a box."""
    fn = f.eval if hasattr(f, "eval") else f
    axes = grid_axes(intervals, nodes, rule)
    total = 0.0 + 0.0j
    for pts, w in tensor_blocks(axes):
        total += np.sum(w * np.asarray(fn(pts)))
    return complex(total)


def inner(
    f,
    g,
    intervals: Sequence[tuple[float, float]],
    nodes: Sequence[int],
    rule: str = GAUSS,
) -> complex:
    """L2 inner product <f, g> = integral of f * conj(g), conjugate-linear in g."""
    fe = f.eval if hasattr(f, "eval") else f
    ge = g.eval if hasattr(g, "eval") else g
    axes = grid_axes(intervals, nodes, rule)
    total = 0.0 + 0.0j
    for pts, w in tensor_blocks(axes):
        total += np.sum(w * np.asarray(fe(pts)) * np.conj(np.asarray(ge(pts))))
    return complex(total)


def norm_l2(f, intervals, nodes, rule: str = GAUSS) -> float:
    value = inner(f, f, intervals, nodes, rule)
    return float(np.sqrt(max(value.real, 0.0)))


def default_nodes(spec: QuadratureSpec, n: int, legs: int = 1) -> tuple[int, ...]:
    return spec.nodes_for_leg(n) * legs


def box_quadrature(
    box: TruncationBox, spec: QuadratureSpec, n: int, legs: int = 1
) -> tuple[tuple[tuple[float, float], ...], tuple[int, ...]]:
    """(intervals, nodes) pair covering ``legs`` copies of the box."""
    return box.intervals(n, legs), default_nodes(spec, n, legs)
