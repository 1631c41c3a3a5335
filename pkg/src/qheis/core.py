"""Shared numerical substrate: deformation constants, phase helpers, boxes.

Conventions used throughout the package:

* A point of the base space is (x, y, r) with x, y in R^n and r in R, stored as
  a flat coordinate row [x_1..x_n, y_1..y_n, r].  Multi-leg points concatenate
  one such row per leg, so a k-leg point has k*(2n+1) coordinates.
* e(t) = exp(2*pi*i*t); the conjugate phase is written ebar(t) = e(-t).
* eta(lam, r) = (e^{2*lam*r} - 1) / (2*lam), with eta(0, r) = r.  This is the
  phase rate that twists every convolution below.
* beta(u, v) is the Euclidean inner product on R^n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

__all__ = [
    "DeformationParams",
    "TruncationBox",
    "QuadratureSpec",
    "SupportOverflow",
    "eta",
    "e_phase",
    "beta",
    "leg_width",
    "split_leg",
    "replace_leg",
]


class SupportOverflow(Exception):
    """Raised when a field's effective support escapes its integration box."""


@dataclass(frozen=True)
class DeformationParams:
    """Deformation constant and block dimension shared by every formula.

    lam may be any real number including 0 (the classical group case); x and y
    each live in R^n.  One instance is created per session and threaded through
    all operations.
    """

    lam: float = 0.0
    n: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("block dimension n must be >= 1")

    @property
    def width(self) -> int:
        return 2 * self.n + 1


@dataclass(frozen=True)
class TruncationBox:
    """Coordinate truncation for quadrature and sampling.

    Test functions are generated so that their effective support (where |f|
    exceeds a declared floor), inflated by the worst coordinate scaling
    e^{|lam| * r} the formulas can apply to it, stays inside the box divided by
    ``support_inflation``.
    """

    half_width_x: float = 6.0
    half_width_y: float = 6.0
    half_width_r: float = 4.0
    support_inflation: float = 1.1

    def __post_init__(self) -> None:
        if min(self.half_width_x, self.half_width_y, self.half_width_r) <= 0:
            raise ValueError("half widths must be positive")
        if self.support_inflation < 1.0:
            raise ValueError("support_inflation must be >= 1")

    def intervals(self, n: int, legs: int = 1) -> tuple[tuple[float, float], ...]:
        """Per-coordinate integration intervals for ``legs`` copies of the box."""
        leg = (
            [(-self.half_width_x, self.half_width_x)] * n
            + [(-self.half_width_y, self.half_width_y)] * n
            + [(-self.half_width_r, self.half_width_r)]
        )
        return tuple(leg * legs)


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor-product quadrature settings.

    ``nodes_xy`` is the base node count for each x or y axis, ``nodes_r`` for
    each r axis.  Refinement level k doubles both k times.
    """

    nodes_xy: int = 28
    nodes_r: int = 48
    rule: str = "gauss-legendre"
    refinement_levels: int = 3

    def __post_init__(self) -> None:
        if min(self.nodes_xy, self.nodes_r) < 4:
            raise ValueError("nodes per axis must be >= 4")
        if self.rule not in ("gauss-legendre", "trapezoid"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")

    def at_level(self, level: int) -> "QuadratureSpec":
        """Spec with nodes doubled ``level`` times (level 0 is the default)."""
        factor = 2**level
        return QuadratureSpec(
            nodes_xy=self.nodes_xy * factor,
            nodes_r=self.nodes_r * factor,
            rule=self.rule,
            refinement_levels=self.refinement_levels,
        )

    def nodes_for_leg(self, n: int) -> tuple[int, ...]:
        return (self.nodes_xy,) * (2 * n) + (self.nodes_r,)


def eta(params: DeformationParams, r):
    """Phase rate eta(r) = (e^{2*lam*r} - 1) / (2*lam); r itself when lam = 0.

    Evaluated through expm1, which is free of cancellation for small lam*r and
    makes eta continuous in lam at 0 to machine precision.
    """
    r = np.asarray(r, dtype=float)
    lam = params.lam
    if lam == 0.0:
        return r + 0.0
    return np.expm1(2.0 * lam * r) / (2.0 * lam)


def e_phase(t):
    """Unit phase e(t) = exp(2*pi*i*t)."""
    return np.exp(1j * TWO_PI * np.asarray(t))


def beta(u, v):
    """Euclidean inner product on R^n along the last axis."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError(f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    return np.sum(u * v, axis=-1)


def leg_width(n: int) -> int:
    return 2 * n + 1


def split_leg(pts: np.ndarray, n: int, leg: int = 0):
    """Views (x, y, r) of one leg of a point array of shape (N, k*(2n+1))."""
    base = leg * leg_width(n)
    x = pts[:, base : base + n]
    y = pts[:, base + n : base + 2 * n]
    r = pts[:, base + 2 * n]
    return x, y, r


def replace_leg(pts: np.ndarray, n: int, leg: int, x, y, r) -> np.ndarray:
    """Copy of ``pts`` with one leg's coordinates replaced (broadcastable)."""
    out = np.array(pts, copy=True)
    base = leg * leg_width(n)
    out[..., base : base + n] = x
    out[..., base + n : base + 2 * n] = y
    out[..., base + 2 * n] = r
    return out
