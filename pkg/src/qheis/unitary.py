"""The fundamental unitary on two legs and the pentagon identity.

The operator is a weighted composition: a point map that shears the second
leg against a scaled first leg, and a phase-times-power weight whose squared
modulus equals the Jacobian of the point map, which is the whole unitarity
story in one line.
"""

from __future__ import annotations

import numpy as np

from .core import DeformationParams, TruncationBox, eta, leg_width, split_leg
from .fields import Support
from .hilbert import WeightedCompositionOp, embed_wc, probe_points, wc_residual

__all__ = [
    "fundamental_unitary",
    "pentagon_check",
    "pentagon_residuals",
    "PENTAGON_VARIANTS",
]


def _interval_pair(lo: float, hi: float, lam: float) -> tuple[float, float]:
    """Range of exp(lam * t) for t in [lo, hi]."""
    a, b = np.exp(lam * lo), np.exp(lam * hi)
    return (min(a, b), max(a, b))


def fundamental_unitary(params: DeformationParams) -> WeightedCompositionOp:
    """Two-leg fundamental unitary as a weighted composition operator."""
    lam, n = params.lam, params.n
    w = leg_width(n)

    def point_map(pts: np.ndarray) -> np.ndarray:
        x, y, r = split_leg(pts, n, 0)
        xp, yp, rp = split_leg(pts, n, 1)
        s = np.exp(-lam * rp)[..., None]
        out = np.empty_like(pts)
        out[..., 0:n] = s * x
        out[..., n : 2 * n] = s * y
        out[..., 2 * n] = r + rp
        out[..., w : w + n] = xp - s * x
        out[..., w + n : w + 2 * n] = yp - s * y
        out[..., w + 2 * n] = rp
        return out

    def inv_point_map(pts: np.ndarray) -> np.ndarray:
        X, Y, R = split_leg(pts, n, 0)
        Xp, Yp, Rp = split_leg(pts, n, 1)
        g = np.exp(lam * Rp)[..., None]
        out = np.empty_like(pts)
        out[..., 0:n] = g * X
        out[..., n : 2 * n] = g * Y
        out[..., 2 * n] = R - Rp
        out[..., w : w + n] = Xp + X
        out[..., w + n : w + 2 * n] = Yp + Y
        out[..., w + 2 * n] = Rp
        return out

    def weight_parts(pts: np.ndarray):
        x, y, _ = split_leg(pts, n, 0)
        _, yp, rp = split_leg(pts, n, 1)
        s = np.exp(-lam * rp)
        sx = s[..., None] * x
        cycles = -eta(params, rp) * np.sum(sx * (yp - s[..., None] * y), axis=-1)
        return -n * lam * rp, cycles

    def jacobian(pts: np.ndarray) -> np.ndarray:
        rp = pts[..., 2 * w - 1]
        return np.exp(-2.0 * n * lam * rp)

    def support_map(s: Support) -> Support:
        # Image of the support under the inverse point map.
        xy = range(0, 2 * n)
        r_lo, r_hi = s.lo[2 * n], s.hi[2 * n]
        rp_lo, rp_hi = s.lo[2 * w - 1], s.hi[2 * w - 1]
        f_lo, f_hi = _interval_pair(rp_lo, rp_hi, lam)
        leg1 = s.leg(0, n).scaled(f_lo, f_hi, xy)
        lo = list(leg1.lo)
        hi = list(leg1.hi)
        lo[2 * n] = r_lo - rp_hi
        hi[2 * n] = r_hi - rp_lo
        for d in range(2 * n):
            lo.append(s.lo[w + d] + s.lo[d])
            hi.append(s.hi[w + d] + s.hi[d])
        lo.append(rp_lo)
        hi.append(rp_hi)
        return Support(tuple(lo), tuple(hi))

    def inv_support_map(s: Support) -> Support:
        # Image of the support under the forward point map.
        xy = range(0, 2 * n)
        r_lo, r_hi = s.lo[2 * n], s.hi[2 * n]
        rp_lo, rp_hi = s.lo[2 * w - 1], s.hi[2 * w - 1]
        f_lo, f_hi = _interval_pair(rp_lo, rp_hi, -lam)
        leg1 = s.leg(0, n).scaled(f_lo, f_hi, xy)
        lo = list(leg1.lo)
        hi = list(leg1.hi)
        lo[2 * n] = r_lo + rp_lo
        hi[2 * n] = r_hi + rp_hi
        for d in range(2 * n):
            lo.append(s.lo[w + d] - leg1.hi[d])
            hi.append(s.hi[w + d] - leg1.lo[d])
        lo.append(rp_lo)
        hi.append(rp_hi)
        return Support(tuple(lo), tuple(hi))

    return WeightedCompositionOp(
        params=params,
        legs=2,
        weight_parts=weight_parts,
        point_map=point_map,
        support_map=support_map,
        inv_point_map=inv_point_map,
        inv_support_map=inv_support_map,
        jacobian=jacobian,
        label="U",
    )


def _chain(ops):
    acc = ops[0]
    for op in ops[1:]:
        acc = acc.compose(op)
    return acc


# Each entry: (name, left factor names, right factor names); "12s" means the
# adjoint of the leg-12 embedding.  All eight are algebraically equivalent to
# the pentagon identity.
PENTAGON_VARIANTS = [
    ("pentagon", ("12", "13", "23"), ("23", "12")),
    ("pull-13-left", ("13", "23"), ("12s", "23", "12")),
    ("pull-13-right", ("12", "13"), ("23", "12", "23s")),
    ("conjugated-13", ("13",), ("12s", "23", "12", "23s")),
    ("pentagon-star", ("23s", "13s", "12s"), ("12s", "23s")),
    ("pull-13-left-star", ("23s", "13s"), ("12s", "23s", "12")),
    ("pull-13-right-star", ("13s", "12s"), ("23", "12s", "23s")),
    ("conjugated-13-star", ("13s",), ("23", "12s", "23s", "12")),
]


def pentagon_residuals(
    u: WeightedCompositionOp,
    params: DeformationParams,
    box: TruncationBox,
    count: int = 10_000,
    seed: int = 0,
    include_control: bool = True,
    variants=None,
) -> dict[str, float]:
    """Probe-point pentagon residuals for any two-leg weighted composition.

    Both sides are composed exactly at the (weight, point map) level, so the
    residuals are pure floating-point noise when the identity holds.  The
    negative control scrambles the factor order and must come out large.
    """
    emb = {
        "12": embed_wc(u, (0, 1), 3),
        "13": embed_wc(u, (0, 2), 3),
        "23": embed_wc(u, (1, 2), 3),
    }
    for key in ("12", "13", "23"):
        emb[key + "s"] = emb[key].inverse()

    rng = np.random.default_rng(seed)
    pts = probe_points(rng, box.intervals(params.n, legs=3), count)

    out: dict[str, float] = {}
    for name, left, right in variants or PENTAGON_VARIANTS:
        lhs = _chain([emb[k] for k in left])
        rhs = _chain([emb[k] for k in right])
        out[name] = wc_residual(lhs, rhs, pts)
    if include_control:
        lhs = _chain([emb["12"], emb["23"], emb["13"]])
        rhs = _chain([emb["23"], emb["12"]])
        out["negative-control"] = wc_residual(lhs, rhs, pts)
    return out


def pentagon_check(
    params: DeformationParams,
    box: TruncationBox,
    count: int = 10_000,
    seed: int = 0,
    include_control: bool = True,
) -> dict[str, float]:
    """Pentagon residuals for the fundamental unitary itself."""
    return pentagon_residuals(
        fundamental_unitary(params), params, box, count, seed, include_control
    )
