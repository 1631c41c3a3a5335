"""Concrete function spaces: Gaussian packets, lazy fields, sampled fields.

Every field carries its deformation parameters, a leg count, and axis-aligned
support bounds.  Support bounds are conservative rectangles outside which the
field is numerically negligible; quadrature routines use them to tailor
integration intervals, and the truncation box uses them to reject data whose
support (after inflation) would spill past the box edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .core import (
    DeformationParams,
    SupportOverflow,
    TruncationBox,
    TWO_PI,
    leg_width,
)

__all__ = [
    "Support",
    "GaussianPacket",
    "SumField",
    "TensorField",
    "LazyField",
    "SampledField",
    "random_packet",
    "hermite_functions",
    "hermite_family",
    "packet_integral",
    "packet_inner",
    "require_in_box",
]

# Gaussian tails are declared negligible past this many standard deviations;
# the truncated relative mass is about 3e-8.
TAIL_SIGMAS = 5.5


@dataclass(frozen=True)
class Support:
    """Axis-aligned support rectangle, one (lo, hi) pair per coordinate."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi length mismatch")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError("inverted support interval")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def intervals(self, margin: float = 1.0) -> tuple[tuple[float, float], ...]:
        out = []
        for l, h in zip(self.lo, self.hi):
            c = 0.5 * (l + h)
            half = 0.5 * (h - l) * margin
            out.append((c - half, c + half))
        return tuple(out)

    def clipped(self, other: "Support") -> "Support":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        return Support(lo, tuple(max(l, h) for l, h in zip(lo, hi)))

    def union(self, other: "Support") -> "Support":
        return Support(
            tuple(min(a, b) for a, b in zip(self.lo, other.lo)),
            tuple(max(a, b) for a, b in zip(self.hi, other.hi)),
        )

    def shifted_sum(self, other: "Support") -> "Support":
        """Minkowski sum, the support of a convolution."""
        return Support(
            tuple(a + b for a, b in zip(self.lo, other.lo)),
            tuple(a + b for a, b in zip(self.hi, other.hi)),
        )

    def negated(self) -> "Support":
        return Support(tuple(-h for h in self.hi), tuple(-l for l in self.lo))

    def scaled(self, factor_lo: float, factor_hi: float, coords: Sequence[int]) -> "Support":
        """Bounds after multiplying selected coordinates by any factor in range."""
        lo = list(self.lo)
        hi = list(self.hi)
        for d in coords:
            vals = [factor_lo * lo[d], factor_lo * hi[d], factor_hi * lo[d], factor_hi * hi[d]]
            lo[d] = min(vals)
            hi[d] = max(vals)
        return Support(tuple(lo), tuple(hi))

    def concat(self, other: "Support") -> "Support":
        return Support(self.lo + other.lo, self.hi + other.hi)

    def leg(self, i: int, n: int) -> "Support":
        w = leg_width(n)
        return Support(self.lo[i * w : (i + 1) * w], self.hi[i * w : (i + 1) * w])

    def max_abs(self, coords: Sequence[int]) -> float:
        return max(max(abs(self.lo[d]), abs(self.hi[d])) for d in coords)


def box_support(box: TruncationBox, n: int, legs: int = 1) -> Support:
    iv = box.intervals(n, legs)
    return Support(tuple(lo for lo, _ in iv), tuple(hi for _, hi in iv))


def require_in_box(support: Support, box: TruncationBox, n: int, legs: int = 1) -> None:
    """Reject supports that, inflated by the box safety factor, leave the box."""
    outer = box_support(box, n, legs)
    infl = box.support_inflation
    for d, (l, h) in enumerate(zip(support.lo, support.hi)):
        if infl * l < outer.lo[d] or infl * h > outer.hi[d]:
            raise SupportOverflow(
                f"coordinate {d}: support [{l:.3f}, {h:.3f}] x {infl} "
                f"exceeds box [{outer.lo[d]:.3f}, {outer.hi[d]:.3f}]"
            )


class FieldBase:
    """Mixin for linear-combination conveniences shared by all field types."""

    legs: int
    params: DeformationParams
    support: Support

    def scaled_by(self, c: complex) -> "SumField":
        return SumField((self,), (c,))

    def minus(self, other: "FieldBase") -> "SumField":
        return SumField((self, other), (1.0, -1.0))

    def plus(self, other: "FieldBase") -> "SumField":
        return SumField((self, other), (1.0, 1.0))


@dataclass(frozen=True)
class GaussianPacket(FieldBase):
    """amp * exp(-sum (u_d-c_d)^2/(2 s_d^2)) * exp(2*pi*i k.u), any leg count."""

    params: DeformationParams
    center: tuple[float, ...]
    sigma: tuple[float, ...]
    momentum: tuple[float, ...]
    amp: complex = 1.0 + 0.0j
    legs: int = 1

    def __post_init__(self) -> None:
        d = self.legs * self.params.width
        if not (len(self.center) == len(self.sigma) == len(self.momentum) == d):
            raise ValueError("parameter arrays must match legs * (2n + 1)")
        if any(s <= 0 for s in self.sigma):
            raise ValueError("widths must be positive")

    @property
    def support(self) -> Support:
        lo = tuple(c - TAIL_SIGMAS * s for c, s in zip(self.center, self.sigma))
        hi = tuple(c + TAIL_SIGMAS * s for c, s in zip(self.center, self.sigma))
        return Support(lo, hi)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        c = np.asarray(self.center)
        s = np.asarray(self.sigma)
        k = np.asarray(self.momentum)
        z = (pts - c) / s
        expo = -0.5 * np.sum(z * z, axis=-1) + (TWO_PI * 1j) * (pts @ k)
        return self.amp * np.exp(expo)

    def axis_factor(self, d: int, t: np.ndarray) -> np.ndarray:
        z = (t - self.center[d]) / self.sigma[d]
        return np.exp(-0.5 * z * z + (TWO_PI * 1j) * self.momentum[d] * t)

    def eval_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        factors = [self.axis_factor(d, np.asarray(t)) for d, t in enumerate(axes)]
        return self.amp * reduce(np.multiply.outer, factors)


@dataclass(frozen=True)
class SumField(FieldBase):
    terms: tuple
    coeffs: tuple

    def __post_init__(self) -> None:
        if not self.terms or len(self.terms) != len(self.coeffs):
            raise ValueError("terms/coeffs mismatch")
        legs = {t.legs for t in self.terms}
        if len(legs) != 1:
            raise ValueError("mixed leg counts in a sum")

    @property
    def legs(self) -> int:
        return self.terms[0].legs

    @property
    def params(self) -> DeformationParams:
        return self.terms[0].params

    @property
    def support(self) -> Support:
        return reduce(lambda a, b: a.union(b), (t.support for t in self.terms))

    def eval(self, pts: np.ndarray) -> np.ndarray:
        acc = self.coeffs[0] * self.terms[0].eval(pts)
        for c, t in zip(self.coeffs[1:], self.terms[1:]):
            acc = acc + c * t.eval(pts)
        return acc

    def eval_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        acc = self.coeffs[0] * self.terms[0].eval_grid(axes)
        for c, t in zip(self.coeffs[1:], self.terms[1:]):
            acc = acc + c * t.eval_grid(axes)
        return acc


@dataclass(frozen=True)
class TensorField(FieldBase):
    """Elementary tensor f (x) g on the concatenation of their legs."""

    left: object
    right: object

    @property
    def legs(self) -> int:
        return self.left.legs + self.right.legs

    @property
    def params(self) -> DeformationParams:
        return self.left.params

    @property
    def support(self) -> Support:
        return self.left.support.concat(self.right.support)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        split = self.left.legs * self.params.width
        return self.left.eval(pts[..., :split]) * self.right.eval(pts[..., split:])

    def eval_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        split = self.left.legs * self.params.width
        return np.multiply.outer(
            self.left.eval_grid(axes[:split]), self.right.eval_grid(axes[split:])
        )


@dataclass(frozen=True)
class LazyField(FieldBase):
    """Field defined by a vectorized closure over (..., D) point arrays."""

    params: DeformationParams
    legs: int
    fn: Callable[[np.ndarray], np.ndarray]
    support: Support

    def eval(self, pts: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(pts, dtype=float))


class SampledField(FieldBase):
    """Values on a uniform grid with cubic-spline interpolation, zero outside.

    Used where a field must be evaluated far more often than its defining
    integral can be afforded: the grid is filled once, then lookups are cheap.
    """

    def __init__(
        self,
        params: DeformationParams,
        legs: int,
        axes: Sequence[np.ndarray],
        values: np.ndarray,
        support: Support,
    ):
        self.params = params
        self.legs = legs
        self.support = support
        self._lo = np.array([float(a[0]) for a in axes])
        self._step = np.array([float(a[1] - a[0]) for a in axes])
        for a in axes:
            d = np.diff(a)
            if not np.allclose(d, d[0], rtol=1e-12, atol=1e-12):
                raise ValueError("sampled axes must be uniform")
        vals = np.ascontiguousarray(values, dtype=complex)
        if vals.shape != tuple(len(a) for a in axes):
            raise ValueError("value tensor does not match axes")
        self._coef = ndimage.spline_filter(
            vals, order=3, mode="constant", output=complex
        )

    @classmethod
    def from_field(
        cls,
        src,
        nodes: Sequence[int],
        margin: float = 1.05,
    ) -> "SampledField":
        iv = src.support.intervals(margin)
        axes = [np.linspace(lo, hi, m) for (lo, hi), m in zip(iv, nodes)]
        if hasattr(src, "eval_grid"):
            vals = src.eval_grid(axes)
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in mesh], axis=-1)
            vals = src.eval(pts).reshape([len(a) for a in axes])
        return cls(src.params, src.legs, axes, vals, src.support)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, pts.shape[-1])
        idx = (flat - self._lo) / self._step
        out = ndimage.map_coordinates(
            self._coef, idx.T, order=3, prefilter=False, mode="constant", cval=0.0
        )
        return out.reshape(shape)


def packet_integral(p: GaussianPacket) -> complex:
    """Exact integral of a Gaussian packet over all of R^D."""
    total = p.amp
    for c, s, k in zip(p.center, p.sigma, p.momentum):
        total *= (
            s
            * np.sqrt(TWO_PI)
            * np.exp(TWO_PI * 1j * k * c - 0.5 * (TWO_PI * k * s) ** 2)
        )
    return complex(total)


def packet_inner(p: GaussianPacket, q: GaussianPacket) -> complex:
    """Exact L2 inner product <p, q>, conjugate-linear in q."""
    if len(p.center) != len(q.center):
        raise ValueError("dimension mismatch")
    total = p.amp * np.conj(q.amp)
    for d in range(len(p.center)):
        a = 0.5 / p.sigma[d] ** 2 + 0.5 / q.sigma[d] ** 2
        b = (
            p.center[d] / p.sigma[d] ** 2
            + q.center[d] / q.sigma[d] ** 2
            + TWO_PI * 1j * (p.momentum[d] - q.momentum[d])
        )
        const = -0.5 * p.center[d] ** 2 / p.sigma[d] ** 2 - 0.5 * q.center[d] ** 2 / q.sigma[d] ** 2
        total *= np.sqrt(np.pi / a) * np.exp(b * b / (4 * a) + const)
    return complex(total)


def packet_norm(p: GaussianPacket) -> float:
    return float(np.sqrt(packet_inner(p, p).real))


def random_packet(
    rng: np.random.Generator,
    params: DeformationParams,
    box: TruncationBox,
    legs: int = 1,
    kind: str = "generic",
    unit_norm: bool = True,
) -> GaussianPacket:
    """Draw a packet whose inflated support is guaranteed inside the box.

    The r-extent is drawn first; the scaling factor exp(|lam| * rho_r) it
    induces then caps how far the x/y extent may reach, so that points of the
    form exp(lam * r) * x stay inside the box for every admissible r.
    """
    lam = abs(params.lam)
    n = params.n
    if kind not in ("generic", "fourier"):
        raise ValueError(f"unknown packet kind {kind!r}")
    centers: list[float] = []
    sigmas: list[float] = []
    momenta: list[float] = []
    for _ in range(legs):
        if kind == "fourier":
            s_r = rng.uniform(0.30, 0.42)
            c_r = rng.uniform(-0.25, 0.25)
            k_r = rng.uniform(-0.3, 0.3)
        else:
            s_r = rng.uniform(0.16, 0.30)
            c_r = rng.uniform(-0.20, 0.20)
            k_r = rng.uniform(-0.4, 0.4)
        rho_r = abs(c_r) + TAIL_SIGMAS * s_r
        if rho_r * box.support_inflation > box.half_width_r:
            raise SupportOverflow("r extent too large for box")
        cap = np.exp(lam * rho_r)
        allowed = min(box.half_width_x, box.half_width_y) / box.support_inflation / cap
        s_hi = min(0.40, (allowed - 0.4) / TAIL_SIGMAS)
        s_lo = min(0.22, 0.9 * s_hi)
        if s_hi <= 0.05:
            raise SupportOverflow("no admissible x/y width for this box")
        xy_c: list[float] = []
        xy_s: list[float] = []
        xy_k: list[float] = []
        for _ in range(2 * n):
            s = rng.uniform(s_lo, s_hi)
            c_max = min(0.4, allowed - TAIL_SIGMAS * s)
            c = rng.uniform(-c_max, c_max)
            xy_c.append(c)
            xy_s.append(s)
            xy_k.append(rng.uniform(-0.35, 0.35))
        centers += xy_c + [c_r]
        sigmas += xy_s + [s_r]
        momenta += xy_k + [k_r]
    amp = np.exp(2j * np.pi * rng.uniform()) * rng.uniform(0.6, 1.4)
    p = GaussianPacket(
        params=params,
        center=tuple(centers),
        sigma=tuple(sigmas),
        momentum=tuple(momenta),
        amp=complex(amp),
        legs=legs,
    )
    if unit_norm:
        p = GaussianPacket(
            params=params,
            center=p.center,
            sigma=p.sigma,
            momentum=p.momentum,
            amp=complex(p.amp / packet_norm(p)),
            legs=legs,
        )
    require_in_box(p.support, box, n, legs)
    return p


def hermite_functions(m: int, t: np.ndarray, width: float = 1.0) -> np.ndarray:
    """First m orthonormal Hermite functions of t/width, shape (m, len(t)).

    Stable two-term recurrence; orthonormal on the real line with plain
    Lebesgue measure.
    """
    t = np.asarray(t, dtype=float)
    u = t / width
    out = np.empty((m,) + u.shape)
    h0 = np.pi ** -0.25 * np.exp(-0.5 * u * u) / np.sqrt(width)
    out[0] = h0
    if m > 1:
        out[1] = np.sqrt(2.0) * u * h0
    for j in range(2, m):
        out[j] = np.sqrt(2.0 / j) * u * out[j - 1] - np.sqrt((j - 1) / j) * out[j - 2]
    return out


def _graded_indices(naxes: int, count: int) -> list[tuple[int, ...]]:
    """First ``count`` multi-indices ordered by total degree, then lexicographic."""
    out: list[tuple[int, ...]] = []
    degree = 0
    while len(out) < count:
        level = [
            idx
            for idx in _compositions(degree, naxes)
        ]
        out.extend(level)
        degree += 1
    return out[:count]


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


@dataclass(frozen=True)
class HermiteMode(FieldBase):
    """Tensor Hermite function on one leg, used as an orthonormal family."""

    params: DeformationParams
    index: tuple[int, ...]
    widths: tuple[float, ...]
    legs: int = 1

    @property
    def support(self) -> Support:
        los = []
        his = []
        for j, w in zip(self.index, self.widths):
            r = w * (np.sqrt(2.0 * j + 1.0) + 3.5)
            los.append(-r)
            his.append(r)
        return Support(tuple(los), tuple(his))

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        acc = None
        for d, (j, w) in enumerate(zip(self.index, self.widths)):
            col = hermite_functions(j + 1, pts[..., d], w)[j]
            acc = col if acc is None else acc * col
        return acc.astype(complex)

    def eval_grid(self, axes: Sequence[np.ndarray]) -> np.ndarray:
        factors = [
            hermite_functions(j + 1, np.asarray(t), w)[j]
            for (j, w), t in zip(zip(self.index, self.widths), axes)
        ]
        return reduce(np.multiply.outer, factors).astype(complex)


def hermite_family(
    params: DeformationParams,
    count: int,
    xy_width: float = 0.8,
    r_width: float = 0.55,
) -> list[HermiteMode]:
    """Graded orthonormal family of tensor Hermite modes on one leg."""
    w = (xy_width,) * (2 * params.n) + (r_width,)
    return [
        HermiteMode(params=params, index=idx, widths=w)
        for idx in _graded_indices(params.width, count)
    ]
