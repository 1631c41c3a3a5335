"""Hilbert-space layer: weighted composition operators, probes, inner products.

A weighted composition operator acts as (T xi)(u) = m(u) * xi(sigma(u)), with
an optional complex conjugation of the argument for anti-unitaries.  The class
is closed under composition and inversion at the level of the defining data
(m, sigma), which is what makes exact pointwise certificates possible: two
composites are compared by evaluating their defining data at seeded probe
points, with no quadrature involved.

Weights here are all of the form exp(logmag) * exp(2*pi*i*cycles); they are
stored as the pair (logmag, cycles) rather than as complex values.  Composed
phases can reach millions of cycles at box-corner probes, where the value of
the complex exponential carries no certifiable precision; the (logmag,
cycles) pair composes by addition and admits honest relative comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .core import DeformationParams, QuadratureSpec, TruncationBox, TWO_PI, leg_width
from .fields import LazyField, Support, box_support
from .quadrature import GAUSS, inner as quad_inner, integrate as quad_integrate

__all__ = [
    "WeightedCompositionOp",
    "EvalContext",
    "VectorState",
    "identity_wc",
    "flip_wc",
    "embed_wc",
    "probe_points",
    "wc_residual",
    "unitarity_defect",
    "op_residual_on_vectors",
    "rank_one_tensor_integral",
    "hs_trace_of_product",
]

WeightParts = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class WeightedCompositionOp:
    """Operator xi -> m * (xi o sigma), optionally conjugating the argument.

    ``weight_parts`` returns (logmag, cycles) with m = exp(logmag + 2 pi i
    cycles).  Composition and inversion are exact on this data.
    """

    params: DeformationParams
    legs: int
    weight_parts: WeightParts
    point_map: Callable[[np.ndarray], np.ndarray]
    support_map: Callable[[Support], Support]
    inv_point_map: Callable[[np.ndarray], np.ndarray] | None = None
    inv_support_map: Callable[[Support], Support] | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    cycle_scale: Callable[[np.ndarray], np.ndarray] | None = None
    conjugating: bool = False
    label: str = ""

    def weight(self, pts: np.ndarray) -> np.ndarray:
        logmag, cycles = self.weight_parts(pts)
        return np.exp(logmag + TWO_PI * 1j * np.mod(cycles, 1.0))

    def cycle_magnitude(self, pts: np.ndarray) -> np.ndarray:
        """Accumulated magnitude of the terms summed into ``cycles``.

        A primitive operator carries a single closed-form cycle term, so its
        absolute value is the right scale; compositions add the scales of
        their factors.  Comparisons relative to this scale stay meaningful
        at box corners, where composed cycles cancel through terms many
        orders larger than their sum and the sum itself carries no more
        relative precision than machine epsilon times this magnitude.
        """
        if self.cycle_scale is not None:
            return self.cycle_scale(pts)
        return np.abs(self.weight_parts(pts)[1])

    def apply(self, vec) -> LazyField:
        if vec.legs != self.legs:
            raise ValueError(f"{self.label or 'operator'}: leg mismatch")

        def fn(pts: np.ndarray) -> np.ndarray:
            inner_vals = vec.eval(self.point_map(pts))
            if self.conjugating:
                inner_vals = np.conj(inner_vals)
            return self.weight(pts) * inner_vals

        return LazyField(self.params, self.legs, fn, self.support_map(vec.support))

    def compose(self, other: "WeightedCompositionOp") -> "WeightedCompositionOp":
        """self o other, i.e. other acts first."""
        if self.legs != other.legs:
            raise ValueError("leg mismatch in composition")
        s_parts, s_map, s_conj = self.weight_parts, self.point_map, self.conjugating
        o_parts, o_map = other.weight_parts, other.point_map
        flip = -1.0 if s_conj else 1.0

        def weight_parts(pts: np.ndarray):
            lm1, cy1 = s_parts(pts)
            lm2, cy2 = o_parts(s_map(pts))
            return lm1 + lm2, cy1 + flip * cy2

        def cycle_scale(pts: np.ndarray) -> np.ndarray:
            return self.cycle_magnitude(pts) + other.cycle_magnitude(s_map(pts))

        def point_map(pts: np.ndarray) -> np.ndarray:
            return o_map(s_map(pts))

        def support_map(s: Support) -> Support:
            return self.support_map(other.support_map(s))

        jac = None
        if self.jacobian is not None and other.jacobian is not None:
            s_j, o_j = self.jacobian, other.jacobian

            def jac(pts: np.ndarray) -> np.ndarray:
                return s_j(pts) * o_j(s_map(pts))

        inv_map = None
        inv_sup = None
        if self.inv_point_map is not None and other.inv_point_map is not None:
            s_i, o_i = self.inv_point_map, other.inv_point_map

            def inv_map(pts: np.ndarray) -> np.ndarray:
                return s_i(o_i(pts))

        if self.inv_support_map is not None and other.inv_support_map is not None:
            s_is, o_is = self.inv_support_map, other.inv_support_map

            def inv_sup(s: Support) -> Support:
                return s_is(o_is(s))

        return WeightedCompositionOp(
            params=self.params,
            legs=self.legs,
            weight_parts=weight_parts,
            point_map=point_map,
            support_map=support_map,
            inv_point_map=inv_map,
            inv_support_map=inv_sup,
            jacobian=jac,
            cycle_scale=cycle_scale,
            conjugating=self.conjugating ^ other.conjugating,
            label=f"{self.label}*{other.label}" if self.label or other.label else "",
        )

    def inverse(self) -> "WeightedCompositionOp":
        """Inverse of a unitary or anti-unitary weighted composition operator."""
        if self.inv_point_map is None or self.inv_support_map is None:
            raise ValueError("inverse point map not available")
        parts, inv_map, conj = self.weight_parts, self.inv_point_map, self.conjugating
        # Unitary: m' = 1/(m o inv); anti-unitary: m' = conj(1/(m o inv)).
        flip = 1.0 if conj else -1.0

        def weight_parts(pts: np.ndarray):
            lm, cy = parts(inv_map(pts))
            return -lm, flip * cy

        def cycle_scale(pts: np.ndarray) -> np.ndarray:
            return self.cycle_magnitude(inv_map(pts))

        jac = None
        if self.jacobian is not None:
            j = self.jacobian

            def jac(pts: np.ndarray) -> np.ndarray:
                return 1.0 / j(inv_map(pts))

        return WeightedCompositionOp(
            params=self.params,
            legs=self.legs,
            weight_parts=weight_parts,
            point_map=self.inv_point_map,
            support_map=self.inv_support_map,
            inv_point_map=self.point_map,
            inv_support_map=self.support_map,
            jacobian=jac,
            cycle_scale=cycle_scale,
            conjugating=conj,
            label=f"inv({self.label})" if self.label else "",
        )

    def adjoint_or_inverse(self) -> "WeightedCompositionOp":
        # For the unitary and anti-unitary operators used here these agree.
        return self.inverse()


def identity_wc(params: DeformationParams, legs: int) -> WeightedCompositionOp:
    zero = lambda pts: (np.zeros(pts.shape[:-1]), np.zeros(pts.shape[:-1]))
    return WeightedCompositionOp(
        params=params,
        legs=legs,
        weight_parts=zero,
        point_map=lambda pts: pts,
        support_map=lambda s: s,
        inv_point_map=lambda pts: pts,
        inv_support_map=lambda s: s,
        jacobian=lambda pts: np.ones(pts.shape[:-1]),
        label="id",
    )


def flip_wc(params: DeformationParams) -> WeightedCompositionOp:
    """Tensor flip on two legs."""
    w = leg_width(params.n)

    def swap(pts: np.ndarray) -> np.ndarray:
        out = np.empty_like(pts)
        out[..., :w] = pts[..., w:]
        out[..., w:] = pts[..., :w]
        return out

    def swap_support(s: Support) -> Support:
        return Support(s.lo[w:] + s.lo[:w], s.hi[w:] + s.hi[:w])

    zero = lambda pts: (np.zeros(pts.shape[:-1]), np.zeros(pts.shape[:-1]))
    return WeightedCompositionOp(
        params=params,
        legs=2,
        weight_parts=zero,
        point_map=swap,
        support_map=swap_support,
        inv_point_map=swap,
        inv_support_map=swap_support,
        jacobian=lambda pts: np.ones(pts.shape[:-1]),
        label="flip",
    )


def embed_wc(
    op: WeightedCompositionOp, legs_on: Sequence[int], total_legs: int
) -> WeightedCompositionOp:
    """Let a k-leg operator act on the listed legs of a larger tensor product."""
    if len(legs_on) != op.legs:
        raise ValueError("embedding must name one target leg per operator leg")
    w = leg_width(op.params.n)
    cols = np.concatenate([np.arange(l * w, (l + 1) * w) for l in legs_on])

    def weight_parts(pts: np.ndarray):
        return op.weight_parts(pts[..., cols])

    def point_map(pts: np.ndarray) -> np.ndarray:
        out = np.array(pts, copy=True)
        out[..., cols] = op.point_map(pts[..., cols])
        return out

    def sub_support(s: Support, mapper) -> Support:
        sub = Support(tuple(s.lo[c] for c in cols), tuple(s.hi[c] for c in cols))
        new = mapper(sub)
        lo = list(s.lo)
        hi = list(s.hi)
        for i, c in enumerate(cols):
            lo[c] = new.lo[i]
            hi[c] = new.hi[i]
        return Support(tuple(lo), tuple(hi))

    inv_map = None
    if op.inv_point_map is not None:
        base_inv = op.inv_point_map

        def inv_map(pts: np.ndarray) -> np.ndarray:
            out = np.array(pts, copy=True)
            out[..., cols] = base_inv(pts[..., cols])
            return out

    jac = None
    if op.jacobian is not None:
        base_jac = op.jacobian

        def jac(pts: np.ndarray) -> np.ndarray:
            return base_jac(pts[..., cols])

    return WeightedCompositionOp(
        params=op.params,
        legs=total_legs,
        weight_parts=weight_parts,
        point_map=point_map,
        support_map=lambda s: sub_support(s, op.support_map),
        inv_point_map=inv_map,
        inv_support_map=(
            (lambda s: sub_support(s, op.inv_support_map))
            if op.inv_support_map is not None
            else None
        ),
        jacobian=jac,
        cycle_scale=lambda pts: op.cycle_magnitude(pts[..., cols]),
        conjugating=op.conjugating,
        label=f"{op.label}@{tuple(legs_on)}",
    )


@dataclass(frozen=True)
class EvalContext:
    """Quadrature context: box, node counts, rule; computes tailored integrals.

    Integration intervals are cut to the support of the integrand (clipped to
    the truncation box), never stretched to the whole box, which keeps
    Gauss-Legendre resolution matched to the packet widths actually in play.
    """

    params: DeformationParams
    box: TruncationBox
    spec: QuadratureSpec
    rule: str = GAUSS
    margin: float = 1.02

    def at_level(self, level: int) -> "EvalContext":
        return replace(self, spec=self.spec.at_level(level))

    def leg_nodes(self, legs: int) -> tuple[int, ...]:
        return self.spec.nodes_for_leg(self.params.n) * legs

    def intervals_for(self, support: Support, legs: int):
        outer = box_support(self.box, self.params.n, legs)
        return support.clipped(outer).intervals(self.margin)

    def integrate(self, f) -> complex:
        iv = self.intervals_for(f.support, f.legs)
        return quad_integrate(f, iv, self.leg_nodes(f.legs), self.rule)

    def inner(self, f, g) -> complex:
        if f.legs != g.legs:
            raise ValueError("leg mismatch in inner product")
        sup = f.support.clipped(g.support)
        iv = self.intervals_for(sup, f.legs)
        return quad_inner(f, g, iv, self.leg_nodes(f.legs), self.rule)

    def norm(self, f) -> float:
        val = self.inner(f, f)
        return float(np.sqrt(max(val.real, 0.0)))


@dataclass(frozen=True)
class VectorState:
    """Pair of vectors defining the functional T -> <T xi, eta>."""

    xi: object
    eta: object

    def value(self, op, ctx: EvalContext) -> complex:
        return ctx.inner(op.apply(self.xi), self.eta)


def probe_points(
    rng: np.random.Generator, intervals: Sequence[tuple[float, float]], count: int
) -> np.ndarray:
    lo = np.array([a for a, _ in intervals])
    hi = np.array([b for _, b in intervals])
    return lo + (hi - lo) * rng.random((count, len(intervals)))


def _rel_max(a: np.ndarray, b: np.ndarray) -> float:
    scale = 1.0 + np.maximum(np.abs(a), np.abs(b))
    return float(np.max(np.abs(a - b) / scale))


def wc_residual(
    a: WeightedCompositionOp,
    b: WeightedCompositionOp,
    pts: np.ndarray,
) -> float:
    """Relative sup distance of the defining data of two operators at probes.

    Coordinates and log magnitudes are compared with a 1 + |value|
    denominator.  Phase cycles are compared against the accumulated
    magnitude of the summed cycle terms: composed chains cancel through
    terms that grow like exp(lam * (r1+r2+...)) times coordinate products
    toward box corners, and the sum holds no more absolute precision than
    epsilon times that term size, so the term size is the denominator under
    which data equality shows up as rounding noise.
    """
    if a.conjugating != b.conjugating:
        return float("inf")
    lm_a, cy_a = a.weight_parts(pts)
    lm_b, cy_b = b.weight_parts(pts)
    cyc_scale = 1.0 + np.maximum(a.cycle_magnitude(pts), b.cycle_magnitude(pts))
    return max(
        _rel_max(lm_a, lm_b),
        float(np.max(np.abs(cy_a - cy_b) / cyc_scale)),
        _rel_max(a.point_map(pts), b.point_map(pts)),
    )


def unitarity_defect(op: WeightedCompositionOp, pts: np.ndarray) -> float:
    """Sup of |2 logmag - log jac|, zero exactly for (anti)unitaries."""
    if op.jacobian is None:
        raise ValueError("no jacobian attached")
    logmag, _ = op.weight_parts(pts)
    return float(np.max(np.abs(2.0 * logmag - np.log(op.jacobian(pts)))))


def op_residual_on_vectors(
    op_a,
    op_b,
    vectors: Sequence,
    probes: np.ndarray,
) -> float:
    """Relative sup distance of two operators applied to test vectors."""
    worst = 0.0
    for vec in vectors:
        va = op_a.apply(vec).eval(probes)
        vb = op_b.apply(vec).eval(probes)
        scale = max(np.max(np.abs(va)), np.max(np.abs(vb)), 1e-300)
        worst = max(worst, float(np.max(np.abs(va - vb)) / scale))
    return worst


def rank_one_tensor_integral(
    fn: Callable[[np.ndarray], np.ndarray],
    axes: Sequence[tuple[np.ndarray, np.ndarray]],
    slice_dims: tuple[int, int] = (2, 5),
    blocks: tuple[tuple[int, int], tuple[int, int]] = ((0, 3), (1, 4)),
    rng: np.random.Generator | None = None,
    certify: int = 24,
) -> tuple[complex, float]:
    """Six-dim tensor Gauss sum of a slice-factorable integrand.

    With the two ``slice_dims`` coordinates held fixed, the integrand must
    factor as a product of one function of each index ``block``.  The four
    inner sums then collapse to two cross sections through a reference point
    chosen where the first section peaks, so the full tensor sum costs two
    grid evaluations per slice instead of a four-dim product grid.  The
    value is exactly the full tensor sum when the factorization holds; the
    returned defect measures it at random probe points via the cross-ratio
    identity g(u)g(u0) = g(u_x)g(u_y), so a coupled integrand is detected
    rather than silently misintegrated.
    """
    if len(axes) != 6:
        raise ValueError("six axes expected")
    d1, d2 = slice_dims
    (bx0, bx1), (by0, by1) = blocks
    t = [np.asarray(a[0], dtype=float) for a in axes]
    w = [np.asarray(a[1], dtype=float) for a in axes]
    mids = [tt[len(tt) // 2] for tt in t]
    m2 = len(t[d2])
    mx0, mx1 = len(t[bx0]), len(t[bx1])
    my0, my1 = len(t[by0]), len(t[by1])
    total = 0.0j
    for i1 in range(len(t[d1])):
        pts = np.empty((m2, mx0, mx1, 6))
        pts[..., d1] = t[d1][i1]
        pts[..., d2] = t[d2][:, None, None]
        pts[..., bx0] = t[bx0][None, :, None]
        pts[..., bx1] = t[bx1][None, None, :]
        pts[..., by0] = mids[by0]
        pts[..., by1] = mids[by1]
        gx = fn(pts.reshape(-1, 6)).reshape(m2, mx0, mx1)
        flat = np.abs(gx).reshape(m2, -1)
        am = np.argmax(flat, axis=1)
        g0 = gx.reshape(m2, -1)[np.arange(m2), am]
        ix0, ix1 = np.unravel_index(am, (mx0, mx1))
        pts = np.empty((m2, my0, my1, 6))
        pts[..., d1] = t[d1][i1]
        pts[..., d2] = t[d2][:, None, None]
        pts[..., by0] = t[by0][None, :, None]
        pts[..., by1] = t[by1][None, None, :]
        pts[..., bx0] = t[bx0][ix0][:, None, None]
        pts[..., bx1] = t[bx1][ix1][:, None, None]
        gy = fn(pts.reshape(-1, 6)).reshape(m2, my0, my1)
        sx = np.einsum("sij,i,j->s", gx, w[bx0], w[bx1])
        sy = np.einsum("sij,i,j->s", gy, w[by0], w[by1])
        ok = np.abs(g0) > 1e-290
        vals = np.zeros(m2, dtype=complex)
        vals[ok] = sx[ok] * sy[ok] / g0[ok]
        total += w[d1][i1] * (w[d2] @ vals)

    defect = 0.0
    if certify:
        if rng is None:
            rng = np.random.default_rng(0)
        probes = np.empty((certify, 6))
        for d in range(6):
            lo, hi = t[d][0], t[d][-1]
            pad = 0.2 * (hi - lo)
            probes[:, d] = rng.uniform(lo + pad, hi - pad, certify)
        u_x = probes.copy()
        u_x[:, by0] = mids[by0]
        u_x[:, by1] = mids[by1]
        u_y = probes.copy()
        u_y[:, bx0] = mids[bx0]
        u_y[:, bx1] = mids[bx1]
        u_0 = u_x.copy()
        u_0[:, bx0] = mids[bx0]
        u_0[:, bx1] = mids[bx1]
        lhs = fn(probes) * fn(u_0)
        rhs = fn(u_x) * fn(u_y)
        scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
        defect = float(np.max(np.abs(lhs - rhs)) / scale)
    return complex(total), defect


def hs_trace_of_product(
    kernel: Callable[[np.ndarray], np.ndarray],
    axes: Sequence[tuple[np.ndarray, np.ndarray]],
    rng: np.random.Generator | None = None,
    skeleton: bool = True,
    block: int = 1 << 20,
) -> float:
    """Squared Hilbert-Schmidt norm of a plain function kernel.

    Integrates |K|^2 over the row and column coordinates by six-dim
    quadrature.  Kernels still carrying delta structure (objects acting
    through ``apply``) are refused; they must be reduced to plain functions
    first.  The skeleton path exploits per-slice factorization of |K|^2 and
    falls back to the flat chunked sum if the factorization certificate
    fails.
    """
    if not callable(kernel) or hasattr(kernel, "apply"):
        raise ValueError("plain function kernels only")

    def sq(pts: np.ndarray) -> np.ndarray:
        return np.abs(kernel(pts)) ** 2

    if skeleton:
        value, defect = rank_one_tensor_integral(sq, axes, rng=rng)
        if defect <= 1e-8:
            return float(value.real)
    from .quadrature import tensor_blocks

    total = 0.0
    for pts, wts in tensor_blocks(list(axes), block):
        total += float(np.sum(wts * sq(pts)))
    return total
