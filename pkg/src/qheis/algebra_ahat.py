"""Scaled convolution algebra in the r direction, with its modular theory.

The product convolves along r while rescaling x and y by exp(lam * rt); no
twist phase appears, which is why this side carries the interesting modular
structure instead: a non-tracial weight, a one-parameter modular flow, and a
positive GNS weighting.  The coproduct again comes in two interchangeable
forms, conjugation by the fundamental unitary and a collapsed one-dimensional
integral action on two-leg vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DeformationParams, TWO_PI, eta, leg_width, split_leg
from .fields import FieldBase, LazyField, SampledField, Support
from .hilbert import EvalContext, WeightedCompositionOp
from .quadrature import axis_rule

__all__ = [
    "ProductAhat",
    "product_ahat",
    "StarAhat",
    "star_ahat",
    "RWeightedField",
    "gns_gamma",
    "modular_sigma_t",
    "modular_sigma_half_i",
    "ScaledConvOp",
    "rho_rep",
    "StructuredCoproductAhat",
    "delta_ahat_operator",
    "delta_ahat_structured",
    "delta_ahat_density",
    "antipode_shat",
    "haar_ahat",
    "conj_j_op",
    "conj_jhat_op",
    "tomita_op",
    "nabla_power",
    "nabla_it",
    "materialize",
    "slice_to_ahat_function",
    "left_invariance_check",
]

_BLOCK = 1 << 20

# The scaled factor under the r-convolution develops features a factor
# exp(lam r) narrower than the integrand's nominal r scale, so the 1-dim
# convolution axis runs denser than the grid r axis.
CONV_OVERSAMPLE = 2.5


def _conv_nodes(ctx: EvalContext) -> int:
    return int(round(ctx.spec.nodes_r * CONV_OVERSAMPLE))


def _interval_intersect(a, b):
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, max(lo, hi))


def _exp_range(lam, lo, hi):
    vals = (np.exp(lam * lo), np.exp(lam * hi))
    return (min(vals), max(vals))


def _scaled_reflect_support(sup: Support, lam: float, n: int, negate_xy: bool) -> Support:
    """Support of u -> base(sgn * exp(lam r) x, sgn * exp(lam r) y, -r)."""
    r_lo, r_hi = -sup.hi[2 * n], -sup.lo[2 * n]
    f_lo, f_hi = _exp_range(-lam, r_lo, r_hi)
    lo = []
    hi = []
    for d in range(2 * n):
        base = (-sup.hi[d], -sup.lo[d]) if negate_xy else (sup.lo[d], sup.hi[d])
        vals = [f_lo * base[0], f_lo * base[1], f_hi * base[0], f_hi * base[1]]
        lo.append(min(vals))
        hi.append(max(vals))
    return Support(tuple(lo) + (r_lo,), tuple(hi) + (r_hi,))


def _separable_base(field):
    """(base, conjugate?, r_weight) if the field factors per axis, else None.

    Recognizes plain separable fields, their involutions, and r-weighted
    wrappers; used by the grid fast path of the product.
    """
    if isinstance(field, StarAhat):
        inner = _separable_base(field.base)
        # Reject an r-weight under the involution: it would need reflecting.
        if inner is None or inner[1] or inner[2] is not None:
            return None
        return (inner[0], True, None)
    if isinstance(field, RWeightedField):
        inner = _separable_base(field.base)
        if inner is None:
            return None
        base, conj, rw = inner
        extra = field.r_factor
        if rw is None:
            return (base, conj, extra)
        prev = rw
        return (base, conj, lambda r: prev(r) * extra(r))
    if hasattr(field, "axis_factor"):
        return (field, False, None)
    return None


class ProductAhat(FieldBase):
    """Lazy scaled convolution along r, optionally with a GNS-type weight.

    weight_power p inserts (exp(lam rt))^(p n) under the integral: p=0 is the
    algebra product, p=1 the representation on vectors.
    """

    expensive = True

    def __init__(self, f, g, ctx: EvalContext, weight_power: int = 0):
        if f.legs != 1 or g.legs != 1:
            raise ValueError("scaled product is defined on one-leg fields")
        self.f = f
        self.g = g
        self.ctx = ctx
        self.weight_power = weight_power
        self.params: DeformationParams = f.params
        self.legs = 1
        n = self.params.n
        lo_r, hi_r = ctx.intervals_for(f.support, 1)[2 * n]
        self._nodes, self._wts = axis_rule(lo_r, hi_r, _conv_nodes(ctx), ctx.rule)
        f_lo, f_hi = _exp_range(-self.params.lam, lo_r, hi_r)
        lo = []
        hi = []
        for d in range(2 * n):
            g_scaled = [
                f_lo * g.support.lo[d],
                f_lo * g.support.hi[d],
                f_hi * g.support.lo[d],
                f_hi * g.support.hi[d],
            ]
            iv = _interval_intersect(
                (f.support.lo[d], f.support.hi[d]), (min(g_scaled), max(g_scaled))
            )
            lo.append(iv[0])
            hi.append(iv[1])
        lo.append(f.support.lo[2 * n] + g.support.lo[2 * n])
        hi.append(f.support.hi[2 * n] + g.support.hi[2 * n])
        self.support = Support(tuple(lo), tuple(hi))

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        params = self.params
        n = params.n
        w = leg_width(n)
        flat = pts.reshape(-1, w)
        t, wts = self._nodes, self._wts
        m = len(t)
        scale = np.exp(params.lam * t)
        gns = scale ** (self.weight_power * n) * wts
        out = np.empty(flat.shape[0], dtype=complex)
        step = max(1, _BLOCK // m)
        for a in range(0, flat.shape[0], step):
            blk = flat[a : a + step]
            f_args = np.repeat(blk[:, None, :], m, axis=1)
            f_args[..., 2 * n] = t
            g_args = np.empty_like(f_args)
            g_args[..., : 2 * n] = blk[:, None, : 2 * n] * scale[None, :, None]
            g_args[..., 2 * n] = blk[:, None, 2 * n] - t
            fv = self.f.eval(f_args.reshape(-1, w)).reshape(len(blk), m)
            gv = self.g.eval(g_args.reshape(-1, w)).reshape(len(blk), m)
            out[a : a + step] = (fv * gv) @ gns
        return out.reshape(pts.shape[:-1])

    def eval_grid(self, axes) -> np.ndarray:
        fb = _separable_base(self.f)
        gb = _separable_base(self.g)
        if self.params.n == 1 and fb is not None and gb is not None and not gb[1]:
            return self._eval_grid_einsum(axes, fb, gb)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return self.eval(pts).reshape([len(a) for a in axes])

    def _eval_grid_einsum(self, axes, fb, gb) -> np.ndarray:
        """n=1 separable fast path: one contraction over the r nodes."""
        params = self.params
        xs, ys, rs = (np.asarray(a, dtype=float) for a in axes)
        t, wts = self._nodes, self._wts
        scale = np.exp(params.lam * t)
        base_f, conj_f, rw_f = fb
        base_g, conj_g, rw_g = gb

        def fiber(base, conj, rw, axis, vals):
            out = base.axis_factor(axis, vals)
            if conj:
                out = np.conj(out)
            return out

        if conj_f:
            # involution: f(x, y, t) = conj base(e^{lam t}x, e^{lam t}y, -t)
            fx = fiber(base_f, True, None, 0, scale[:, None] * xs[None, :])
            fy = fiber(base_f, True, None, 1, scale[:, None] * ys[None, :])
            fr = np.conj(base_f.axis_factor(2, -t) * base_f.amp)
        else:
            fx = np.broadcast_to(base_f.axis_factor(0, xs)[None, :], (len(t), len(xs)))
            fy = np.broadcast_to(base_f.axis_factor(1, ys)[None, :], (len(t), len(ys)))
            fr = base_f.axis_factor(2, t) * base_f.amp
        if rw_f is not None:
            fr = fr * rw_f(t)
        gx = fiber(base_g, conj_g, None, 0, scale[:, None] * xs[None, :])
        gy = fiber(base_g, conj_g, None, 1, scale[:, None] * ys[None, :])
        gr = base_g.axis_factor(2, rs[None, :] - t[:, None])
        if conj_g:
            gr = np.conj(gr)
        amp_g = np.conj(base_g.amp) if conj_g else base_g.amp
        if rw_g is not None:
            gr = gr * rw_g(rs[None, :] - t[:, None])
        col = wts * fr * amp_g * scale ** (self.weight_power * params.n)
        return np.einsum("si,sj,sk,s->ijk", fx * gx, fy * gy, gr, col, optimize=True)


def product_ahat(f, g, ctx: EvalContext) -> ProductAhat:
    return ProductAhat(f, g, ctx, weight_power=0)


class StarAhat(FieldBase):
    """Involution: conjugate at the scaled, r-reflected point."""

    def __init__(self, base):
        self.base = base
        self.params: DeformationParams = base.params
        self.legs = 1
        self.support = _scaled_reflect_support(
            base.support, self.params.lam, self.params.n, negate_xy=False
        )

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        n = self.params.n
        r = pts[..., 2 * n]
        args = np.empty_like(pts)
        args[..., : 2 * n] = pts[..., : 2 * n] * np.exp(self.params.lam * r)[..., None]
        args[..., 2 * n] = -r
        return np.conj(self.base.eval(args))


def star_ahat(f) -> StarAhat:
    return StarAhat(f)


class RWeightedField(FieldBase):
    """Pointwise multiplication by a function of r alone."""

    def __init__(self, base, r_factor: Callable[[np.ndarray], np.ndarray], label: str = ""):
        self.base = base
        self.r_factor = r_factor
        self.label = label
        self.params: DeformationParams = base.params
        self.legs = base.legs
        self.support = base.support

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r = pts[..., self.params.width - 1]
        return self.r_factor(r) * self.base.eval(pts)


def gns_gamma(f) -> RWeightedField:
    """GNS embedding weight (exp(lam r))^n."""
    lam, n = f.params.lam, f.params.n
    return RWeightedField(f, lambda r: np.exp(n * lam * r) + 0.0j, label="gamma")


def modular_sigma_t(f, t: float) -> RWeightedField:
    """Modular flow at real time t: multiplier (exp(-2 lam r i t))^n."""
    lam, n = f.params.lam, f.params.n
    return RWeightedField(f, lambda r: np.exp(-2j * n * lam * r * t), label=f"sigma_{t}")


def modular_sigma_half_i(f) -> RWeightedField:
    """Analytic continuation of the flow to t = i/2: multiplier (exp(lam r))^n."""
    return gns_gamma(f)


@dataclass
class ScaledConvOp:
    """The representation by scaled convolution; weight power one."""

    f: object
    ctx: EvalContext
    label: str = "rho"

    @property
    def legs(self) -> int:
        return 1

    @property
    def params(self) -> DeformationParams:
        return self.f.params

    def apply(self, vec) -> ProductAhat:
        return ProductAhat(self.f, vec, self.ctx, weight_power=1)

    def embedded(self, leg: int, total_legs: int) -> "EmbeddedScaledConvOp":
        return EmbeddedScaledConvOp(self, leg, total_legs)


@dataclass
class EmbeddedScaledConvOp:
    base: ScaledConvOp
    leg: int
    total_legs: int

    @property
    def params(self) -> DeformationParams:
        return self.base.params

    @property
    def legs(self) -> int:
        return self.total_legs

    def apply(self, vec) -> LazyField:
        if vec.legs != self.total_legs:
            raise ValueError("leg mismatch")
        params = self.params
        n = params.n
        w = leg_width(n)
        off = self.leg * w
        f = self.base.f
        ctx = self.base.ctx
        lo_r, hi_r = ctx.intervals_for(f.support, 1)[2 * n]
        t, wts = axis_rule(lo_r, hi_r, _conv_nodes(ctx), ctx.rule)
        m = len(t)
        scale = np.exp(params.lam * t)
        gns = scale**n * wts

        def fn(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float)
            flat = pts.reshape(-1, pts.shape[-1])
            out = np.empty(flat.shape[0], dtype=complex)
            step = max(1, _BLOCK // m)
            for a in range(0, flat.shape[0], step):
                blk = flat[a : a + step]
                f_args = np.empty((len(blk), m, w))
                f_args[..., : 2 * n] = blk[:, None, off : off + 2 * n]
                f_args[..., 2 * n] = t
                vec_args = np.repeat(blk[:, None, :], m, axis=1)
                vec_args[..., off : off + 2 * n] = (
                    blk[:, None, off : off + 2 * n] * scale[None, :, None]
                )
                vec_args[..., off + 2 * n] = blk[:, None, off + 2 * n] - t
                fv = f.eval(f_args.reshape(-1, w)).reshape(len(blk), m)
                xv = vec.eval(vec_args.reshape(-1, flat.shape[-1])).reshape(len(blk), m)
                out[a : a + step] = (fv * xv) @ gns
            return out.reshape(pts.shape[:-1])

        sup_lo = list(vec.support.lo)
        sup_hi = list(vec.support.hi)
        sup_lo[off + 2 * n] += f.support.lo[2 * n]
        sup_hi[off + 2 * n] += f.support.hi[2 * n]
        return LazyField(params, self.total_legs, fn, Support(tuple(sup_lo), tuple(sup_hi)))


def rho_rep(f, ctx: EvalContext) -> ScaledConvOp:
    return ScaledConvOp(f, ctx)


def delta_ahat_density(f):
    """Diagonal kernel density of the coproduct of an algebra element."""
    params = f.params
    n = params.n

    def density(x, y, xp, yp, rt):
        args_shape = np.broadcast_shapes(x.shape[:-1], rt.shape)
        args = np.empty(args_shape + (leg_width(n),))
        args[..., :n] = x + xp
        args[..., n : 2 * n] = y + yp
        args[..., 2 * n] = rt
        cyc = eta(params, rt) * np.sum(x * yp, axis=-1)
        return f.eval(args) * np.exp(TWO_PI * 1j * cyc)

    return density


@dataclass
class StructuredCoproductAhat:
    """Collapsed two-leg action of a diagonal-density coproduct kernel.

    Acts by a single integral over the diagonal variable rt; the density is
    any function (x, y, x', y', rt) -> C, defaulting to the coproduct of an
    algebra element.
    """

    density: Callable
    params: DeformationParams
    ctx: EvalContext
    r_interval: tuple[float, float]

    @property
    def legs(self) -> int:
        return 2

    def apply(self, vec) -> LazyField:
        if vec.legs != 2:
            raise ValueError("two-leg vector expected")
        params = self.params
        n = params.n
        w = leg_width(n)
        t, wts = axis_rule(
            self.r_interval[0], self.r_interval[1], _conv_nodes(self.ctx), self.ctx.rule
        )
        m = len(t)
        scale = np.exp(params.lam * t)
        gns = scale ** (2 * n) * wts
        density = self.density

        def fn(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float)
            flat = pts.reshape(-1, 2 * w)
            out = np.empty(flat.shape[0], dtype=complex)
            step = max(1, _BLOCK // m)
            for a in range(0, flat.shape[0], step):
                blk = flat[a : a + step]
                x = np.repeat(blk[:, None, :n], m, axis=1)
                y = np.repeat(blk[:, None, n : 2 * n], m, axis=1)
                xp = np.repeat(blk[:, None, w : w + n], m, axis=1)
                yp = np.repeat(blk[:, None, w + n : w + 2 * n], m, axis=1)
                rt = np.broadcast_to(t[None, :], (len(blk), m))
                dv = density(x, y, xp, yp, rt)
                vec_args = np.empty((len(blk), m, 2 * w))
                vec_args[..., :n] = x * scale[None, :, None]
                vec_args[..., n : 2 * n] = y * scale[None, :, None]
                vec_args[..., 2 * n] = blk[:, None, 2 * n] - t
                vec_args[..., w : w + n] = xp * scale[None, :, None]
                vec_args[..., w + n : w + 2 * n] = yp * scale[None, :, None]
                vec_args[..., w + 2 * n] = blk[:, None, w + 2 * n] - t
                xv = vec.eval(vec_args.reshape(-1, 2 * w)).reshape(len(blk), m)
                out[a : a + step] = (dv * xv) @ gns
            return out.reshape(pts.shape[:-1])

        sup_lo = list(vec.support.lo)
        sup_hi = list(vec.support.hi)
        for leg in (0, 1):
            sup_lo[leg * w + 2 * n] += self.r_interval[0]
            sup_hi[leg * w + 2 * n] += self.r_interval[1]
        return LazyField(params, 2, fn, Support(tuple(sup_lo), tuple(sup_hi)))


def delta_ahat_structured(f, ctx: EvalContext) -> StructuredCoproductAhat:
    n = f.params.n
    r_iv = ctx.intervals_for(f.support, 1)[2 * n]
    return StructuredCoproductAhat(
        density=delta_ahat_density(f), params=f.params, ctx=ctx, r_interval=r_iv
    )


def delta_ahat_operator(f, ctx: EvalContext, unitary: WeightedCompositionOp):
    from .algebra_a import ConjugatedCoproduct

    # Delta-hat conjugates with the unitary the other way around, on leg two.
    return ConjugatedCoproduct(unitary.inverse(), rho_rep(f, ctx), leg=1)


def antipode_shat(f) -> LazyField:
    """Closed-form antipode: twist phase times the scaled, reflected point."""
    params = f.params
    n = params.n

    def fn(pts: np.ndarray) -> np.ndarray:
        x, y, r = split_leg(pts, n, 0)
        s = np.exp(params.lam * r)[..., None]
        args = np.empty_like(pts)
        args[..., :n] = -s * x
        args[..., n : 2 * n] = -s * y
        args[..., 2 * n] = -r
        cyc = -eta(params, r) * np.sum(x * y, axis=-1)
        return np.exp(TWO_PI * 1j * cyc) * f.eval(args)

    sup = _scaled_reflect_support(f.support, params.lam, n, negate_xy=True)
    return LazyField(params, 1, fn, sup)


def haar_ahat(f, ctx: EvalContext, nodes: int | None = None) -> complex:
    """Weight: integral of f(x, y, 0) over the x/y plane.

    Products carry x/y features compressed by the r scaling, so the default
    node count oversamples the grid resolution.
    """
    n = ctx.params.n
    m = 4 * ctx.spec.nodes_xy if nodes is None else nodes
    iv = ctx.intervals_for(f.support, 1)[: 2 * n]
    axes = [axis_rule(lo, hi, m, ctx.rule) for lo, hi in iv]
    grids = np.meshgrid(*[t for t, _ in axes], indexing="ij")
    pts = np.zeros((grids[0].size, leg_width(n)))
    for d, g in enumerate(grids):
        pts[:, d] = g.ravel()
    wts = np.ones(1)
    for _, ww in axes:
        wts = np.multiply.outer(wts, ww)
    return complex(np.sum(wts.ravel() * f.eval(pts)))


def conj_j_op(params: DeformationParams) -> WeightedCompositionOp:
    """Modular conjugation for the trace side: twist phase, x/y reflection."""
    n = params.n

    def weight_parts(pts):
        x, y, r = split_leg(pts, n, 0)
        return np.zeros(r.shape), -eta(params, r) * np.sum(x * y, axis=-1)

    def point_map(pts):
        out = np.array(pts, copy=True)
        out[..., : 2 * n] *= -1.0
        return out

    def support_map(s: Support) -> Support:
        lo = tuple(-h for h in s.hi[: 2 * n]) + (s.lo[2 * n],)
        hi = tuple(-l for l in s.lo[: 2 * n]) + (s.hi[2 * n],)
        return Support(lo, hi)

    return WeightedCompositionOp(
        params=params,
        legs=1,
        weight_parts=weight_parts,
        point_map=point_map,
        support_map=support_map,
        inv_point_map=point_map,
        inv_support_map=support_map,
        jacobian=lambda pts: np.ones(pts.shape[:-1]),
        conjugating=True,
        label="J",
    )


def _scaled_reflect_map(params: DeformationParams):
    n = params.n

    def point_map(pts):
        out = np.empty_like(pts)
        r = pts[..., 2 * n]
        out[..., : 2 * n] = pts[..., : 2 * n] * np.exp(params.lam * r)[..., None]
        out[..., 2 * n] = -r
        return out

    def support_map(s: Support) -> Support:
        return _scaled_reflect_support(s, params.lam, n, negate_xy=False)

    return point_map, support_map


def conj_jhat_op(params: DeformationParams) -> WeightedCompositionOp:
    """Modular conjugation for the weighted side."""
    n = params.n
    point_map, support_map = _scaled_reflect_map(params)

    def weight_parts(pts):
        r = pts[..., 2 * n]
        return n * params.lam * r, np.zeros(r.shape)

    return WeightedCompositionOp(
        params=params,
        legs=1,
        weight_parts=weight_parts,
        point_map=point_map,
        support_map=support_map,
        inv_point_map=point_map,
        inv_support_map=support_map,
        jacobian=lambda pts: np.exp(2 * n * params.lam * pts[..., 2 * n]),
        conjugating=True,
        label="Jhat",
    )


def tomita_op(params: DeformationParams) -> WeightedCompositionOp:
    """Closed form of the conjugate-linear GNS involution on vectors."""
    n = params.n
    point_map, support_map = _scaled_reflect_map(params)

    def weight_parts(pts):
        r = pts[..., 2 * n]
        return 2 * n * params.lam * r, np.zeros(r.shape)

    return WeightedCompositionOp(
        params=params,
        legs=1,
        weight_parts=weight_parts,
        point_map=point_map,
        support_map=support_map,
        inv_point_map=point_map,
        inv_support_map=support_map,
        jacobian=lambda pts: np.exp(2 * n * params.lam * pts[..., 2 * n]),
        conjugating=True,
        label="That",
    )


def nabla_power(params: DeformationParams, s: float) -> WeightedCompositionOp:
    """Real power of the modular operator: multiplication by exp(-2 n lam r s)."""
    n = params.n

    def weight_parts(pts):
        r = pts[..., 2 * n]
        return -2 * n * params.lam * s * r, np.zeros(r.shape)

    ident = lambda pts: pts
    ident_s = lambda sup: sup
    return WeightedCompositionOp(
        params=params,
        legs=1,
        weight_parts=weight_parts,
        point_map=ident,
        support_map=ident_s,
        inv_point_map=ident,
        inv_support_map=ident_s,
        jacobian=lambda pts: np.ones(pts.shape[:-1]),
        label=f"nabla^{s}",
    )


def nabla_it(params: DeformationParams, t: float) -> WeightedCompositionOp:
    """Imaginary power: unitary multiplication by exp(-2 i n lam r t)."""
    n = params.n

    def weight_parts(pts):
        r = pts[..., 2 * n]
        return np.zeros(r.shape), -n * params.lam * t * r / np.pi

    ident = lambda pts: pts
    ident_s = lambda sup: sup
    return WeightedCompositionOp(
        params=params,
        legs=1,
        weight_parts=weight_parts,
        point_map=ident,
        support_map=ident_s,
        inv_point_map=ident,
        inv_support_map=ident_s,
        jacobian=lambda pts: np.ones(pts.shape[:-1]),
        label=f"nabla^i{t}",
    )


def materialize(field, nodes, margin: float = 1.03) -> SampledField:
    return SampledField.from_field(field, nodes, margin)


def slice_to_ahat_function(b, zeta, ctx: EvalContext) -> LazyField:
    """The algebra element (omega_{zeta,zeta} (x) id) applied to the coproduct
    of b, written as a single collapsed integral over the first leg."""
    params = b.params
    n = params.n
    w = leg_width(n)
    iv = ctx.intervals_for(zeta.support, 1)
    axes = [
        axis_rule(lo, hi, m, ctx.rule)
        for (lo, hi), m in zip(iv, ctx.spec.nodes_for_leg(n))
    ]
    grids = np.meshgrid(*[t for t, _ in axes], indexing="ij")
    nodes_flat = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(1)
    for _, ww in axes:
        wts = np.multiply.outer(wts, ww)
    wts = wts.ravel()
    m = nodes_flat.shape[0]
    zeta_conj = np.conj(zeta.eval(nodes_flat)) * wts

    def fn(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, w)
        out = np.empty(flat.shape[0], dtype=complex)
        step = max(1, _BLOCK // m)
        x = nodes_flat[None, :, :n]
        y = nodes_flat[None, :, n : 2 * n]
        r = nodes_flat[None, :, 2 * n]
        for a in range(0, flat.shape[0], step):
            blk = flat[a : a + step]
            xp = blk[:, None, :n]
            yp = blk[:, None, n : 2 * n]
            rt = blk[:, None, 2 * n]
            scale = np.exp(params.lam * rt)
            b_args = np.empty((len(blk), m, w))
            b_args[..., :n] = x + xp
            b_args[..., n : 2 * n] = y + yp
            b_args[..., 2 * n] = rt
            z_args = np.empty((len(blk), m, w))
            z_args[..., :n] = x * scale[..., None]
            z_args[..., n : 2 * n] = y * scale[..., None]
            z_args[..., 2 * n] = r - rt
            bv = b.eval(b_args.reshape(-1, w)).reshape(len(blk), m)
            zv1 = zeta.eval(z_args.reshape(-1, w)).reshape(len(blk), m)
            cyc = eta(params, rt) * np.sum(x * yp, axis=-1)
            vals = bv * zv1 * np.exp(TWO_PI * 1j * cyc)
            out[a : a + step] = scale[:, 0] ** n * (vals @ zeta_conj)
        return out.reshape(pts.shape[:-1])

    lo = []
    hi = []
    for d in range(2 * n):
        lo.append(b.support.lo[d] - zeta.support.hi[d])
        hi.append(b.support.hi[d] - zeta.support.lo[d])
    lo.append(b.support.lo[2 * n])
    hi.append(b.support.hi[2 * n])
    return LazyField(params, 1, fn, Support(tuple(lo), tuple(hi)))


def left_invariance_check(f, zeta, ctx: EvalContext, sample_nodes=(160, 160, 64)):
    """Invariance of the weight under the slice of the coproduct.

    Applies the zeta-slice to the coproduct of b = f* x f, takes the weight of
    the resulting algebra element, and compares with <zeta, zeta> times the
    weight of b.  Both routes share one sampled copy of b, so interpolation
    error cancels and the residual isolates the identity itself.
    """
    n = ctx.params.n
    if n != 1:
        raise NotImplementedError("invariance harness is implemented for n=1")
    b_lazy = product_ahat(star_ahat(f), f, ctx)
    b = materialize(b_lazy, sample_nodes)

    # Left side: weight of the sliced coproduct at rt=0, where the scaling
    # and phase die; a five-dim tensor quadrature, factored as C then outer.
    iv_z = ctx.intervals_for(zeta.support, 1)
    m_xy = ctx.spec.nodes_xy
    m_r = ctx.spec.nodes_r
    ax_x, w_x = axis_rule(*iv_z[0], m_xy, ctx.rule)
    ax_y, w_y = axis_rule(*iv_z[1], m_xy, ctx.rule)
    ax_r, w_r = axis_rule(*iv_z[2], m_r, ctx.rule)
    # The shifted axes span the support of b plus the reach of zeta, a wider
    # interval, so they carry twice the nodes.
    lo_xp = b.support.lo[0] - max(abs(ax_x[0]), abs(ax_x[-1]))
    hi_xp = b.support.hi[0] + max(abs(ax_x[0]), abs(ax_x[-1]))
    lo_yp = b.support.lo[1] - max(abs(ax_y[0]), abs(ax_y[-1]))
    hi_yp = b.support.hi[1] + max(abs(ax_y[0]), abs(ax_y[-1]))
    ax_xp, w_xp = axis_rule(lo_xp, hi_xp, 2 * m_xy, ctx.rule)
    ax_yp, w_yp = axis_rule(lo_yp, hi_yp, 2 * m_xy, ctx.rule)

    v_vals = (ax_y[:, None] + ax_yp[None, :]).ravel()
    c_xy = np.empty((len(ax_x), len(ax_y)), dtype=complex)
    for i, xi in enumerate(ax_x):
        pts = np.empty((len(ax_xp), v_vals.size, 3))
        pts[..., 0] = (xi + ax_xp)[:, None]
        pts[..., 1] = v_vals[None, :]
        pts[..., 2] = 0.0
        bv = b.eval(pts.reshape(-1, 3)).reshape(len(ax_xp), len(ax_y), len(ax_yp))
        c_xy[i] = np.einsum("kjl,k,l->j", bv, w_xp, w_yp)

    zx = np.abs(zeta.axis_factor(0, ax_x)) ** 2 if hasattr(zeta, "axis_factor") else None
    if zx is not None:
        zy = np.abs(zeta.axis_factor(1, ax_y)) ** 2
        zr = np.abs(zeta.axis_factor(2, ax_r) * zeta.amp) ** 2
        lhs = np.einsum("i,j,ij->", w_x * zx, w_y * zy, c_xy) * np.sum(w_r * zr)
    else:
        mesh = np.meshgrid(ax_x, ax_y, ax_r, indexing="ij")
        zpts = np.stack([g.ravel() for g in mesh], axis=-1)
        dens = np.abs(zeta.eval(zpts)) ** 2
        dens = dens.reshape(len(ax_x), len(ax_y), len(ax_r))
        lhs = np.einsum("ijk,i,j,k,ij->", dens, w_x, w_y, w_r, c_xy)

    # Right side: <zeta, zeta> times the weight of the same sampled b.
    norm_sq = ctx.inner(zeta, zeta).real
    rhs = norm_sq * haar_ahat(b, ctx)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return {
        "lhs": complex(lhs),
        "rhs": complex(rhs),
        "residual": float(abs(lhs - rhs) / scale),
    }
