"""Twisted convolution algebra in the (x, y) directions at fixed r.

The product integrates over the first factor's (x, y) support with the twist
phase exp(-2 pi i eta(r) beta(xt, y - yt)); the left regular representation
acts by the same kernel, so applying it to a vector reuses the product code.
The coproduct is realized two ways: conjugation by the fundamental unitary,
and the collapsed two-leg action obtained by carrying out the delta
integrations by hand.  Both act on vectors; the structured kernel itself is
never materialized on a six-dimensional grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DeformationParams, TWO_PI, eta, leg_width, split_leg
from .fields import FieldBase, LazyField, Support
from .hilbert import EvalContext, WeightedCompositionOp
from .quadrature import axis_rule

__all__ = [
    "ProductA",
    "product_a",
    "star_a",
    "left_rep",
    "TwistedConvOp",
    "ConjugatedCoproduct",
    "StructuredCoproductA",
    "delta_a_operator",
    "delta_a_structured",
    "antipode_s",
    "haar_a",
]

# Points-times-nodes budget for one vectorized block.
_BLOCK = 1 << 20


def _interval_intersect(a: tuple[float, float], b: tuple[float, float]):
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, max(lo, hi))


def _exp_range(lam: float, lo: float, hi: float) -> tuple[float, float]:
    vals = (np.exp(lam * lo), np.exp(lam * hi))
    return (min(vals), max(vals))


def _xy_axes(ctx: EvalContext, support: Support):
    """Gauss-Legendre nodes over the x/y part of a one-leg support."""
    n = ctx.params.n
    iv = ctx.intervals_for(support, 1)[: 2 * n]
    m = ctx.spec.nodes_xy
    return [axis_rule(lo, hi, m, ctx.rule) for lo, hi in iv]


def _flat_nodes(axes):
    """Tensor nodes (M, k) and weights (M,) from per-axis rules."""
    grids = np.meshgrid(*[t for t, _ in axes], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = np.ones(1)
    for _, ww in axes:
        w = np.multiply.outer(w, ww)
    return pts, w.ravel()


class ProductA(FieldBase):
    """Lazy twisted convolution; ``twist`` picks the left or right phase."""

    expensive = True

    def __init__(self, f, g, ctx: EvalContext, twist: str = "left"):
        if f.legs != 1 or g.legs != 1:
            raise ValueError("twisted product is defined on one-leg fields")
        if twist not in ("left", "right"):
            raise ValueError(f"unknown twist {twist!r}")
        self.f = f
        self.g = g
        self.ctx = ctx
        self.twist = twist
        self.params: DeformationParams = f.params
        self.legs = 1
        self._axes = _xy_axes(ctx, f.support)
        n = self.params.n
        lo = []
        hi = []
        for d in range(2 * n):
            lo.append(f.support.lo[d] + g.support.lo[d])
            hi.append(f.support.hi[d] + g.support.hi[d])
        r_iv = _interval_intersect(
            (f.support.lo[2 * n], f.support.hi[2 * n]),
            (g.support.lo[2 * n], g.support.hi[2 * n]),
        )
        self.support = Support(tuple(lo) + (r_iv[0],), tuple(hi) + (r_iv[1],))

    # phase argument in cycles, given integration nodes and the output point
    def _cycles(self, u: np.ndarray, v: np.ndarray, x, y, r):
        et = eta(self.params, r)
        if self.twist == "left":
            return -et * np.sum(u * (y - v), axis=-1)
        return -et * np.sum((x - u) * v, axis=-1)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        n = self.params.n
        w = leg_width(n)
        flat = pts.reshape(-1, w)
        nodes, wts = _flat_nodes(self._axes)
        m = nodes.shape[0]
        deep = getattr(self.f, "expensive", False) or getattr(self.g, "expensive", False)
        if deep:
            return self._eval_pointwise(flat, pts.shape[:-1])
        out = np.empty(flat.shape[0], dtype=complex)
        step = max(1, _BLOCK // m)
        u = nodes[:, :n]
        v = nodes[:, n:]
        for a in range(0, flat.shape[0], step):
            blk = flat[a : a + step]
            x = blk[:, None, :n]
            y = blk[:, None, n : 2 * n]
            r = blk[:, None, 2 * n]
            f_args = np.empty((len(blk), m, w))
            f_args[..., : 2 * n] = nodes
            f_args[..., 2 * n] = r
            g_args = np.empty_like(f_args)
            g_args[..., :n] = x - u
            g_args[..., n : 2 * n] = y - v
            g_args[..., 2 * n] = r
            fv = self.f.eval(f_args.reshape(-1, w)).reshape(len(blk), m)
            gv = self.g.eval(g_args.reshape(-1, w)).reshape(len(blk), m)
            cyc = self._cycles(u, v, x, y, r)
            out[a : a + step] = ((fv * gv) * np.exp(TWO_PI * 1j * cyc)) @ wts
        return out.reshape(pts.shape[:-1])

    def _eval_pointwise(self, flat: np.ndarray, shape) -> np.ndarray:
        """Per-point grid evaluation; lets an expensive factor use its own
        grid fast path instead of being called once per node."""
        n = self.params.n
        out = np.empty(flat.shape[0], dtype=complex)
        u_axes = [t for t, _ in self._axes[:n]]
        v_axes = [t for t, _ in self._axes[n:]]
        nodes, wts = _flat_nodes(self._axes)
        u = nodes[:, :n]
        v = nodes[:, n:]
        for i, row in enumerate(flat):
            x, y, r = row[:n], row[n : 2 * n], row[2 * n]
            fv = _grid_eval(self.f, u_axes + v_axes + [np.array([r])]).ravel()
            g_axes = [x[d] - u_axes[d] for d in range(n)]
            g_axes += [y[d] - v_axes[d] for d in range(n)]
            fv2 = _grid_eval(self.g, g_axes + [np.array([r])]).ravel()
            cyc = self._cycles(u, v, x, y, r)
            out[i] = np.sum(fv * fv2 * np.exp(TWO_PI * 1j * cyc) * wts)
        return out.reshape(shape)

    def eval_grid(self, axes) -> np.ndarray:
        n = self.params.n
        if n == 1 and hasattr(self.g, "axis_factor"):
            return self._eval_grid_gemm(axes)
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        return self.eval(pts).reshape([len(a) for a in axes])

    def _eval_grid_gemm(self, axes) -> np.ndarray:
        """n=1 fast path: two small matrix products per r slice."""
        xs, ys, rs = (np.asarray(a, dtype=float) for a in axes)
        (tu, wu), (tv, wv) = self._axes
        g = self.g
        gx = g.axis_factor(0, xs[None, :] - tu[:, None])
        gy = g.axis_factor(1, ys[None, :] - tv[:, None])
        out = np.empty((len(xs), len(ys), len(rs)), dtype=complex)
        f_slab = _grid_eval(self.f, [tu, tv, rs])
        for k, r in enumerate(rs):
            et = eta(self.params, float(r))
            core = f_slab[:, :, k] * (wu[:, None] * wv[None, :])
            amp = g.amp * g.axis_factor(2, np.array([r]))[0]
            if self.twist == "left":
                core = core * np.exp(TWO_PI * 1j * et * tu[:, None] * tv[None, :])
                a_uy = core @ gy
                a_uy *= np.exp(-TWO_PI * 1j * et * tu[:, None] * ys[None, :])
                out[:, :, k] = amp * (gx.T @ a_uy)
            else:
                core = core * np.exp(TWO_PI * 1j * et * tu[:, None] * tv[None, :])
                c_vx = core.T @ gx
                c_vx *= np.exp(-TWO_PI * 1j * et * tv[:, None] * xs[None, :])
                out[:, :, k] = amp * (c_vx.T @ gy)
        return out


def _grid_eval(field, axes) -> np.ndarray:
    if hasattr(field, "eval_grid"):
        return field.eval_grid(axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    return field.eval(pts).reshape([len(a) for a in axes])


def product_a(f, g, ctx: EvalContext) -> ProductA:
    return ProductA(f, g, ctx, twist="left")


def star_a(f) -> LazyField:
    """Involution: twist phase times the conjugate at the reflected point."""
    params = f.params
    n = params.n

    def fn(pts: np.ndarray) -> np.ndarray:
        x, y, r = split_leg(pts, n, 0)
        cyc = -eta(params, r) * np.sum(x * y, axis=-1)
        flipped = np.array(pts, copy=True)
        flipped[..., : 2 * n] *= -1.0
        return np.exp(TWO_PI * 1j * cyc) * np.conj(f.eval(flipped))

    s = f.support
    sup = Support(
        tuple(-h for h in s.hi[: 2 * n]) + (s.lo[2 * n],),
        tuple(-l for l in s.lo[: 2 * n]) + (s.hi[2 * n],),
    )
    return LazyField(params, 1, fn, sup)


@dataclass
class TwistedConvOp:
    """Integral operator with the product kernel; left or right twist."""

    f: object
    ctx: EvalContext
    twist: str = "left"
    label: str = ""

    @property
    def legs(self) -> int:
        return 1

    @property
    def params(self) -> DeformationParams:
        return self.f.params

    def apply(self, vec) -> ProductA:
        return ProductA(self.f, vec, self.ctx, twist=self.twist)

    def embedded(self, leg: int, total_legs: int) -> "EmbeddedTwistedConvOp":
        return EmbeddedTwistedConvOp(self, leg, total_legs)


@dataclass
class EmbeddedTwistedConvOp:
    """A twisted convolution acting on one leg of a multi-leg vector."""

    base: TwistedConvOp
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
        twist = self.base.twist
        axes = _xy_axes(ctx, f.support)
        nodes, wts = _flat_nodes(axes)
        m = nodes.shape[0]

        def fn(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float)
            flat = pts.reshape(-1, pts.shape[-1])
            out = np.empty(flat.shape[0], dtype=complex)
            step = max(1, _BLOCK // m)
            u = nodes[:, :n]
            v = nodes[:, n:]
            for a in range(0, flat.shape[0], step):
                blk = flat[a : a + step]
                x = blk[:, None, off : off + n]
                y = blk[:, None, off + n : off + 2 * n]
                r = blk[:, None, off + 2 * n]
                f_args = np.empty((len(blk), m, w))
                f_args[..., : 2 * n] = nodes
                f_args[..., 2 * n] = r
                vec_args = np.repeat(blk[:, None, :], m, axis=1)
                vec_args[..., off : off + n] = x - u
                vec_args[..., off + n : off + 2 * n] = y - v
                fv = f.eval(f_args.reshape(-1, w)).reshape(len(blk), m)
                xv = vec.eval(vec_args.reshape(-1, flat.shape[-1])).reshape(len(blk), m)
                et = eta(params, r)
                if twist == "left":
                    cyc = -et * np.sum(u * (y - v), axis=-1)
                else:
                    cyc = -et * np.sum((x - u) * v, axis=-1)
                out[a : a + step] = ((fv * xv) * np.exp(TWO_PI * 1j * cyc)) @ wts
            return out.reshape(pts.shape[:-1])

        sup_lo = list(vec.support.lo)
        sup_hi = list(vec.support.hi)
        for d in range(2 * n):
            sup_lo[off + d] += f.support.lo[d]
            sup_hi[off + d] += f.support.hi[d]
        return LazyField(params, self.total_legs, fn, Support(tuple(sup_lo), tuple(sup_hi)))


def left_rep(f, ctx: EvalContext) -> TwistedConvOp:
    return TwistedConvOp(f, ctx, twist="left", label="L")


@dataclass
class ConjugatedCoproduct:
    """Coproduct as conjugation: vec -> U (op (x) 1) U* vec."""

    unitary: WeightedCompositionOp
    inner_op: object
    leg: int = 0

    @property
    def legs(self) -> int:
        return 2

    def apply(self, vec):
        u = self.unitary
        stage = u.inverse().apply(vec)
        stage = self.inner_op.embedded(self.leg, 2).apply(stage)
        return u.apply(stage)


def delta_a_operator(f, ctx: EvalContext, unitary: WeightedCompositionOp) -> ConjugatedCoproduct:
    return ConjugatedCoproduct(unitary, left_rep(f, ctx), leg=0)


@dataclass
class StructuredCoproductA:
    """Collapsed two-leg action of the coproduct of an algebra element.

    The defining kernel contains two delta factors tying the first-leg
    position to a scaled second-leg position; integrating them out leaves a
    single 2n-dim integral, evaluated here.
    """

    f: object
    ctx: EvalContext

    @property
    def params(self) -> DeformationParams:
        return self.f.params

    @property
    def legs(self) -> int:
        return 2

    def apply(self, vec) -> LazyField:
        if vec.legs != 2:
            raise ValueError("two-leg vector expected")
        params = self.params
        n = params.n
        w = leg_width(n)
        f = self.f
        axes = _xy_axes(self.ctx, f.support)
        nodes, wts = _flat_nodes(axes)
        m = nodes.shape[0]
        u = nodes[:, :n]
        v = nodes[:, n:]
        # The symbol sees the fixed xy mesh crossed with one r value per
        # output point, so a grid-capable symbol skips the pointwise path.
        f_axes = [t for t, _ in axes]
        f_grid = hasattr(f, "eval_grid")

        def fn(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float)
            flat = pts.reshape(-1, 2 * w)
            out = np.empty(flat.shape[0], dtype=complex)
            step = max(1, _BLOCK // m)
            for a in range(0, flat.shape[0], step):
                blk = flat[a : a + step]
                x = blk[:, None, :n]
                y = blk[:, None, n : 2 * n]
                r = blk[:, None, 2 * n]
                xp = blk[:, None, w : w + n]
                yp = blk[:, None, w + n : w + 2 * n]
                rp = blk[:, None, w + 2 * n]
                s = np.exp(params.lam * rp)[..., None]
                vec_args = np.empty((len(blk), m, 2 * w))
                vec_args[..., 0:n] = x - s * u
                vec_args[..., n : 2 * n] = y - s * v
                vec_args[..., 2 * n] = r
                vec_args[..., w : w + n] = xp - u
                vec_args[..., w + n : w + 2 * n] = yp - v
                vec_args[..., w + 2 * n] = rp
                if f_grid:
                    slab = f.eval_grid(f_axes + [(r + rp).ravel()])
                    fv = slab.reshape(m, len(blk)).T
                else:
                    f_args = np.empty((len(blk), m, w))
                    f_args[..., : 2 * n] = nodes
                    f_args[..., 2 * n] = r + rp
                    fv = f.eval(f_args.reshape(-1, w)).reshape(len(blk), m)
                xv = vec.eval(vec_args.reshape(-1, 2 * w)).reshape(len(blk), m)
                cyc = -eta(params, r) * np.sum((s * u) * (y - s * v), axis=-1)
                cyc -= eta(params, rp) * np.sum(u * (yp - v), axis=-1)
                out[a : a + step] = ((fv * xv) * np.exp(TWO_PI * 1j * cyc)) @ wts
            return out.reshape(pts.shape[:-1])

        sup_lo = list(vec.support.lo)
        sup_hi = list(vec.support.hi)
        rp_lo, rp_hi = vec.support.lo[2 * w - 1], vec.support.hi[2 * w - 1]
        s_lo, s_hi = _exp_range(params.lam, rp_lo, rp_hi)
        for d in range(2 * n):
            lo_f, hi_f = f.support.lo[d], f.support.hi[d]
            scaled = [s_lo * lo_f, s_lo * hi_f, s_hi * lo_f, s_hi * hi_f]
            sup_lo[d] += min(scaled)
            sup_hi[d] += max(scaled)
            sup_lo[w + d] += lo_f
            sup_hi[w + d] += hi_f
        return LazyField(params, 2, fn, Support(tuple(sup_lo), tuple(sup_hi)))


def delta_a_structured(f, ctx: EvalContext) -> StructuredCoproductA:
    return StructuredCoproductA(f, ctx)


def antipode_s(f) -> LazyField:
    """Closed-form antipode on the twisted convolution algebra."""
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
        mag = np.exp(2.0 * n * params.lam * r)
        return mag * np.exp(TWO_PI * 1j * cyc) * f.eval(args)

    sup = f.support
    r_lo, r_hi = -sup.hi[2 * n], -sup.lo[2 * n]
    s_lo, s_hi = _exp_range(-params.lam, r_lo, r_hi)
    lo = []
    hi = []
    for d in range(2 * n):
        vals = [
            -s_lo * sup.lo[d],
            -s_lo * sup.hi[d],
            -s_hi * sup.lo[d],
            -s_hi * sup.hi[d],
        ]
        lo.append(min(vals))
        hi.append(max(vals))
    return LazyField(params, 1, fn, Support(tuple(lo) + (r_lo,), tuple(hi) + (r_hi,)))


def haar_a(f, ctx: EvalContext) -> complex:
    """Trace-like weight: integral of f(0, 0, r) over r."""
    n = ctx.params.n
    lo, hi = ctx.intervals_for(f.support, 1)[2 * n]
    t, wts = axis_rule(lo, hi, ctx.spec.nodes_r, ctx.rule)
    pts = np.zeros((len(t), leg_width(n)))
    pts[:, 2 * n] = t
    return complex(np.sum(wts * f.eval(pts)))
