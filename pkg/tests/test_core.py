"""Constants, phase helpers, and coordinate bookkeeping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qheis.core import (
    DeformationParams,
    QuadratureSpec,
    TruncationBox,
    beta,
    e_phase,
    eta,
    leg_width,
    replace_leg,
    split_leg,
)

from .oracles import eta_reference

lams = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
radii = st.floats(min_value=-4.0, max_value=4.0, allow_nan=False)


class TestEta:
    def test_classical_limit_is_identity(self):
        params = DeformationParams(lam=0.0)
        r = np.linspace(-3, 3, 11)
        assert np.allclose(eta(params, r), r)

    def test_frozen_value(self):
        # (e^{2 * 1.0 * 0.25} - 1) / 2 evaluated with 30-digit arithmetic
        assert eta(DeformationParams(lam=1.0), 0.25) == pytest.approx(
            0.3243606353500641, abs=1e-15
        )

    @given(lams, radii)
    @settings(max_examples=80, deadline=None)
    def test_matches_reference(self, lam, r):
        got = float(eta(DeformationParams(lam=lam), r))
        assert got == pytest.approx(float(eta_reference(lam, r)), rel=1e-12, abs=1e-12)

    @given(lams, radii)
    @settings(max_examples=80, deadline=None)
    def test_reflection_identity(self, lam, r):
        # eta(-r) e^{2 lam r} = -eta(r), the identity behind every
        # antipode-flip cancellation downstream
        params = DeformationParams(lam=lam)
        lhs = eta(params, -r) * np.exp(2.0 * lam * r)
        assert lhs == pytest.approx(-float(eta(params, r)), rel=1e-10, abs=1e-10)

    def test_continuous_at_zero(self):
        r = 0.7
        near = float(eta(DeformationParams(lam=1e-9), r))
        assert near == pytest.approx(r, abs=1e-8)


class TestPhases:
    @given(st.floats(-50, 50))
    @settings(max_examples=50, deadline=None)
    def test_unit_modulus(self, t):
        assert abs(e_phase(t)) == pytest.approx(1.0, abs=1e-12)

    @given(st.floats(-10, 10))
    @settings(max_examples=50, deadline=None)
    def test_period_one(self, t):
        assert e_phase(t + 1.0) == pytest.approx(e_phase(t), abs=1e-9)

    def test_quarter_turn(self):
        assert e_phase(0.25) == pytest.approx(1j, abs=1e-15)


class TestBeta:
    @given(st.integers(1, 4))
    @settings(max_examples=10, deadline=None)
    def test_euclidean_inner(self, n):
        rng = np.random.default_rng(n)
        u, v = rng.normal(size=(2, n))
        assert beta(u, v) == pytest.approx(float(np.dot(u, v)))

    def test_batched(self):
        u = np.arange(6.0).reshape(3, 2)
        v = np.ones((3, 2))
        assert np.allclose(beta(u, v), u.sum(axis=1))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            beta(np.ones(2), np.ones(3))


class TestLegs:
    @given(st.integers(1, 3), st.integers(1, 3))
    @settings(max_examples=20, deadline=None)
    def test_split_replace_roundtrip(self, n, legs):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(5, legs * leg_width(n)))
        for leg in range(legs):
            x, y, r = split_leg(pts, n, leg)
            again = replace_leg(pts, n, leg, x, y, r)
            assert np.array_equal(again, pts)

    def test_replace_does_not_alias(self):
        pts = np.zeros((2, 3))
        out = replace_leg(pts, 1, 0, 1.0, 2.0, 3.0)
        assert np.all(pts == 0)
        assert np.allclose(out, [[1, 2, 3], [1, 2, 3]])


class TestValidation:
    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            DeformationParams(lam=0.1, n=0)

    def test_bad_box(self):
        with pytest.raises(ValueError):
            TruncationBox(half_width_x=-1.0)
        with pytest.raises(ValueError):
            TruncationBox(support_inflation=0.5)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            QuadratureSpec(nodes_xy=2)
        with pytest.raises(ValueError):
            QuadratureSpec(rule="midpoint")

    def test_level_doubling(self):
        spec = QuadratureSpec(nodes_xy=10, nodes_r=12)
        lifted = spec.at_level(2)
        assert (lifted.nodes_xy, lifted.nodes_r) == (40, 48)

    def test_box_intervals(self):
        box = TruncationBox(half_width_x=2, half_width_y=3, half_width_r=4)
        iv = box.intervals(n=1, legs=2)
        assert len(iv) == 6
        assert iv[0] == (-2, 2) and iv[1] == (-3, 3) and iv[2] == (-4, 4)
        assert iv[3:] == iv[:3]
