import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import METER_VAR, gaussian_states
from oracles import grid_conditional_variance, wigner_overlap
from ringerase.gaussian import (
    OMEGA_1,
    OMEGA_2,
    Axis,
    JointState,
    MeterSpec,
    QuadratureState,
    amplify,
    displace,
    gain_matrix,
    homodyne_p_meter,
    make_squeezed,
    make_vacuum,
    mirror_homodyne,
    mirror_homodyne_gain,
    mirror_matrix,
    mirror_mix,
    overlap_fidelity,
    squeeze_gain,
    variance_to_dB,
)


def test_vacuum():
    v = make_vacuum()
    assert v.mean_x == v.mean_p == 0
    np.testing.assert_array_equal(v.cov, np.diag([0.5, 0.5]))
    assert v.det == pytest.approx(0.25, abs=1e-15)
    assert v.is_pure()
    assert overlap_fidelity(v, v) == pytest.approx(1.0, abs=1e-15)


def test_state_rejects_unphysical():
    with pytest.raises(ValueError):
        QuadratureState.from_variances(0.1, 0.1)
    with pytest.raises(ValueError):
        QuadratureState(0, 0, [[1.0, 0.2], [0.0, 1.0]])
    with pytest.raises(ValueError):
        QuadratureState.from_variances(-1.0, 1.0)


class TestSqueezed:
    def test_reference_meter(self):
        s = make_squeezed(MeterSpec(Axis.X, METER_VAR))
        assert s.var_x == pytest.approx(0.067668, abs=5e-7)
        assert s.var_p == pytest.approx(3.6945, abs=5e-5)
        assert s.cov_xp == 0 and s.mean_x == 0 and s.mean_p == 0
        assert s.is_pure()

    def test_unsqueezed_is_vacuum(self):
        assert make_squeezed(MeterSpec(Axis.X, 0.5)) == make_vacuum()

    def test_p_squeezed_signal(self):
        s = make_squeezed(MeterSpec(Axis.P, 0.5 * math.exp(-5)))
        assert s.var_p == pytest.approx(0.5 * math.exp(-5), rel=1e-15)
        assert s.var_x == pytest.approx(0.5 * math.exp(5), rel=1e-14)

    @pytest.mark.parametrize("bad", [0.0, -0.1])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError):
            MeterSpec(Axis.X, bad)

    def test_mixed_meter(self):
        s = make_squeezed(MeterSpec(Axis.X, 0.1, anti_var=10.0))
        assert (s.var_x, s.var_p) == (0.1, 10.0)
        with pytest.raises(ValueError):
            MeterSpec(Axis.X, 0.1, anti_var=1.0)


class TestDisplace:
    def test_definition(self):
        s = displace(make_vacuum(), 1, 2)
        assert (s.mean_x, s.mean_p) == (1, 2)
        np.testing.assert_array_equal(s.cov, np.diag([0.5, 0.5]))

    @given(gaussian_states(), st.floats(-10, 10), st.floats(-10, 10))
    def test_inverse_and_cov_invariance(self, s, a, b):
        t = displace(s, a, b)
        np.testing.assert_array_equal(t.cov, s.cov)
        back = displace(t, -a, -b)
        assert back.mean_x == pytest.approx(s.mean_x, abs=1e-12)
        assert back.mean_p == pytest.approx(s.mean_p, abs=1e-12)


class TestSqueezeGain:
    def test_crystal_gain(self):
        s = squeeze_gain(make_vacuum(), math.exp(0.02))
        assert s.var_x == pytest.approx(0.5 * math.exp(0.04), rel=1e-15)
        assert s.var_p == pytest.approx(0.5 * math.exp(-0.04), rel=1e-15)

    @given(gaussian_states())
    def test_identity(self, s):
        assert squeeze_gain(s, 1.0) == s

    @given(gaussian_states(), st.floats(0.1, 10))
    def test_det_preserved(self, s, g):
        assert squeeze_gain(s, g).det == pytest.approx(s.det, rel=1e-10)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            squeeze_gain(make_vacuum(), 0.0)


class TestMirrorMix:
    def test_perfect_mirror(self, rng):
        from conftest import random_state

        sig, met = random_state(rng), make_squeezed(MeterSpec(Axis.X, METER_VAR))
        j = mirror_mix(sig, met, 1.0)
        np.testing.assert_allclose(j.signal().cov, sig.cov, atol=1e-15)
        np.testing.assert_allclose(j.signal().mean, sig.mean, atol=1e-15)
        np.testing.assert_allclose(j.meter().mean, -met.mean, atol=1e-15)
        np.testing.assert_allclose(j.meter().cov, met.cov, atol=1e-15)

    @pytest.mark.parametrize("R", [0.1, 0.5, 0.99, 1.0])
    def test_vacuum_invariant(self, R):
        j = mirror_mix(make_vacuum(), make_vacuum(), R)
        np.testing.assert_allclose(j.cov, 0.5 * np.eye(4), atol=1e-15)

    def test_signal_second_moment_against_sampling(self):
        expected = 0.4913966  # 0.99^2 * 0.5 + (1 - 0.99^2) * 0.5 e^-2
        meter = make_squeezed(MeterSpec(Axis.X, METER_VAR))
        j = mirror_mix(make_vacuum(), meter, 0.99)
        assert j.signal().var_x == pytest.approx(expected, abs=1e-7)
        # oracle: push 10^6 classical samples through the linear map
        rng = np.random.default_rng(7)
        n = 10**6
        samples = np.column_stack([
            rng.normal(0, math.sqrt(0.5), n), rng.normal(0, math.sqrt(0.5), n),
            rng.normal(0, math.sqrt(METER_VAR), n), rng.normal(0, math.sqrt(1 / (4 * METER_VAR)), n),
        ])
        out = samples @ mirror_matrix(0.99).T
        sample_cov = np.cov(out.T)
        se = np.sqrt((j.cov**2 + np.outer(np.diag(j.cov), np.diag(j.cov))) / n)
        assert np.all(np.abs(sample_cov - j.cov) < 5 * se + 1e-12)

    @pytest.mark.parametrize("R", [0.0, -0.5, 1.01])
    def test_rejects_bad_R(self, R):
        with pytest.raises(ValueError):
            mirror_mix(make_vacuum(), make_vacuum(), R)


@settings(max_examples=200)
@given(st.floats(1e-3, 1.0), st.floats(0.05, 20))
def test_symplectic_forms(R, g):
    S = mirror_matrix(R)
    np.testing.assert_allclose(S @ OMEGA_2 @ S.T, OMEGA_2, atol=1e-12)
    K = gain_matrix(g)
    np.testing.assert_allclose(K @ OMEGA_1 @ K.T, OMEGA_1, atol=1e-12)


@given(st.floats(0.05, 1.0), st.floats(0.02, 5), st.floats(0.2, 5.0), st.booleans())
def test_pure_inputs_give_pure_joint(R, sq, g, axis_x):
    sig = squeeze_gain(make_squeezed(MeterSpec(Axis.P, sq)), g)
    met = make_squeezed(MeterSpec(Axis.X if axis_x else Axis.P, 1 / (4 * sq) if axis_x else sq))
    j = mirror_mix(sig, met, R)
    assert np.linalg.det(j.cov) == pytest.approx(0.25**2, rel=1e-8)


class TestHomodyne:
    def test_product_state_is_untouched(self, rng):
        from conftest import random_state

        sig = random_state(rng)
        met = make_squeezed(MeterSpec(Axis.X, METER_VAR))
        cov = np.zeros((4, 4))
        cov[:2, :2], cov[2:, 2:] = sig.cov, met.cov
        j = JointState(np.r_[sig.mean, 0.0, 0.0], cov)
        for value in (-3.0, 0.0, 2.5):
            outcome, cond = homodyne_p_meter(j, outcome=value)
            assert outcome == value
            assert cond == sig

    def test_balanced_vacuum(self):
        j = mirror_mix(make_vacuum(), make_vacuum(), math.sqrt(0.5))
        _, cond = homodyne_p_meter(j, outcome=0.0)
        assert cond.var_p == pytest.approx(0.5, abs=1e-15)
        assert cond.var_x == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("R", [math.sqrt(0.5), 0.9, 0.99])
    @pytest.mark.parametrize("sig_var,meter_var", [(0.5, 0.5), (0.5, 1 / (4 * METER_VAR)), (2.0, 0.2)])
    def test_conditioning_identity_against_grid(self, R, sig_var, meter_var):
        T = math.sqrt(1 - R * R)
        sig = QuadratureState.from_variances(max(0.5, 1 / (4 * sig_var)), sig_var)
        met = QuadratureState.from_variances(max(0.5, 1 / (4 * meter_var)), meter_var)
        j = mirror_mix(sig, met, R)
        _, cond = homodyne_p_meter(j, outcome=0.37)
        formula = sig_var * meter_var / (T * T * sig_var + R * R * meter_var)
        assert cond.var_p == pytest.approx(formula, rel=1e-12)
        grid = grid_conditional_variance(j.cov[np.ix_([1, 3], [1, 3])], 0.37)
        assert abs(cond.var_p - grid) / grid < 1e-3

    def test_sampled_outcome_statistics(self):
        j = mirror_mix(make_vacuum(), make_squeezed(MeterSpec(Axis.X, METER_VAR)), 0.9)
        gen = np.random.default_rng(3)
        draws = np.array([homodyne_p_meter(j, rng=gen)[0] for _ in range(20000)])
        assert draws.var() == pytest.approx(j.cov[3, 3], rel=0.05)
        assert abs(draws.mean()) < 5 * math.sqrt(j.cov[3, 3] / 20000)

    def test_needs_exactly_one_source(self):
        j = mirror_mix(make_vacuum(), make_vacuum(), 0.9)
        with pytest.raises(ValueError):
            homodyne_p_meter(j)
        with pytest.raises(ValueError):
            homodyne_p_meter(j, rng=np.random.default_rng(), outcome=1.0)

    def test_degenerate_meter_rejected(self):
        cov = np.diag([0.5, 0.5, 0.5, 0.0])
        with pytest.raises(ValueError):
            homodyne_p_meter(JointState(np.zeros(4), cov), outcome=0.0)

    @given(gaussian_states(), gaussian_states(), st.floats(0.05, 1.0), st.floats(-5, 5))
    def test_conditioning_contracts(self, sig, met, R, value):
        j = mirror_mix(sig, met, R)
        _, cond = homodyne_p_meter(j, outcome=value)
        prior = j.signal()
        assert cond.var_x <= prior.var_x * (1 + 1e-12)
        assert cond.var_p <= prior.var_p * (1 + 1e-12)
        assert cond.is_physical()


class TestMirrorHomodyne:
    @given(gaussian_states(), gaussian_states(), st.floats(0.05, 0.999), st.floats(-5, 5))
    @settings(max_examples=200)
    def test_matches_post_mirror_conditioning(self, sig, met, R, value):
        ref_out, ref = homodyne_p_meter(mirror_mix(sig, met, R), outcome=value)
        out, cond = mirror_homodyne(sig, met, R, outcome=value)
        assert out == ref_out
        scale = max(1.0, np.abs(ref.cov).max())
        np.testing.assert_allclose(cond.cov, ref.cov, rtol=1e-9, atol=1e-12 * scale)
        np.testing.assert_allclose(cond.mean, ref.mean, rtol=1e-9, atol=1e-9)

    def test_gain_and_variance(self):
        sig = QuadratureState.from_variances(0.7, 0.4, 1.0, -0.5)
        met = make_squeezed(MeterSpec(Axis.X, METER_VAR))
        j = mirror_mix(sig, met, 0.95)
        k, var_m, cov = mirror_homodyne_gain(sig, met, 0.95)
        assert var_m == pytest.approx(j.cov[3, 3], rel=1e-14)
        np.testing.assert_allclose(k, j.cov[:2, 3] / j.cov[3, 3], rtol=1e-12)

    def test_strong_squeezing_stays_pure(self):
        # post-mirror subtraction loses all precision here; the pre-mirror form does not
        state = make_vacuum()
        R, G = 0.99, math.exp(0.02)
        for _ in range(2000):
            state = mirror_homodyne(squeeze_gain(state, G), make_vacuum(), R, outcome=0.0)[1]
        assert state.var_p < 1e-17
        assert state.det == pytest.approx(0.25, rel=1e-12)

    def test_needs_exactly_one_source(self):
        with pytest.raises(ValueError):
            mirror_homodyne(make_vacuum(), make_vacuum(), 0.9)


class TestOverlap:
    def test_values(self):
        v = make_vacuum()
        assert overlap_fidelity(v, v) == pytest.approx(1.0, abs=1e-15)
        wide = QuadratureState.from_variances(1.5, 0.5)
        assert overlap_fidelity(v, wide) == pytest.approx(2**-0.5, abs=1e-15)
        sq = QuadratureState.from_variances(0.5 * math.exp(5), 0.5 * math.exp(-5))
        assert overlap_fidelity(sq, sq) == pytest.approx(1.0, abs=1e-12)

    def test_against_wigner_integral(self):
        a = QuadratureState.from_variances(0.5, 0.5)
        b = QuadratureState(1.0, -0.5, [[1.2, 0.3], [0.3, 0.8]])
        oracle = wigner_overlap(a.mean, a.cov, b.mean, b.cov)
        assert overlap_fidelity(a, b) == pytest.approx(oracle, rel=1e-8)
        wide = QuadratureState.from_variances(1.5, 0.5)
        assert overlap_fidelity(a, wide) == pytest.approx(
            wigner_overlap(a.mean, a.cov, wide.mean, wide.cov), rel=1e-8
        )

    @given(gaussian_states(), gaussian_states())
    def test_range_and_symmetry(self, a, b):
        f = overlap_fidelity(a, b)
        assert 0 <= f <= 1
        assert f == pytest.approx(overlap_fidelity(b, a), rel=1e-12)

    @given(st.floats(0.05, 5), st.floats(-3, 3), st.floats(-3, 3))
    def test_pure_self_overlap(self, sq, mx, mp):
        s = displace(make_squeezed(MeterSpec(Axis.X, sq)), mx, mp)
        assert overlap_fidelity(s, s) == pytest.approx(1.0, abs=1e-12)


def test_amplifier():
    out = amplify(make_vacuum(), 2.0)
    np.testing.assert_allclose(out.cov, np.diag([3.5, 3.5]))
    with pytest.raises(ValueError):
        amplify(make_vacuum(), 0.5)


class TestDecibels:
    def test_values(self):
        assert variance_to_dB(0.5) == 0
        assert variance_to_dB(0.5 * math.exp(-2)) == pytest.approx(-8.6859, abs=1e-4)
        assert variance_to_dB(0.25) == pytest.approx(-3.0103, abs=1e-4)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            variance_to_dB(0.0)
