import numpy as np
import pytest

from vortexlab.grid import GridSpec
from vortexlab.fields import ScalarField, VectorField, max_divergence
from vortexlab.solver import (
    BoussinesqState,
    CflError,
    NonFiniteStateError,
    StepperConfig,
    initial_condition,
    kinetic_energy,
    scalar_l2_norm,
    spectral_tail_ratio,
    step_boussinesq,
    step_euler,
)


class TestInitialConditions:
    def test_taylor_green_2d_divergence(self):
        st = initial_condition("taylor-green-2d", GridSpec(2, 32))
        worst, _ = max_divergence(st.u)
        assert worst <= 1e-12

    def test_taylor_green_3d_energy_closed_form(self):
        st = initial_condition("taylor-green-3d", GridSpec(3, 16))
        assert kinetic_energy(st.u) == pytest.approx((2 * np.pi) ** 3 / 8.0, rel=1e-12)

    def test_random_band_limited_reproducible(self):
        g = GridSpec(3, 16)
        a = initial_condition("random-band-limited", g, seed=42)
        b = initial_condition("random-band-limited", g, seed=42)
        assert np.array_equal(a.u.values, b.u.values)
        worst, _ = max_divergence(a.u)
        assert worst <= 1e-12

    def test_random_band_limited_needs_seed(self):
        with pytest.raises(ValueError, match="seed"):
            initial_condition("random-band-limited", GridSpec(2, 16))

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown initial condition"):
            initial_condition("vortex-soup", GridSpec(2, 16))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            initial_condition("taylor-green-3d", GridSpec(2, 16))
        with pytest.raises(ValueError):
            initial_condition("boussinesq-bubble", GridSpec(3, 16))


class TestEulerStepping:
    def test_rest_state_unchanged(self):
        g = GridSpec(3, 16)
        st = initial_condition("random-band-limited", g, seed=1, amplitude=0.0)
        new = step_euler(st, StepperConfig(dt=0.01))
        assert np.array_equal(new.u.values, st.u.values)

    def test_embedded_2d_flow_stays_planar(self):
        st = initial_condition("taylor-green-2d-embedded", GridSpec(3, 16))
        cfg = StepperConfig(dt=0.01)
        for _ in range(10):
            st = step_euler(st, cfg)
        z_variation = np.max(np.abs(st.u.values - st.u.values[:, :, :, :1]))
        assert z_variation <= 1e-13
        assert np.max(np.abs(st.u.values[2])) <= 1e-13

    def test_divergence_free_after_steps(self):
        st = initial_condition("taylor-green-3d", GridSpec(3, 16))
        cfg = StepperConfig(dt=0.01)
        for _ in range(5):
            st = step_euler(st, cfg)
        worst, _ = max_divergence(st.u)
        assert worst <= 1e-10

    def test_energy_conservation_smoke(self):
        st = initial_condition("taylor-green-3d", GridSpec(3, 16))
        e0 = kinetic_energy(st.u)
        cfg = StepperConfig(dt=0.01)
        for _ in range(20):
            st = step_euler(st, cfg)
        assert abs(kinetic_energy(st.u) - e0) / e0 <= 1e-8

    def test_cfl_guard_trips(self):
        st = initial_condition("taylor-green-3d", GridSpec(3, 16), amplitude=5.0)
        with pytest.raises(CflError, match="exceeds"):
            step_euler(st, StepperConfig(dt=0.5, cfl_guard=0.5))

    def test_blowup_detected(self):
        st = initial_condition("taylor-green-3d", GridSpec(3, 16))
        cfg = StepperConfig(dt=1e3)
        with np.errstate(all="ignore"), pytest.raises(NonFiniteStateError):
            for _ in range(5):
                st = step_euler(st, cfg)

    def test_temporal_self_convergence(self):
        g = GridSpec(3, 16)

        def advance(dt, t_end=0.08):
            st = initial_condition("taylor-green-3d", g)
            cfg = StepperConfig(dt=dt)
            for _ in range(round(t_end / dt)):
                st = step_euler(st, cfg)
            return st.u.values

        ref = advance(0.0025)
        err_coarse = np.max(np.abs(advance(0.02) - ref))
        err_fine = np.max(np.abs(advance(0.01) - ref))
        assert err_coarse / err_fine >= 12.0  # fourth-order scheme, ~16 expected


class TestBoussinesqStepping:
    def test_taylor_green_with_passive_theta_is_steady(self):
        st = initial_condition("taylor-green-2d", GridSpec(2, 32))
        u0 = st.u.values.copy()
        cfg = StepperConfig(dt=0.01)
        for _ in range(50):
            st = step_boussinesq(st, cfg)
        assert np.max(np.abs(st.u.values - u0)) <= 1e-12

    def test_uniform_buoyancy_cannot_accelerate(self):
        g = GridSpec(2, 16)
        st = BoussinesqState(
            time=0.0,
            u=VectorField(g, np.zeros((2,) + g.shape)),
            theta=ScalarField(g, np.full(g.shape, 0.7)),
        )
        cfg = StepperConfig(dt=0.01)
        for _ in range(5):
            st = step_boussinesq(st, cfg)
        assert np.max(np.abs(st.u.values)) == 0.0
        assert np.max(np.abs(st.theta.values - 0.7)) == 0.0

    def test_gradient_buoyancy_keeps_rest_state(self):
        # theta depending on the vertical coordinate only is a pure gradient force
        g = GridSpec(2, 32)
        x = g.coords
        st = BoussinesqState(
            time=0.0,
            u=VectorField(g, np.zeros((2,) + g.shape)),
            theta=ScalarField(g, np.sin(x[1])),
        )
        cfg = StepperConfig(dt=0.01)
        for _ in range(10):
            st = step_boussinesq(st, cfg)
        assert np.max(np.abs(st.u.values)) <= 1e-14

    def test_bubble_theta_norms_conserved(self):
        st = initial_condition("boussinesq-bubble", GridSpec(2, 32))
        l2_0 = scalar_l2_norm(st.theta)
        lo, hi = st.theta.values.min(), st.theta.values.max()
        cfg = StepperConfig(dt=0.005)
        for _ in range(60):
            st = step_boussinesq(st, cfg)
        assert abs(scalar_l2_norm(st.theta) - l2_0) / l2_0 <= 1e-9
        assert st.theta.values.max() <= hi + 1e-6
        assert st.theta.values.min() >= lo - 1e-6

    def test_theta_transport_spins_up_flow(self):
        st = initial_condition("boussinesq-bubble", GridSpec(2, 32))
        cfg = StepperConfig(dt=0.01)
        for _ in range(20):
            st = step_boussinesq(st, cfg)
        assert kinetic_energy(st.u) > 1e-4


class TestSpectralTail:
    def test_low_mode_field_has_tiny_tail(self):
        g = GridSpec(2, 32)
        st = initial_condition("taylor-green-2d", g)
        assert spectral_tail_ratio(g, st.u.spectral) <= 1e-20

    def test_energy_in_outer_band_flags(self):
        g = GridSpec(2, 32)
        coeffs = np.zeros(g.shape, dtype=complex)
        k_idx = int(0.9 * g.k_cutoff)  # inside the retained band, outer part
        coeffs[k_idx, 0] = 1.0
        assert spectral_tail_ratio(g, coeffs[None]) == pytest.approx(1.0)

    def test_mixed_spectrum_ratio(self):
        g = GridSpec(2, 32)
        coeffs = np.zeros(g.shape, dtype=complex)
        coeffs[1, 0] = 10.0
        coeffs[int(0.9 * g.k_cutoff), 0] = 1.0
        ratio = spectral_tail_ratio(g, coeffs[None])
        assert ratio == pytest.approx(1.0 / 101.0, rel=1e-12)


def test_stepper_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(dt=0.0)
    with pytest.raises(ValueError):
        StepperConfig(dt=0.1, cfl_guard=-1.0)
