# =====================================================================
# Implicit-midpoint integrator: conservation, accuracy, history collapse
# =====================================================================

import numpy as np
import pytest
import scipy.linalg as la

from bresselab.kernel import KernelSpec
from bresselab.model import BoundaryCondition, PhysicalParams
from bresselab.discretize import assemble_generator, build_memory_grid, build_spatial_grid
from bresselab.simulate import (
    collapsed_history_gap,
    default_dt,
    initial_state,
    simulate,
    state_from_fields,
)

ALL_ONES = PhysicalParams(rho1=1, rho2=1, k1=1, k2=1, k3=1, ell=1.0)


def make_gen(params=None, a=0.5, nx=10, ns=12, bc="ddd"):
    params = params or ALL_ONES
    kern = KernelSpec(a, 1.0)
    return assemble_generator(
        params, kern, BoundaryCondition.from_string(bc),
        build_spatial_grid(params.length, nx), build_memory_grid(kern, ns=ns),
    )


class TestInitialStates:
    def test_history_starts_empty(self):
        gen = make_gen()
        for kind in ("smooth_bump", "eigenmode", "random"):
            u = initial_state(gen, kind)
            assert np.all(u[gen.layout["eta"]] == 0.0), kind

    def test_random_is_seeded(self):
        gen = make_gen()
        assert np.array_equal(initial_state(gen, "random", seed=7),
                              initial_state(gen, "random", seed=7))
        assert not np.array_equal(initial_state(gen, "random", seed=7),
                                  initial_state(gen, "random", seed=8))

    def test_bad_inputs_rejected(self):
        gen = make_gen()
        with pytest.raises(ValueError):
            initial_state(gen, "sawtooth")
        with pytest.raises(ValueError):
            initial_state(gen, "eigenmode", index=0)

    def test_state_from_fields_checks(self):
        gen = make_gen()
        u = state_from_fields(gen, phi=lambda x: np.sin(np.pi * x))
        assert np.allclose(u[gen.layout["phi"]],
                           np.sin(np.pi * gen.grid.nodes_dirichlet))
        with pytest.raises(ValueError, match="theta"):
            state_from_fields(gen, theta=lambda x: x)
        with pytest.raises(ValueError, match="s=0|s = 0|zero lag"):
            state_from_fields(gen, eta=lambda x, s: np.sin(np.pi * x))

    def test_eta_sampling_is_layed_out_slice_major(self):
        gen = make_gen(ns=12)
        u = state_from_fields(gen, eta=lambda x, s: s * np.sin(np.pi * x))
        block = u[gen.layout["eta"]].reshape(gen.ns_active, gen.n_eta)
        x = gen.grid.nodes_dirichlet
        for k in (0, 5):
            s_k = gen.mgrid.s[k + 1]
            assert np.allclose(block[k], s_k * np.sin(np.pi * x))


class TestConservativeLimit:
    def test_energy_constant_without_damping(self):
        gen = make_gen(a=0.0)
        u0 = initial_state(gen, "smooth_bump")
        trace = simulate(gen, u0, T=20.0, dt=0.05)
        e0 = trace.E[0]
        drift = np.max(np.abs(trace.E - e0)) / e0
        assert drift < 1e-10, f"conservative energy drift {drift:.3e}"
        assert np.all(trace.mem_rate == 0.0)
        assert np.all(trace.heat_rate == 0.0)


class TestAccuracy:
    def test_matches_matrix_exponential(self):
        gen = make_gen(nx=8, ns=8)
        u0 = initial_state(gen, "smooth_bump")
        T = 0.5
        exact = la.expm(gen.A.toarray() * T) @ u0
        got = simulate(gen, u0, T=T, dt=5e-4).final_state
        err = np.linalg.norm(got - exact) / np.linalg.norm(exact)
        assert err < 1e-5, f"trajectory error vs expm: {err:.3e}"

    def test_second_order_in_dt(self):
        gen = make_gen(nx=8, ns=8)
        u0 = initial_state(gen, "random", seed=2)
        T = 1.0
        exact = la.expm(gen.A.toarray() * T) @ u0
        errs = [np.linalg.norm(simulate(gen, u0, T=T, dt=dt).final_state - exact)
                for dt in (0.02, 0.01, 0.005)]
        r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
        assert 3.3 < r1 < 4.7 and 3.3 < r2 < 4.7, (
            f"dt-halving error ratios {r1:.2f}, {r2:.2f} not ~4"
        )

    def test_zero_horizon_returns_single_sample(self):
        gen = make_gen()
        u0 = initial_state(gen, "smooth_bump")
        trace = simulate(gen, u0, T=0.0)
        assert len(trace.t) == 1 and trace.t[0] == 0.0
        assert np.array_equal(trace.final_state, u0)

    def test_bad_arguments_rejected(self):
        gen = make_gen()
        u0 = initial_state(gen, "smooth_bump")
        with pytest.raises(ValueError):
            simulate(gen, u0, T=-1.0)
        with pytest.raises(ValueError):
            simulate(gen, u0, T=1.0, stride=0)
        with pytest.raises(ValueError):
            simulate(gen, u0[:-1], T=1.0)


class TestMonotonicity:
    @pytest.mark.parametrize("bc,thermal", [("ddd", False), ("dddd", True)])
    def test_energy_never_increases(self, bc, thermal):
        if thermal:
            p = PhysicalParams(rho1=1, rho2=3, k1=1, k2=1, k3=1, ell=1.0,
                               thermal=True, rho3=1, delta=1, tau=2, beta=1)
        else:
            p = ALL_ONES
        gen = make_gen(params=p, a=0.25 if thermal else 0.5, bc=bc)
        u0 = initial_state(gen, "random", seed=11)
        trace = simulate(gen, u0, T=10.0, dt=0.05)
        ratio = trace.E[1:] / trace.E[:-1]
        assert np.all(ratio <= 1.0 + 1e-12), (
            f"energy increased: max step ratio {ratio.max():.15f}"
        )

    def test_default_dt_scales_with_h(self):
        # Dirichlet spacing is L/(nx+1), so 10 -> 21 nodes halves h
        g1, g2 = make_gen(nx=10), make_gen(nx=21)
        assert default_dt(g1) == pytest.approx(2 * default_dt(g2), rel=1e-12)


class TestHistoryCollapse:
    def test_gap_shrinks_first_order_in_ds(self):
        # the collapsed single-field reduction is exact for the
        # exponential kernel; the ladder converges to it at O(ds)
        p = PhysicalParams(rho1=1, rho2=1, k1=1, k2=2, k3=1, ell=1.0)
        gaps = []
        for ns in (64, 128):
            gen = make_gen(params=p, nx=8, ns=ns)
            u0 = initial_state(gen, "smooth_bump")
            gaps.append(collapsed_history_gap(gen, u0, T=5.0, dt=0.02))
        ratio = gaps[0] / gaps[1]
        assert gaps[1] < gaps[0], f"gaps {gaps} not decreasing"
        assert 1.5 < ratio < 2.8, f"ds-halving gap ratio {ratio:.2f} not ~2"

    def test_rejects_nonzero_history_start(self):
        gen = make_gen(nx=8, ns=16)
        u0 = state_from_fields(
            gen, phi=lambda x: np.sin(np.pi * x),
            eta=lambda x, s: s * np.sin(np.pi * x),
        )
        with pytest.raises(ValueError):
            collapsed_history_gap(gen, u0, T=1.0, dt=0.05)
