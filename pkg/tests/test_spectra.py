# =====================================================================
# Spectra, resolvent norms, frequency windows, growth-exponent fits
# =====================================================================

import numpy as np
import pytest
import scipy.linalg as la

from bresselab.kernel import KernelSpec
from bresselab.model import BoundaryCondition, PhysicalParams
from bresselab.discretize import (
    assemble_generator,
    assemble_timoshenko_generator,
    build_memory_grid,
    build_spatial_grid,
)
from bresselab.spectra import (
    ABSCISSA_TRUST_FRACTION,
    ResolventScan,
    abscissa_window,
    compute_spectrum,
    envelope_anchors,
    fit_growth_exponent,
    match_branches,
    resolution_cap,
    resolvent_scan,
    scan_frequencies,
    window_spectrum,
    windowed_abscissa,
)

ALL_ONES = PhysicalParams(rho1=1, rho2=1, k1=1, k2=1, k3=1, ell=1.0)


def make_gen(params=None, a=0.5, nx=10, ns=12, bc="ddd"):
    params = params or ALL_ONES
    kern = KernelSpec(a, 1.0)
    return assemble_generator(
        params, kern, BoundaryCondition.from_string(bc),
        build_spatial_grid(params.length, nx), build_memory_grid(kern, ns=ns),
    )


class TestComputeSpectrum:
    def test_agrees_with_plain_eigensolver(self):
        # the Cholesky similarity transform must not move eigenvalues
        gen = make_gen(nx=8, ns=8)
        rep = compute_spectrum(gen)
        plain = la.eigvals(gen.A.toarray())
        scale = np.abs(plain).max()
        for v in plain:
            d = np.min(np.abs(rep.eigenvalues - v))
            assert d <= 1e-8 * scale, f"eigenvalue {v} missing (gap {d:.2e})"

    def test_left_half_plane_and_conjugate_symmetry(self):
        gen = make_gen()
        rep = compute_spectrum(gen)
        assert rep.symmetrized
        assert rep.max_real_part <= 1e-8
        vals = rep.eigenvalues
        for v in vals[np.abs(vals.imag) > 1e-9]:
            d = np.min(np.abs(vals - v.conjugate()))
            assert d <= 1e-8 * max(1.0, abs(v)), f"conjugate of {v} missing"

    def test_conservative_spectrum_is_imaginary(self):
        gen = make_gen(a=0.0)
        rep = compute_spectrum(gen)
        assert np.max(np.abs(rep.eigenvalues.real)) < 1e-10

    def test_dimension_cap_enforced(self):
        gen = make_gen(nx=400, ns=48)
        assert gen.dim > 8000
        with pytest.raises(ValueError, match="window_spectrum"):
            compute_spectrum(gen)


class TestWindowSpectrum:
    def test_matches_dense_inside_window(self):
        gen = make_gen(nx=12, ns=12)
        dense = compute_spectrum(gen).eigenvalues
        im_max = 25.0
        win = window_spectrum(gen, im_max=im_max, n_shifts=6, k_per_shift=120).eigenvalues
        # oscillatory modes only: purely real overdamped history modes
        # sit in a dense cluster and need k_per_shift ~ dim to enumerate
        targets = dense[(np.abs(dense.imag) <= im_max)
                        & (np.abs(dense.imag) >= 1.0) & (dense.real >= -2.0)]
        assert len(targets) > 10
        for v in targets:
            d = np.min(np.abs(win - v))
            assert d <= 1e-6 * max(1.0, abs(v)), (
                f"windowed sweep missed {v} (gap {d:.2e})"
            )


class TestFrequencyWindows:
    def test_resolution_cap_slowest_family(self):
        gen = make_gen(nx=10)
        want = 0.5 * np.pi / gen.grid.h
        assert resolution_cap(gen) == pytest.approx(want, rel=1e-12)
        slow = make_gen(PhysicalParams(rho1=4, rho2=1, k1=1, k2=1, k3=1, ell=1.0))
        assert resolution_cap(slow) == pytest.approx(0.5 * want, rel=1e-12)

    def test_abscissa_window_tracks_undamped_families(self):
        gen = make_gen(nx=10)
        want = ABSCISSA_TRUST_FRACTION * np.pi / gen.grid.h
        assert abscissa_window(gen) == pytest.approx(want, rel=1e-12)
        # making the directly damped shear family slow must NOT shrink
        # the window; making the vertical family slow must
        shear_slow = make_gen(PhysicalParams(rho1=1, rho2=9, k1=1, k2=1, k3=1, ell=1.0))
        assert abscissa_window(shear_slow) == pytest.approx(want, rel=1e-12)
        vert_slow = make_gen(PhysicalParams(rho1=4, rho2=1, k1=1, k2=1, k3=1, ell=1.0))
        assert abscissa_window(vert_slow) == pytest.approx(0.5 * want, rel=1e-12)
        # with the kernel off the shear family joins the undamped set
        shear_slow_off = make_gen(
            PhysicalParams(rho1=1, rho2=9, k1=1, k2=1, k3=1, ell=1.0), a=0.0)
        assert abscissa_window(shear_slow_off) == pytest.approx(want / 3, rel=1e-12)

    def test_windowed_abscissa_bounded_by_raw(self):
        gen = make_gen()
        rep = compute_spectrum(gen)
        wa = windowed_abscissa(gen, rep.eigenvalues)
        assert wa <= rep.max_real_part + 1e-15
        assert wa < 0.0

    def test_empty_window_rejected(self):
        gen = make_gen()
        far = np.array([1j * 1e9])
        with pytest.raises(ValueError):
            windowed_abscissa(gen, far)


class TestResolventScan:
    def test_matches_dense_svd_oracle(self):
        gen = make_gen(nx=8, ns=8)
        lam = np.array([3.0, 7.0, 12.0])
        scan = resolvent_scan(gen, lam)
        a = gen.A.toarray()
        r = la.cholesky(gen.B.toarray(), lower=False)
        rinv = la.inv(r)
        eye = np.eye(gen.dim)
        for j, lv in enumerate(lam):
            m = r @ (1j * lv * eye - a) @ rinv
            want = 1.0 / la.svdvals(m)[-1]
            got = scan.inv_sigma_min[j]
            assert got == pytest.approx(want, rel=1e-3), (
                f"lam={lv}: inverse iteration {got} vs svd {want}"
            )

    def test_cap_enforced(self):
        gen = make_gen(nx=10)
        beyond = resolution_cap(gen) * 1.01
        with pytest.raises(ValueError, match="cap"):
            resolvent_scan(gen, np.array([beyond]))

    def test_records_iteration_counts(self):
        gen = make_gen(nx=8, ns=8)
        scan = resolvent_scan(gen, np.array([5.0]))
        assert scan.iterations[0] >= 1
        assert scan.lam_resolution_cap == pytest.approx(resolution_cap(gen))


class TestGrowthFit:
    @staticmethod
    def synthetic(vals, lam=None):
        lam = np.linspace(5.0, 50.0, len(vals)) if lam is None else lam
        return ResolventScan(
            lam=lam, inv_sigma_min=np.asarray(vals, dtype=float),
            iterations=np.ones(len(lam), dtype=int), lam_resolution_cap=100.0,
        )

    def test_recovers_quadratic_growth(self):
        lam = np.linspace(5.0, 50.0, 40)
        fit = fit_growth_exponent(self.synthetic(lam ** 2, lam))
        assert fit.exponent == pytest.approx(2.0, abs=1e-10)
        assert not fit.used_peaks  # monotone scans carry no interior maxima

    def test_flat_scan_gives_zero(self):
        fit = fit_growth_exponent(self.synthetic(np.full(30, 4.0)))
        assert fit.exponent == pytest.approx(0.0, abs=1e-12)

    def test_envelope_uses_peaks(self):
        lam = np.linspace(5.0, 60.0, 400)
        vals = lam * (1.5 + np.cos(lam))
        fit = fit_growth_exponent(self.synthetic(vals, lam))
        assert fit.used_peaks
        assert fit.exponent == pytest.approx(1.0, abs=0.15), (
            f"envelope slope {fit.exponent} should track the peak line"
        )

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError):
            fit_growth_exponent(self.synthetic(np.ones(5)))

    def test_window_restriction(self):
        lam = np.linspace(1.0, 100.0, 200)
        vals = np.where(lam < 50, lam, lam ** 2 / 50)
        fit = fit_growth_exponent(self.synthetic(vals, lam), lam_min=1.0, lam_max=40.0)
        assert fit.exponent == pytest.approx(1.0, abs=1e-6)

    def test_anchor_samples_override_peak_detection(self):
        # peaks at the anchors follow lam^2; filler sits on a flat floor
        # that would otherwise drag the envelope slope toward zero
        anchors = np.array([6.0, 11.0, 19.0, 33.0, 55.0])
        lam = np.sort(np.concatenate([anchors, np.linspace(5.0, 60.0, 25)]))
        vals = np.where(np.isin(lam, anchors), lam ** 2, 3.0)
        fit = fit_growth_exponent(self.synthetic(vals, lam), peak_lam=anchors)
        assert fit.used_peaks
        assert fit.n_points == len(anchors)
        assert fit.exponent == pytest.approx(2.0, abs=1e-10), (
            f"anchored fit should read the lam^2 peaks, got {fit.exponent}"
        )

    def test_anchor_fit_respects_window(self):
        anchors = np.array([6.0, 11.0, 19.0, 33.0, 44.0, 55.0])
        lam = np.sort(np.concatenate([anchors, np.linspace(5.0, 60.0, 24)]))
        vals = np.where(np.isin(lam, anchors), np.where(lam < 40, lam, lam ** 3), 3.0)
        fit = fit_growth_exponent(self.synthetic(vals, lam), lam_max=40.0, peak_lam=anchors)
        assert fit.n_points == 4
        assert fit.exponent == pytest.approx(1.0, abs=1e-10)

    def test_too_few_anchors_rejected(self):
        anchors = np.array([6.0, 11.0, 19.0])
        lam = np.sort(np.concatenate([anchors, np.linspace(5.0, 60.0, 27)]))
        with pytest.raises(ValueError):
            fit_growth_exponent(self.synthetic(np.ones(30), lam), peak_lam=anchors)

    def test_majorant_ignores_damping_bumps(self):
        # a mid-window stretch where every mode is better damped dents the
        # raw peak heights; the sup the growth hypotheses bound is already
        # saturated, so the envelope slope must stay at zero
        anchors = np.array([6.0, 12.0, 24.0, 48.0])
        lam = np.sort(np.concatenate([anchors, np.linspace(5.0, 60.0, 26)]))
        heights = {6.0: 100.0, 12.0: 100.0, 24.0: 30.0, 48.0: 100.0}
        vals = np.array([heights.get(l, 3.0) for l in lam])
        fit = fit_growth_exponent(self.synthetic(vals, lam), peak_lam=anchors)
        assert fit.exponent == pytest.approx(0.0, abs=1e-12), (
            f"saturated envelope read as slope {fit.exponent}"
        )

    def test_shrinking_envelope_reads_as_bounded(self):
        # growth exponent witnesses sup-growth; a decaying peak line is
        # bounded, hence exponent 0, not a negative slope
        anchors = np.array([6.0, 12.0, 24.0, 48.0])
        lam = np.sort(np.concatenate([anchors, np.linspace(5.0, 60.0, 26)]))
        heights = {6.0: 100.0, 12.0: 80.0, 24.0: 60.0, 48.0: 40.0}
        vals = np.array([heights.get(l, 3.0) for l in lam])
        fit = fit_growth_exponent(self.synthetic(vals, lam), peak_lam=anchors)
        assert fit.exponent == pytest.approx(0.0, abs=1e-12)


class TestEnvelopeAnchors:
    def test_picks_least_damped_per_band(self):
        # two modes per band of width 10; the weakly damped one must win
        vals = np.array([
            -1.0 + 6.0j, -1e-3 + 7.0j,
            -1e-4 + 16.0j, -1.0 + 17.0j,
            -1.0 + 30.0j, -1e-5 + 31.0j,
        ])
        got = envelope_anchors(vals, 5.0, 45.0, n_bands=4)
        assert 7.0 in got and 16.0 in got and 31.0 in got
        assert 6.0 not in got and 17.0 not in got and 30.0 not in got

    def test_empty_bands_skipped_and_conjugates_ignored(self):
        vals = np.array([-0.1 + 6.0j, -0.1 - 6.0j, -0.2 + 50.0j])
        got = envelope_anchors(vals, 5.0, 60.0, n_bands=6)
        assert got.tolist() == [6.0, 50.0]

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            envelope_anchors(np.array([1j]), 5.0, 5.0)
        with pytest.raises(ValueError):
            envelope_anchors(np.array([1j]), 5.0, 50.0, n_bands=2)

    def test_scan_frequencies_pads_to_count(self):
        anchors = np.array([7.3, 19.1, 33.7])
        lam = scan_frequencies(anchors, 5.0, 50.0, 20)
        assert lam.shape == (20,)
        assert np.all(np.diff(lam) > 0), "scan frequencies must be strictly increasing"
        for a in anchors:
            assert a in lam
        assert lam[0] == 5.0 and lam[-1] == 50.0

    def test_scan_frequencies_handles_collisions(self):
        # anchors sitting exactly on filler points must not shrink the count
        anchors = np.array([5.0, 27.5, 50.0])
        lam = scan_frequencies(anchors, 5.0, 50.0, 10)
        assert lam.shape == (10,)
        assert np.all(np.diff(lam) > 0)

    def test_anchor_budget_enforced(self):
        with pytest.raises(ValueError):
            scan_frequencies(np.linspace(5.0, 50.0, 30), 5.0, 50.0, 20)


class TestMatchBranches:
    def test_tags_follow_predicted_frequencies(self):
        p = PhysicalParams(rho1=1, rho2=1, k1=1, k2=2, k3=1)
        kern = KernelSpec(0.5, 1.0)
        gen = assemble_timoshenko_generator(
            p, kern, build_spatial_grid(1.0, 60), build_memory_grid(kern, ns=16))
        rep = compute_spectrum(gen)
        tagged = match_branches(rep, p, kern, im_max=30.0)
        hits = [(v, t) for v, t in zip(tagged.eigenvalues, tagged.branch_tags)
                if t is not None and 1.0 <= v.imag <= 30.0]
        # interleaved branch predictions leave only a handful unambiguous
        assert len(hits) >= 4
        for v, (branch, n, pred) in hits:
            assert abs(abs(v.imag) - pred) <= 0.1 * pred, (
                f"tag ({branch},{n}) predicts {pred}, eigenvalue at {v.imag}"
            )

    def test_curved_or_thermal_rejected(self):
        gen = make_gen()
        rep = compute_spectrum(gen)
        with pytest.raises(ValueError):
            match_branches(rep, gen.params, gen.kernel)
