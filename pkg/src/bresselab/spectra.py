"""Discrete spectra and resolvent norms in the energy metric.

The generator is dissipative in the inner product <u, v>_B, so before
calling a dense eigensolver we similarity-transform with the Cholesky
factor of B.  The transformed matrix has numerical range in the closed
left half-plane; QR-algorithm backward stability then guarantees that
computed real parts cannot stray right of the axis by more than a small
multiple of machine precision times ||A||, which is what makes the
"max Re <= 1e-8" checks meaningful rather than wishful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import eigs, splu

from .discretize import Generator
from .model import wave_speeds

# Largest dimension fed to the dense eigensolver.
DENSE_DIM_CAP = 8000


@dataclass
class SpectrumReport:
    """Eigenvalues of one assembled generator, sorted by |Im| then Re."""

    eigenvalues: np.ndarray
    max_real_part: float
    dim: int
    symmetrized: bool
    branch_tags: list | None = None


def _sorted_eigs(vals: np.ndarray) -> np.ndarray:
    order = np.lexsort((vals.real, vals.imag, np.abs(vals.imag)))
    return vals[order]


def compute_spectrum(gen: Generator) -> SpectrumReport:
    """All eigenvalues of the generator by a dense solve.

    Refuses dimensions beyond DENSE_DIM_CAP; use window_spectrum with a
    shift list for bigger assemblies.  If the energy Gram matrix is only
    semidefinite (the Neumann-shear-and-longitudinal variant has a
    zero-energy mean mode) the transform is skipped and the plain
    eigenvalues are returned with symmetrized=False.
    """
    n = gen.dim
    if n > DENSE_DIM_CAP:
        raise ValueError(
            f"dimension {n} exceeds the dense eigensolver cap {DENSE_DIM_CAP}; "
            "use window_spectrum instead"
        )
    a = gen.A.toarray()
    b = gen.B.toarray()
    try:
        r = la.cholesky(b, lower=False)
        symmetrized = True
    except la.LinAlgError:
        symmetrized = False
    if symmetrized:
        ra = r @ a
        tilde = la.solve_triangular(r.T, ra.T, lower=True).T
        vals = la.eigvals(tilde)
    else:
        vals = la.eigvals(a)
    vals = _sorted_eigs(vals)
    return SpectrumReport(
        eigenvalues=vals,
        max_real_part=float(np.max(vals.real)),
        dim=n,
        symmetrized=symmetrized,
    )


def spectral_abscissa(gen: Generator) -> float:
    return compute_spectrum(gen).max_real_part


def window_spectrum(
    gen: Generator,
    im_max: float,
    re_min: float = -5.0,
    n_shifts: int = 8,
    k_per_shift: int = 40,
    im_min: float = 0.0,
    real_shift: bool = True,
    tol: float = 0.0,
    shifts: list[complex] | None = None,
) -> SpectrumReport:
    """Eigenvalues with im_min <= |Im| <= im_max by shift-inverted Arnoldi.

    Deterministic: fixed shift ladder on the imaginary axis (plus one
    real shift for overdamped modes unless real_shift is off), fixed
    start vector.  Duplicates from overlapping windows are merged;
    conjugates are added so the report looks like the dense one.

    Raising im_min (and dropping the real shift) keeps the sweep away
    from the memory-transport cluster near the real axis: those
    eigenvalues are packed thousands deep in a tiny disc, and any shift
    whose k-th nearest eigenvalue falls inside the cluster stalls the
    Arnoldi restarts indefinitely.  tol relaxes the ARPACK convergence
    target from machine precision for the same reason.  Callers who
    know where the wanted modes sit (for example from characteristic
    root predictions) can pass an explicit shift list instead of the
    ladder and keep k_per_shift small.
    """
    n = gen.dim
    # Complex cast is load-bearing: ARPACK cannot recover eigenvalues of a
    # real operator from a complex-shifted run unless the factorization is
    # done in complex arithmetic (the real-OP path returns unusable zeros
    # when eigenvectors are not requested).
    a = gen.A.tocsc().astype(complex)
    if shifts is None:
        shifts = [complex(re_min / 4.0, s) for s in np.linspace(im_min, im_max, n_shifts)]
        if real_shift:
            shifts.append(complex(re_min / 2.0, 0.0))
    else:
        shifts = [complex(s) for s in shifts]
    v0 = np.full(n, 1.0) + 1e-3 * np.sin(np.arange(n))
    found: list[complex] = []
    for sig in shifts:
        try:
            vals = eigs(
                a,
                k=min(k_per_shift, n - 2),
                sigma=sig,
                which="LM",
                v0=v0,
                return_eigenvectors=False,
                maxiter=3000,
                tol=tol,
            )
        except Exception:
            continue
        found.extend(complex(v) for v in vals)
    kept: list[complex] = []
    for v in found:
        if v.imag < -1e-9:
            v = v.conjugate()
        if not (v.real >= re_min - 1.0 and abs(v.imag) <= im_max * 1.05 + 1.0):
            continue
        if abs(v.imag) < im_min - 1e-9:
            continue
        if any(abs(v - u) <= 1e-8 * max(1.0, abs(u)) for u in kept):
            continue
        kept.append(v)
    full = []
    for v in kept:
        full.append(v)
        if v.imag > 1e-9:
            full.append(v.conjugate())
    vals = _sorted_eigs(np.asarray(full, dtype=complex))
    return SpectrumReport(
        eigenvalues=vals,
        max_real_part=float(np.max(vals.real)) if len(vals) else float("nan"),
        dim=n,
        symmetrized=False,
    )


# =====================================================================
# Resolvent norms
# =====================================================================

@dataclass
class ResolventScan:
    """||(i lam - A)^-1|| in the energy norm along the imaginary axis."""

    lam: np.ndarray
    inv_sigma_min: np.ndarray
    iterations: np.ndarray
    lam_resolution_cap: float


def resolution_cap(gen: Generator) -> float:
    """Highest frequency the grid resolves: pi * c_min / (2 h)."""
    speeds = list(wave_speeds(gen.params))
    p = gen.params
    if p.thermal and p.tau > 0.0:
        speeds.append(1.0 / (p.rho3 * p.tau))
    return float(0.5 * np.pi * np.sqrt(min(speeds)) / gen.grid.h)


# Fraction of the grid cutoff frequency pi*c/h inside which the REAL
# PARTS of eigenvalues are trusted.  This is tighter than the 0.5 used
# for resolvent scans on purpose: the damping of the indirectly damped
# families travels through one or two midpoint averages whose symbol
# cos(xi h/2) decays toward the cutoff, so a mode at half the cutoff
# already has its decay rate suppressed by cos^4 ~ 0.4 while its
# frequency is still accurate.  At 0.3 the suppression stays above 0.8
# and abscissa ladders converge for uniformly damped configurations.
ABSCISSA_TRUST_FRACTION = 0.3


def abscissa_window(gen: Generator) -> float:
    """|Im| bound inside which eigenvalue real parts are trusted.

    Only families with no damping term in their own evolution equation
    can float arbitrarily close to the axis at high frequency, so the
    window is keyed to the slowest of THOSE wave speeds: vertical and
    longitudinal always, shear only when the memory kernel is off, the
    heat characteristic only when its relaxation damping is off.  Keying
    on the directly damped (slower) families would shrink the window for
    no gain: their modes sit at depth O(1) regardless of frequency.
    """
    p = gen.params
    speeds = [p.k1 / p.rho1, p.k3 / p.rho1]
    if gen.kernel.a == 0.0:
        speeds.append(p.k2 / p.rho2)
    if p.thermal and p.tau > 0.0 and p.beta == 0.0:
        speeds.append(1.0 / (p.rho3 * p.tau))
    c_und = float(np.sqrt(min(speeds)))
    return float(ABSCISSA_TRUST_FRACTION * np.pi * c_und / gen.grid.h)


def windowed_abscissa(gen: Generator, eigenvalues: np.ndarray | None = None) -> float:
    """Max real part over eigenvalues within the trusted frequency window.

    Centered second-order stencils lose the cross-field coupling that
    carries damping into the vertical and longitudinal families as the
    wavenumber approaches the grid cutoff (the averaging symbol vanishes
    there), so the raw abscissa of the matrix is dominated by near-cutoff
    modes whose weak decay says nothing about the continuum.  Restricting
    to |Im| below a fixed fraction of the cutoff keeps only modes whose
    decay rates the grid actually resolves.
    """
    if eigenvalues is None:
        eigenvalues = compute_spectrum(gen).eigenvalues
    cap = abscissa_window(gen)
    sel = eigenvalues[np.abs(eigenvalues.imag) <= cap]
    if len(sel) == 0:
        raise ValueError("no eigenvalues inside the trusted frequency window")
    return float(sel.real.max())


def resolvent_scan(
    gen: Generator,
    lam: np.ndarray,
    rtol: float = 1e-4,
    max_iter: int = 400,
) -> ResolventScan:
    """Energy-norm resolvent along i*lam by inverse iteration.

    For each sample the smallest singular value of (i lam - A) in the
    B-metric is found by inverse iteration on the normal equations,
    using one complex LU of (i lam - A) and one real LU of B.  Relative
    accuracy is driven well below 1e-3; iteration counts are reported so
    stagnation is visible.
    """
    lam = np.asarray(lam, dtype=float)
    cap = resolution_cap(gen)
    if np.any(lam > cap * (1.0 + 1e-12)):
        raise ValueError(
            f"requested frequency {lam.max():.6g} exceeds the grid resolution cap {cap:.6g}"
        )
    b = gen.B.tocsc()
    try:
        lu_b = splu(b)
    except RuntimeError as exc:
        raise ValueError(
            "energy Gram matrix is singular (zero-energy mode); the resolvent "
            "norm in the energy metric is undefined for this variant"
        ) from exc
    a = gen.A.tocsc()
    n = gen.dim
    eye = sp.identity(n, format="csc", dtype=complex)
    rng = np.random.default_rng(1234)
    x0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    out = np.empty(lam.size)
    iters = np.empty(lam.size, dtype=int)
    for j, lv in enumerate(lam):
        c = (1j * lv) * eye - a
        lu_c = splu(c)
        x = x0.copy()
        x /= np.sqrt(abs(np.vdot(x, b @ x)))
        sig2_old = np.inf
        it = 0
        for it in range(1, max_iter + 1):
            # y = (C^H B C)^-1 B x   via two triangular solve pairs
            wvec = b @ x
            v = lu_c.solve(wvec, trans="H")
            z = lu_b.solve(np.real(v)) + 1j * lu_b.solve(np.imag(v))
            y = lu_c.solve(z)
            norm_y = np.sqrt(abs(np.vdot(y, b @ y)))
            y /= norm_y
            # Rayleigh quotient of the normal operator at y: ||C y||_B^2
            cy = c @ y
            sig2 = abs(np.vdot(cy, b @ cy))
            if sig2_old < np.inf and abs(sig2 - sig2_old) <= rtol * sig2:
                x = y
                break
            sig2_old = sig2
            x = y
        out[j] = 1.0 / np.sqrt(sig2)
        iters[j] = it
    return ResolventScan(lam=lam, inv_sigma_min=out, iterations=iters, lam_resolution_cap=cap)


def envelope_anchors(
    eigenvalues: np.ndarray,
    lam_min: float,
    lam_max: float,
    n_bands: int = 20,
) -> np.ndarray:
    """Frequencies where the resolvent envelope touches its peaks.

    The resolvent norm along the axis peaks at eigenvalue frequencies,
    with peak height set by the eigenvalue's distance to the axis, and
    the peaks are far narrower than any affordable uniform sample
    spacing (width ~ |Re|, often 1e-4).  A scan that wants to see the
    envelope must therefore place samples at the least-damped
    eigenvalue of each frequency band; everywhere else it reads the
    valley floor between resonances, which is the same for every
    configuration.  Bands are uniform in frequency and must stay wider
    than the modal spacing of the least-damped family (about pi times
    its wave speed over the length); log-spaced bands get narrower than
    one spacing at the low end, and a band that happens to contain only
    heavily damped modes anchors pure noise.  Empty bands are skipped.
    """
    if not (0.0 < lam_min < lam_max):
        raise ValueError(f"need 0 < lam_min < lam_max, got [{lam_min}, {lam_max}]")
    if n_bands < 4:
        raise ValueError(f"need at least 4 bands, got {n_bands}")
    vals = np.asarray(eigenvalues, dtype=complex)
    vals = vals[vals.imag > 0.0]
    edges = np.linspace(lam_min, lam_max, n_bands + 1)
    anchors = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        band = vals[(vals.imag >= lo) & (vals.imag <= hi)]
        if band.size == 0:
            continue
        anchors.append(float(band.imag[np.argmin(np.abs(band.real))]))
    return np.unique(np.asarray(anchors))


def scan_frequencies(
    anchors: np.ndarray, lam_min: float, lam_max: float, n_samples: int
) -> np.ndarray:
    """Anchor frequencies padded with uniform filler up to n_samples.

    The filler documents the valley floor between resonances in the
    scan artifact; the anchors carry the envelope.  Returns a strictly
    increasing vector of exactly n_samples frequencies.
    """
    anchors = np.unique(np.asarray(anchors, dtype=float))
    anchors = anchors[(anchors >= lam_min) & (anchors <= lam_max)]
    if anchors.size > n_samples:
        raise ValueError(f"{anchors.size} anchors exceed the {n_samples}-sample budget")
    n_fill = n_samples - anchors.size
    fill = np.linspace(lam_min, lam_max, n_fill) if n_fill > 0 else np.empty(0)
    out = np.unique(np.concatenate([anchors, fill]))
    while out.size < n_samples:
        gaps = np.diff(out)
        j = int(np.argmax(gaps))
        out = np.insert(out, j + 1, 0.5 * (out[j] + out[j + 1]))
    return out


@dataclass
class GrowthFit:
    """Power-law fit of the resolvent envelope."""

    exponent: float
    intercept: float
    residual_rms: float
    n_points: int
    used_peaks: bool


def fit_growth_exponent(
    scan: ResolventScan,
    lam_min: float | None = None,
    lam_max: float | None = None,
    peak_lam: np.ndarray | None = None,
) -> GrowthFit:
    """Slope of log ||resolvent|| against log lam over the peak envelope.

    The growth hypotheses bound the SUP of the resolvent norm up to a
    frequency, a monotone quantity, so the envelope fitted here is the
    running maximum of the peak readings.  Fitting the raw peak heights
    instead would let local damping bumps (frequency stretches where
    every mode is temporarily better damped, real features of coupled
    systems) read as spurious negative slope even when the sup has long
    saturated; the majorant is insensitive to where those bumps fall.
    A shrinking envelope therefore reads as growth exponent 0, which is
    the honest answer for a bounded scan.

    Peaks are interior local maxima of the scan.  Fewer than 4 maxima
    (monotone scans) fall back to every sample in the window.  Callers
    who placed scan samples at known peak frequencies (see
    envelope_anchors) pass them as peak_lam and the fit uses exactly
    those samples instead of detecting maxima.
    """
    lo = scan.lam.min() if lam_min is None else lam_min
    hi = scan.lam.max() if lam_max is None else lam_max
    mask = (scan.lam >= lo) & (scan.lam <= hi) & (scan.lam > 0)
    lam = scan.lam[mask]
    val = scan.inv_sigma_min[mask]
    if peak_lam is not None:
        sel = np.isin(lam, np.asarray(peak_lam, dtype=float))
        if np.count_nonzero(sel) < 4:
            raise ValueError(
                f"growth fit needs at least 4 anchor samples in the window, "
                f"got {np.count_nonzero(sel)}"
            )
        idx = np.flatnonzero(sel)
        used_peaks = True
    else:
        if lam.size < 8:
            raise ValueError(
                f"growth fit needs at least 8 samples in the window, got {lam.size}"
            )
        peaks = [
            i for i in range(1, lam.size - 1) if val[i] >= val[i - 1] and val[i] >= val[i + 1]
        ]
        used_peaks = len(peaks) >= 4
        idx = np.asarray(peaks) if used_peaks else np.arange(lam.size)
    order = idx[np.argsort(lam[idx])]
    x = np.log(lam[order])
    y = np.log(np.maximum.accumulate(val[order]))
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return GrowthFit(
        exponent=float(coef[0]),
        intercept=float(coef[1]),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        n_points=int(order.size),
        used_peaks=used_peaks,
    )


# =====================================================================
# Branch tagging against the characteristic predictions
# =====================================================================

def match_branches(
    report: SpectrumReport,
    params,
    kernel,
    im_max: float | None = None,
    ambiguity_ratio: float = 0.10,
):
    """Tag eigenvalues with the asymptotic branch whose frequency is nearest.

    Predictions come from the characteristic branch seeds (shear branch
    at n pi sqrt(k2/rho2), longitudinal-wave branch at n pi
    sqrt(k1/rho1), unit length).  An eigenvalue whose two nearest
    predictions differ by less than ambiguity_ratio relative to its own
    frequency is tagged None: the match would be a coin flip.
    Returns a new report with branch_tags of (branch, n, predicted_im)
    or None per eigenvalue.
    """
    from .characteristic import branch_seeds

    if params.ell != 0.0 or params.thermal:
        raise ValueError("branch tags are defined for the straight elastic beam")
    vals = report.eigenvalues
    cap = im_max if im_max is not None else (np.max(np.abs(vals.imag)) if vals.size else 0.0)
    sp0 = np.pi * np.sqrt(params.k2 / params.rho2)
    sp1 = np.pi * np.sqrt(params.k1 / params.rho1)
    n0 = max(1, int(np.ceil(cap / sp0)) + 1)
    n1 = max(1, int(np.ceil(cap / sp1)) + 1)
    preds = []
    for branch, count in ((0, n0), (1, n1)):
        seeds = branch_seeds(params, kernel, range(1, count + 1), branch=branch)
        preds.extend((branch, n, seed.imag) for n, seed in seeds)
    pred_im = np.asarray([p[2] for p in preds])

    tags = []
    for v in vals:
        target = abs(v.imag)
        if target == 0.0:
            tags.append(None)
            continue
        d = np.abs(pred_im - target)
        i1 = int(np.argmin(d))
        d1 = d[i1]
        d[i1] = np.inf
        d2 = float(np.min(d))
        if (d2 - d1) < ambiguity_ratio * max(target, 1.0):
            tags.append(None)
            continue
        tags.append(preds[i1])
    return SpectrumReport(
        eigenvalues=vals,
        max_real_part=report.max_real_part,
        dim=report.dim,
        symmetrized=report.symmetrized,
        branch_tags=tags,
    )
