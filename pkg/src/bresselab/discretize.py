"""Staggered finite-difference discretization of the damped beam system.

Positions and velocities live at nodes; strains, the heat flux and (for
Neumann shear ends) the memory slices live at the nx+1 cell midpoints.
Gradients map nodes to midpoints, averages likewise, and every field
carries a diagonal quadrature mass (trapezoid rule, so half weights at
included endpoints).  Evaluating strains at midpoints makes the
assembled stencils the usual second-order centered ones (interior rows
(1,-2,1)/h^2, Neumann rows the ghost-reflection stencil), but the scheme
also inherits exact summation-by-parts identities, so the discrete
energy is a genuine Lyapunov function: d/dt E equals the upwind memory
form (nonpositive) minus beta ||q||^2 in exact arithmetic, not merely up
to truncation error.

The memory direction is a uniform grid on [0, S_max] with first-order
upwind transport and product-trapezoid quadrature weights (exact for the
exponential kernel times piecewise-linear functions).  Those weights
satisfy W_{k+1} = exp(-c ds) W_k exactly, which is what the discrete
dissipativity argument needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .kernel import KernelSpec, evaluate, total_mass, validate_hypotheses
from .model import BoundaryCondition, PhysicalParams

# Largest tail ratio g(S_max)/g(0) a memory grid may carry.
MAX_TRUNC_TOL = 1e-8
# Absolute tolerance of the kernel-mass reproduction check.
MASS_CHECK_TOL = 1e-6


# =====================================================================
# Grids
# =====================================================================

@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on [0, L] with nx interior nodes, h = L/(nx+1)."""

    nx: int
    length: float
    h: float

    @property
    def nodes_dirichlet(self) -> np.ndarray:
        """Interior nodes x_1 .. x_nx (pinned ends not stored)."""
        return self.h * np.arange(1, self.nx + 1)

    @property
    def nodes_neumann(self) -> np.ndarray:
        """All nodes x_0 .. x_{nx+1} including the free ends."""
        return self.h * np.arange(0, self.nx + 2)

    @property
    def midpoints(self) -> np.ndarray:
        return self.h * (np.arange(0, self.nx + 1) + 0.5)


def build_spatial_grid(length: float, nx: int) -> SpatialGrid:
    if not (np.isfinite(length) and length > 0.0):
        raise ValueError(f"length must be finite and > 0, got {length}")
    if nx < 4:
        raise ValueError(f"need at least 4 interior nodes, got nx = {nx}")
    return SpatialGrid(nx=int(nx), length=float(length), h=float(length) / (nx + 1))


@dataclass(frozen=True)
class MemoryGrid:
    """Uniform history grid s_0 .. s_ns on [0, S_max].

    weights[j] is the quadrature weight of node j: sum_j weights[j] g(s_j)
    reproduces the kernel mass g0 to MASS_CHECK_TOL.  State vectors carry
    the slices k = 1 .. ns only (the s = 0 slice vanishes identically).
    """

    ns: int
    ds: float
    s_max: float
    s: np.ndarray
    weights: np.ndarray
    mass_error: float


def build_memory_grid(kernel: KernelSpec, ns: int = 32, trunc_tol: float = 1e-8) -> MemoryGrid:
    """History grid plus quadrature weights for the given kernel.

    The weights are product-trapezoid: W_j = integral of g times the hat
    function of node j, evaluated in closed form, then divided by g(s_j).
    Plain trapezoid weights would miss the mass check by O(ds^2) of the
    kernel curvature, which at ns = 64 is three orders too coarse.
    """
    if ns < 8:
        raise ValueError(f"need at least 8 history intervals, got ns = {ns}")
    if not (0.0 < trunc_tol < 1.0):
        raise ValueError(f"truncation tolerance must be in (0, 1), got {trunc_tol}")
    if trunc_tol > MAX_TRUNC_TOL:
        raise ValueError(
            f"truncation tolerance {trunc_tol} too coarse; the kernel tail "
            f"g(S_max)/g(0) must not exceed {MAX_TRUNC_TOL}"
        )
    ns = int(ns)
    s_max = float(np.log(1.0 / trunc_tol) / kernel.c)
    ds = s_max / ns
    s = np.linspace(0.0, s_max, ns + 1)

    if kernel.a == 0.0:
        weights = np.full(ns + 1, ds)
        weights[0] = weights[-1] = 0.5 * ds
        return MemoryGrid(ns=ns, ds=ds, s_max=s_max, s=s, weights=weights, mass_error=0.0)

    c = kernel.c
    decay = np.exp(-c * s)
    # Per interval [s_k, s_{k+1}]: a0 = int exp(-c s), a1 = int (s - s_k) exp(-c s).
    a0 = decay[:-1] * (-np.expm1(-c * ds)) / c
    a1 = -ds * decay[1:] / c + a0 / c
    hat_int = np.zeros(ns + 1)
    np.add.at(hat_int, np.arange(ns), kernel.a * (a0 - a1 / ds))
    np.add.at(hat_int, np.arange(1, ns + 1), kernel.a * (a1 / ds))
    weights = hat_int / (kernel.a * decay)

    g0 = total_mass(kernel)
    mass_error = float(abs(np.sum(weights * kernel.a * decay) - g0))
    if mass_error > MASS_CHECK_TOL * max(1.0, g0):
        raise ValueError(
            f"memory quadrature mass check failed: |sum w g - g0| = {mass_error:.3e} "
            f"exceeds {MASS_CHECK_TOL * max(1.0, g0):.3e}; refine ns or trunc_tol"
        )
    return MemoryGrid(ns=ns, ds=ds, s_max=s_max, s=s, weights=weights, mass_error=mass_error)


# =====================================================================
# Per-field operators
# =====================================================================

def _ops_dirichlet(nx: int, h: float):
    """(gradient, average, mass) for a field pinned to zero at both ends.

    The field stores interior values only; the zero end values are baked
    into the first and last midpoint rows.
    """
    rows, cols, gv, av = [], [], [], []
    for m in range(nx + 1):
        if m >= 1:
            rows.append(m); cols.append(m - 1); gv.append(-1.0 / h); av.append(0.5)
        if m <= nx - 1:
            rows.append(m); cols.append(m); gv.append(1.0 / h); av.append(0.5)
    grad = sp.csr_matrix((gv, (rows, cols)), shape=(nx + 1, nx))
    avg = sp.csr_matrix((av, (rows, cols)), shape=(nx + 1, nx))
    mass = np.full(nx, h)
    return grad, avg, mass


def _ops_neumann(nx: int, h: float):
    """(gradient, average, mass) for a field with free (derivative) ends.

    End values are unknowns; their mass is the half trapezoid weight,
    which makes the assembled end row of grad^T M grad coincide with the
    ghost-reflection Neumann stencil (2 u_0 - 2 u_1)/h^2.
    """
    n = nx + 2
    m_idx = np.arange(nx + 1)
    rows = np.concatenate([m_idx, m_idx])
    cols = np.concatenate([m_idx, m_idx + 1])
    gv = np.concatenate([np.full(nx + 1, -1.0 / h), np.full(nx + 1, 1.0 / h)])
    av = np.full(2 * (nx + 1), 0.5)
    grad = sp.csr_matrix((gv, (rows, cols)), shape=(nx + 1, n))
    avg = sp.csr_matrix((av, (rows, cols)), shape=(nx + 1, n))
    mass = np.full(n, h)
    mass[0] = mass[-1] = 0.5 * h
    return grad, avg, mass


# =====================================================================
# Assembled generator
# =====================================================================

@dataclass
class Generator:
    """Semi-discrete system u' = A u with energy E(u) = u^T B u / 2.

    layout maps field names to slices of the state vector; eta is one
    contiguous block of ns slices, slice-major.  eta_rep records whether
    memory slices store nodal values ("nodal", Dirichlet shear ends) or
    midpoint x-gradients ("gradient", Neumann shear ends).
    """

    params: PhysicalParams
    kernel: KernelSpec
    bc: BoundaryCondition
    grid: SpatialGrid
    mgrid: MemoryGrid
    A: sp.csr_matrix
    B: sp.csr_matrix
    layout: dict[str, slice]
    sizes: dict[str, int]
    eta_rep: str
    include_w: bool
    n_eta: int
    slice_weights: np.ndarray          # W_k, k = 1..ns (empty when a = 0)
    slice_energy: sp.csr_matrix | None  # per-slice Gram of the memory term
    eta_grad: sp.csr_matrix | None      # maps one slice to midpoint gradients

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def ns_active(self) -> int:
        return len(self.slice_weights)


def _position_fields(bc: BoundaryCondition, include_w: bool) -> list[tuple[str, bool]]:
    """Ordered (name, is_neumann) pairs of the position fields."""
    fields = [("phi", False), ("psi", bc.psi_neumann)]
    if include_w:
        fields.append(("w", bc.w_neumann))
    return fields


def assemble_generator(
    params: PhysicalParams,
    kernel: KernelSpec,
    bc: BoundaryCondition,
    grid: SpatialGrid,
    mgrid: MemoryGrid,
) -> Generator:
    """Assemble the full first-order system for the given variant."""
    return _assemble(params, kernel, bc, grid, mgrid, include_w=True)


def assemble_timoshenko_generator(
    params: PhysicalParams,
    kernel: KernelSpec,
    grid: SpatialGrid,
    mgrid: MemoryGrid,
) -> Generator:
    """Two-field assembly for the straight beam (ell = 0, elastic).

    At zero curvature the longitudinal motion decouples exactly; this
    constructor drops it so spectra can be compared against the
    characteristic equation without the undamped longitudinal modes.
    """
    if params.ell != 0.0:
        raise ValueError("two-field assembly requires ell = 0")
    if params.thermal:
        raise ValueError("two-field assembly is for the elastic system")
    return _assemble(params, kernel, BoundaryCondition.DDD_ELASTIC, grid, mgrid, include_w=False)


def _assemble(params, kernel, bc, grid, mgrid, include_w):
    bc.check_compatible(params)
    hyp = validate_hypotheses(kernel, params.k2)
    if not hyp.ok:
        raise ValueError(
            f"cannot assemble: kernel mass {total_mass(kernel)} leaves no residual "
            f"shear stiffness (k2 = {params.k2})"
        )
    if params.thermal and params.tau == 0.0:
        raise ValueError("thermal assembly requires a positive relaxation time tau")

    nx, h = grid.nx, grid.h
    p = params
    k2t = p.k2 - total_mass(kernel)

    ops_d = _ops_dirichlet(nx, h)
    ops_n = _ops_neumann(nx, h)
    m_mid = np.full(nx + 1, h)

    fields = _position_fields(bc, include_w)
    grads, avgs, masses, dens = {}, {}, {}, {}
    for name, neumann in fields:
        g_, a_, m_ = ops_n if neumann else ops_d
        grads[name], avgs[name], masses[name] = g_, a_, m_
        dens[name] = p.rho2 if name == "psi" else p.rho1
    n_of = {name: masses[name].size for name, _ in fields}
    n_pos = sum(n_of.values())

    # --- strain map: rows S1 (shear), S2 (bending), S3 (longitudinal) ---
    z = None
    if include_w:
        strain_rows = [
            [grads["phi"], avgs["psi"], p.ell * avgs["w"]],
            [z, grads["psi"], z],
            [-p.ell * avgs["phi"], z, grads["w"]],
        ]
        strain_weights = np.concatenate([p.k1 * m_mid, k2t * m_mid, p.k3 * m_mid])
    else:
        strain_rows = [
            [grads["phi"], avgs["psi"]],
            [z, grads["psi"]],
        ]
        strain_weights = np.concatenate([p.k1 * m_mid, k2t * m_mid])
    strain = sp.bmat(strain_rows, format="csr")
    k_pos = (strain.T @ sp.diags(strain_weights) @ strain).tocsr()

    mass_vel = np.concatenate([dens[name] * masses[name] for name, _ in fields])
    inv_mass_vel = sp.diags(1.0 / mass_vel)
    f_pos = (-inv_mass_vel @ k_pos).tocsr()

    # --- memory block ---
    ns = mgrid.ns
    w_slices = mgrid.weights[1:] * evaluate(kernel, mgrid.s[1:]) if kernel.a > 0.0 else np.zeros(0)
    has_memory = w_slices.size > 0
    g_psi = grads["psi"]
    if has_memory:
        if bc.psi_neumann:
            eta_rep = "gradient"
            n_eta = nx + 1
            slice_energy = sp.diags(m_mid).tocsr()
            eta_grad = sp.identity(n_eta, format="csr")
            # force of one unit-weight slice on the shear velocity
            force_one = (-sp.diags(1.0 / (p.rho2 * masses["psi"])) @ (g_psi.T @ sp.diags(m_mid))).tocsr()
            inject = g_psi  # d/dt slice picks up grad of psi_t
        else:
            eta_rep = "nodal"
            n_eta = n_of["psi"]
            slice_energy = (g_psi.T @ sp.diags(m_mid) @ g_psi).tocsr()
            eta_grad = g_psi
            force_one = (-sp.diags(1.0 / (p.rho2 * masses["psi"])) @ slice_energy).tocsr()
            inject = sp.identity(n_eta, format="csr")
        transport = sp.diags(
            [np.full(ns, -1.0 / mgrid.ds), np.full(ns - 1, 1.0 / mgrid.ds)],
            [0, -1],
        )
        a_eta_eta = sp.kron(transport, sp.identity(n_eta), format="csr")
        a_eta_vel_psi = sp.kron(np.ones((ns, 1)), inject, format="csr")
        a_vel_psi_eta = sp.kron(w_slices[np.newaxis, :], force_one, format="csr")
        b_eta = sp.kron(sp.diags(w_slices), slice_energy, format="csr")
    else:
        eta_rep = "nodal" if not bc.psi_neumann else "gradient"
        n_eta = 0
        slice_energy = None
        eta_grad = None

    # --- thermal block ---
    thermal = p.thermal
    if thermal:
        g_th, avg_th, mass_th = ops_d  # theta is Dirichlet in every variant
        n_th, n_q = nx, nx + 1
        inv_mass_th = sp.diags(1.0 / (p.rho3 * mass_th))
        a_th_q = (inv_mass_th @ g_th.T @ sp.diags(m_mid)).tocsr()
        a_th_vel_psi = (-p.delta * inv_mass_th @ avg_th.T @ sp.diags(m_mid) @ g_psi).tocsr()
        a_vel_psi_th = (
            p.delta * sp.diags(1.0 / (p.rho2 * masses["psi"])) @ g_psi.T @ sp.diags(m_mid) @ avg_th
        ).tocsr()
        a_q_th = (-1.0 / p.tau) * g_th
        a_q_q = sp.diags(np.full(n_q, -p.beta / p.tau))
    else:
        n_th = n_q = 0

    # --- state layout ---
    sizes = {name: n_of[name] for name, _ in fields}
    order = [name for name, _ in fields] + ["d" + name for name, _ in fields]
    for name, _ in fields:
        sizes["d" + name] = n_of[name]
    if has_memory:
        order.append("eta")
        sizes["eta"] = ns * n_eta
    if thermal:
        order += ["theta", "q"]
        sizes["theta"], sizes["q"] = n_th, n_q
    layout, off = {}, 0
    for name in order:
        layout[name] = slice(off, off + sizes[name])
        off += sizes[name]
    dim = off

    # --- assemble A and B from block grids ---
    psi_col = [name for name, _ in fields].index("psi")
    n_blocks = {
        "pos": n_pos,
        "vel": n_pos,
        "eta": ns * n_eta if has_memory else 0,
        "th": n_th,
        "q": n_q,
    }
    names = [k for k, v in n_blocks.items() if v > 0]

    grid_a = {n: {m: None for m in names} for n in names}
    grid_b = {n: {m: None for m in names} for n in names}

    grid_a["pos"]["vel"] = sp.identity(n_pos, format="csr")
    grid_a["vel"]["pos"] = f_pos
    grid_b["pos"]["pos"] = k_pos
    grid_b["vel"]["vel"] = sp.diags(mass_vel)

    def vel_row(block, col_size):
        """Place a psi-velocity block inside the full velocity row group."""
        parts = []
        for i, (name, _) in enumerate(fields):
            if i == psi_col:
                parts.append([block])
            else:
                parts.append([sp.csr_matrix((n_of[name], col_size))])
        return sp.bmat(parts, format="csr")

    def vel_col(block, row_size):
        parts = [[None] * len(fields)]
        parts[0] = [
            block if i == psi_col else sp.csr_matrix((row_size, n_of[name]))
            for i, (name, _) in enumerate(fields)
        ]
        return sp.bmat(parts, format="csr")

    if has_memory:
        grid_a["vel"]["eta"] = vel_row(a_vel_psi_eta, ns * n_eta)
        grid_a["eta"]["vel"] = vel_col(a_eta_vel_psi, ns * n_eta)
        grid_a["eta"]["eta"] = a_eta_eta
        grid_b["eta"]["eta"] = b_eta
    if thermal:
        grid_a["vel"]["th"] = vel_row(a_vel_psi_th, n_th)
        grid_a["th"]["vel"] = vel_col(a_th_vel_psi, n_th)
        grid_a["th"]["q"] = a_th_q
        grid_a["q"]["th"] = a_q_th
        grid_a["q"]["q"] = a_q_q
        grid_b["th"]["th"] = sp.diags(p.rho3 * mass_th)
        grid_b["q"]["q"] = sp.diags(p.tau * m_mid)

    mat_a = sp.bmat([[grid_a[r][c] for c in names] for r in names], format="csr")
    mat_b = sp.bmat([[grid_b[r][c] for c in names] for r in names], format="csr")
    assert mat_a.shape == (dim, dim)

    return Generator(
        params=params,
        kernel=kernel,
        bc=bc,
        grid=grid,
        mgrid=mgrid,
        A=mat_a,
        B=mat_b,
        layout=layout,
        sizes=sizes,
        eta_rep=eta_rep,
        include_w=include_w,
        n_eta=n_eta,
        slice_weights=np.asarray(w_slices, dtype=float),
        slice_energy=slice_energy,
        eta_grad=eta_grad,
    )


# =====================================================================
# Energy and dissipation
# =====================================================================

def energy(gen: Generator, u: np.ndarray) -> float:
    """E(u) = u^T B u / 2."""
    u = np.asarray(u)
    val = np.real(np.vdot(u, gen.B @ u))
    return 0.5 * float(val)


def dissipation_rates(gen: Generator, u: np.ndarray) -> tuple[float, float]:
    """(memory rate, heat rate): the exact split of d/dt E along the flow.

    The memory rate is the discrete realization of the continuous
    dissipation functional (1/2) int int g' |eta_x|^2: the upwind
    transport quadratic form after summation by parts in s.  Both terms
    are nonpositive by construction and their sum equals
    Re <A u, u>_B exactly, which is what the energy-balance checks rely
    on.
    """
    u = np.asarray(u)
    mem = 0.0
    if gen.ns_active > 0:
        ns, n_eta, ds = gen.ns_active, gen.n_eta, gen.mgrid.ds
        w = gen.slice_weights
        eta = u[gen.layout["eta"]].reshape(ns, n_eta)
        k_eta = gen.slice_energy
        keta = (k_eta @ eta.T).T
        b = np.real(np.einsum("ij,ij->i", np.conj(eta), keta))
        diff = eta.copy()
        diff[1:] -= eta[:-1]
        kdiff = (k_eta @ diff.T).T
        d = np.real(np.einsum("ij,ij->i", np.conj(diff), kdiff))
        w_next = np.append(w[1:], 0.0)
        mem = -0.5 / ds * float(np.sum((w - w_next) * b) + np.sum(w * d))
    heat = 0.0
    if gen.params.thermal:
        q = u[gen.layout["q"]]
        heat = -gen.params.beta * gen.grid.h * float(np.real(np.vdot(q, q)))
    return mem, heat


def energy_norm_bounds(
    params: PhysicalParams, kernel: KernelSpec, grid: SpatialGrid
) -> tuple[float, float]:
    """Equivalence constants between the coupled strain norm and the flat one.

    Returns (k0, k0p) with k0 ||u||_flat <= ||u||_strain <= k0p ||u||_flat
    over position vectors, where the flat norm stacks the uncoupled
    gradient seminorms of the three fields.  Elastic Dirichlet variant
    only; both Gram matrices are then definite and the constants are the
    extreme generalized eigenvalues.
    """
    from scipy.linalg import block_diag, eigh

    if params.thermal:
        raise ValueError("norm equivalence constants are computed for the elastic variant")
    mgrid = build_memory_grid(kernel, ns=8, trunc_tol=1e-8)
    gen = assemble_generator(params, kernel, BoundaryCondition.DDD_ELASTIC, grid, mgrid)
    n_pos = gen.layout["dphi"].start  # positions come first
    k_pos = gen.B[:n_pos, :n_pos].toarray()

    g_, _, _ = _ops_dirichlet(grid.nx, grid.h)
    lap = (g_.T @ sp.diags(np.full(grid.nx + 1, grid.h)) @ g_).toarray()
    flat = block_diag(lap, lap, lap)
    vals = eigh(k_pos, flat, eigvals_only=True)
    return float(np.sqrt(max(vals[0], 0.0))), float(np.sqrt(vals[-1]))


def export_matrix(mat, path) -> None:
    """Dump a sparse matrix as 'row col value' triplets, row-major."""
    coo = sp.coo_matrix(mat)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# shape {coo.shape[0]} {coo.shape[1]} nnz {coo.nnz}\n")
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.12e}\n")


def coordinates(gen: Generator) -> dict[str, np.ndarray]:
    """Physical coordinates of each stored field."""
    g = gen.grid
    out: dict[str, np.ndarray] = {}
    for name, neumann in _position_fields(gen.bc, gen.include_w):
        x = g.nodes_neumann if neumann else g.nodes_dirichlet
        out[name] = x
        out["d" + name] = x
    if gen.ns_active > 0:
        out["eta_x"] = (
            g.midpoints if gen.eta_rep == "gradient"
            else (g.nodes_neumann if gen.bc.psi_neumann else g.nodes_dirichlet)
        )
        out["eta_s"] = gen.mgrid.s[1:]
    if gen.params.thermal:
        out["theta"] = g.nodes_dirichlet
        out["q"] = g.midpoints
    return out
