import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from app.core.config import settings
from app.core.exceptions import CompatibilityError, GridResolutionError, SolverConvergenceError
from app.models.grid import DiscGrid

logger = logging.getLogger(__name__)

MIN_RINGS = 8
MIN_SECTORS = 16


def build_polar_grid(n_r: int, n_theta: int) -> DiscGrid:
    """Build the polar tensor grid of the unit disc"""
    if n_r < MIN_RINGS:
        raise GridResolutionError(f"n_r={n_r} below minimum {MIN_RINGS}")
    if n_theta < MIN_SECTORS:
        raise GridResolutionError(f"n_theta={n_theta} below minimum {MIN_SECTORS}")
    if n_theta % 2:
        raise GridResolutionError(f"n_theta={n_theta} must be even")

    dr = 1.0 / n_r
    dtheta = 2.0 * np.pi / n_theta
    radii = np.arange(1, n_r + 1) * dr
    angles = np.arange(n_theta) * dtheta

    r = np.concatenate([[0.0], np.repeat(radii, n_theta)])
    theta = np.concatenate([[0.0], np.tile(angles, n_r)])
    u = r * np.cos(theta)
    v = r * np.sin(theta)

    # Polar trapezoid in r dr dtheta; the r=0 end carries zero weight
    ring_weights = radii * dr * dtheta
    ring_weights[-1] *= 0.5
    quad_weights = np.concatenate([[0.0], np.repeat(ring_weights, n_theta)])

    boundary_nodes = 1 + (n_r - 1) * n_theta + np.arange(n_theta)
    boundary_normal = np.column_stack([np.cos(angles), np.sin(angles)])
    boundary_arc_weights = np.full(n_theta, dtheta)

    interior_mask = np.ones(r.shape[0], dtype=bool)
    interior_mask[boundary_nodes] = False

    grid = DiscGrid(
        n_r=n_r,
        n_theta=n_theta,
        r=r,
        theta=theta,
        u=u,
        v=v,
        quad_weights=quad_weights,
        boundary_nodes=boundary_nodes,
        boundary_normal=boundary_normal,
        boundary_arc_weights=boundary_arc_weights,
        interior_mask=interior_mask,
    )
    logger.debug(f"Built {grid}")
    return grid


def _radial_stencil(ring: int, n_r: int, n_theta: int) -> List[Tuple[float, int, int]]:
    """Fourth-order d/dr stencil at a ring as (coefficient * h, ring, sector shift)"""
    if ring == 1:
        # r - 2h lies on ring 1 across the center
        return [(-1 / 12, 3, 0), (8 / 12, 2, 0), (-8 / 12, 0, 0), (1 / 12, 1, n_theta // 2)]
    if ring <= n_r - 2:
        return [(-1 / 12, ring + 2, 0), (8 / 12, ring + 1, 0),
                (-8 / 12, ring - 1, 0), (1 / 12, ring - 2, 0)]
    if ring == n_r - 1:
        return [(3 / 12, ring + 1, 0), (10 / 12, ring, 0), (-18 / 12, ring - 1, 0),
                (6 / 12, ring - 2, 0), (-1 / 12, ring - 3, 0)]
    return [(25 / 12, ring, 0), (-48 / 12, ring - 1, 0), (36 / 12, ring - 2, 0),
            (-16 / 12, ring - 3, 0), (3 / 12, ring - 4, 0)]


class DiscOperators:
    """Differentiation, quadrature and Poisson solvers bound to one grid"""

    def __init__(self, grid: DiscGrid):
        self.grid = grid
        self.d_u, self.d_v = self._assemble_partials()
        self.laplacian_matrix = self._assemble_laplacian()
        self._dirichlet_matrix: Optional[sparse.csc_matrix] = None
        self._dirichlet_lu = None
        self._neumann_matrix: Optional[sparse.csc_matrix] = None
        self._neumann_lu = None
        self._sobolev_lu = {}

    # ------------------------------------------------------------------
    # assembly

    def _ring_nodes(self, ring: int, shift: int = 0) -> np.ndarray:
        nt = self.grid.n_theta
        if ring == 0:
            return np.zeros(nt, dtype=int)
        return 1 + (ring - 1) * nt + (np.arange(nt) + shift) % nt

    def _assemble_partials(self) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
        g = self.grid
        nt, nr, n_nodes = g.n_theta, g.n_r, g.n_nodes

        rows, cols, vals = [], [], []
        for ring in range(1, nr + 1):
            targets = self._ring_nodes(ring)
            for coef, source_ring, shift in _radial_stencil(ring, nr, nt):
                rows.append(targets)
                cols.append(self._ring_nodes(source_ring, shift))
                vals.append(np.full(nt, coef / g.dr))
        d_r = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_nodes, n_nodes),
        )

        # 2 sin(dtheta) makes the difference exact on first harmonics
        scale = 1.0 / (2.0 * np.sin(g.dtheta))
        rows, cols, vals = [], [], []
        for ring in range(1, nr + 1):
            targets = self._ring_nodes(ring)
            rows += [targets, targets]
            cols += [self._ring_nodes(ring, 1), self._ring_nodes(ring, -1)]
            vals += [np.full(nt, scale), np.full(nt, -scale)]
        d_theta = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_nodes, n_nodes),
        )

        inv_r = np.zeros(n_nodes)
        inv_r[1:] = 1.0 / g.r[1:]
        cos_t, sin_t = np.cos(g.theta), np.sin(g.theta)
        d_u = sparse.diags(cos_t) @ d_r - sparse.diags(sin_t * inv_r) @ d_theta
        d_v = sparse.diags(sin_t) @ d_r + sparse.diags(cos_t * inv_r) @ d_theta

        # Center: linear fit on ring 1, extrapolated with ring 2 to cancel the cubic term
        angles = np.arange(nt) * g.dtheta
        ring1, ring2 = self._ring_nodes(1), self._ring_nodes(2)
        c1 = (4.0 / 3.0) * 2.0 / (nt * g.dr)
        c2 = -(1.0 / 3.0) * 2.0 / (nt * 2.0 * g.dr)
        center_cols = np.concatenate([ring1, ring2])
        center_rows = np.zeros(2 * nt, dtype=int)
        center_u = sparse.csr_matrix(
            (np.concatenate([c1 * np.cos(angles), c2 * np.cos(angles)]), (center_rows, center_cols)),
            shape=(n_nodes, n_nodes),
        )
        center_v = sparse.csr_matrix(
            (np.concatenate([c1 * np.sin(angles), c2 * np.sin(angles)]), (center_rows, center_cols)),
            shape=(n_nodes, n_nodes),
        )
        return (d_u + center_u).tocsr(), (d_v + center_v).tocsr()

    def _laplacian_rows(self, ring: int):
        """Five-point conservative polar Laplacian coefficients for one ring"""
        g = self.grid
        r = ring * g.dr
        a_out = (r + 0.5 * g.dr) / (r * g.dr ** 2)
        a_in = (r - 0.5 * g.dr) / (r * g.dr ** 2)
        # 4 sin^2(dtheta/2) in place of dtheta^2 keeps first harmonics exact
        a_theta = 1.0 / (r * 2.0 * np.sin(0.5 * g.dtheta)) ** 2
        return a_out, a_in, a_theta

    def _assemble_laplacian(self) -> sparse.csr_matrix:
        """Laplacian rows for non-boundary nodes; boundary rows are empty"""
        g = self.grid
        nt, n_nodes = g.n_theta, g.n_nodes
        rows, cols, vals = [], [], []

        # Center: 4 (mean(ring 1) - f0) / dr^2
        rows += [np.array([0]), np.zeros(nt, dtype=int)]
        cols += [np.array([0]), self._ring_nodes(1)]
        vals += [np.array([-4.0 / g.dr ** 2]), np.full(nt, 4.0 / (nt * g.dr ** 2))]

        for ring in range(1, g.n_r):
            a_out, a_in, a_theta = self._laplacian_rows(ring)
            targets = self._ring_nodes(ring)
            rows += [targets] * 5
            cols += [targets, self._ring_nodes(ring + 1), self._ring_nodes(ring - 1),
                     self._ring_nodes(ring, 1), self._ring_nodes(ring, -1)]
            vals += [np.full(nt, -(a_out + a_in + 2.0 * a_theta)), np.full(nt, a_out),
                     np.full(nt, a_in), np.full(nt, a_theta), np.full(nt, a_theta)]

        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_nodes, n_nodes),
        )

    def _dirichlet_system(self):
        if self._dirichlet_lu is None:
            g = self.grid
            identity_rows = np.zeros(g.n_nodes)
            identity_rows[g.boundary_nodes] = 1.0
            matrix = (self.laplacian_matrix + sparse.diags(identity_rows)).tocsc()
            self._dirichlet_matrix = matrix
            self._dirichlet_lu = splu(matrix)
        return self._dirichlet_matrix, self._dirichlet_lu

    def _neumann_system(self):
        if self._neumann_lu is None:
            g = self.grid
            nt, n_nodes = g.n_theta, g.n_nodes
            ring = g.n_r
            a_out, a_in, a_theta = self._laplacian_rows(ring)
            targets = self._ring_nodes(ring)

            # Ghost closure phi_ghost = phi_{n-1} + 2 dr g folds into the last ring
            rows = [targets] * 4
            cols = [targets, self._ring_nodes(ring - 1), self._ring_nodes(ring, 1),
                    self._ring_nodes(ring, -1)]
            vals = [np.full(nt, -(a_out + a_in + 2.0 * a_theta)), np.full(nt, a_out + a_in),
                    np.full(nt, a_theta), np.full(nt, a_theta)]
            boundary_rows = sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n_nodes, n_nodes),
            )
            operator = self.laplacian_matrix + boundary_rows

            # Border with the zero-mean constraint; the multiplier absorbs the
            # discrete incompatibility left after projection
            constraint = (g.quad_weights / g.quad_weights.max()).reshape(-1, 1)
            matrix = sparse.bmat(
                [[operator, sparse.csr_matrix(constraint)],
                 [sparse.csr_matrix(constraint.T), None]],
                format="csc",
            )
            self._neumann_matrix = matrix
            self._neumann_lu = splu(matrix)
        return self._neumann_matrix, self._neumann_lu

    # ------------------------------------------------------------------
    # calculus

    def cartesian_partials(self, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Cartesian partials (f_u, f_v) of a node field with any trailing shape"""
        self.grid.check_field(f)
        flat = f.reshape(f.shape[0], -1)
        f_u = (self.d_u @ flat).reshape(f.shape)
        f_v = (self.d_v @ flat).reshape(f.shape)
        return f_u, f_v

    def divergence(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        """div(f1, f2) = f1_u + f2_v, entrywise over trailing axes"""
        f1_u, _ = self.cartesian_partials(f1)
        _, f2_v = self.cartesian_partials(f2)
        return f1_u + f2_v

    def partials_transpose(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        """D_u^T f1 + D_v^T f2, the nodal adjoint of cartesian_partials"""
        self.grid.check_field(f1)
        flat1 = f1.reshape(f1.shape[0], -1)
        flat2 = f2.reshape(f2.shape[0], -1)
        return (self.d_u.T @ flat1 + self.d_v.T @ flat2).reshape(f1.shape)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        """Discrete five-point Laplacian; values on boundary nodes are zero"""
        self.grid.check_field(f)
        flat = f.reshape(f.shape[0], -1)
        return (self.laplacian_matrix @ flat).reshape(f.shape)

    def integrate_disc(self, f: np.ndarray) -> np.ndarray:
        """Quadrature of a node field over B in fixed node order"""
        self.grid.check_field(f)
        result = np.tensordot(self.grid.quad_weights, f, axes=(0, 0))
        return float(result) if np.ndim(result) == 0 else result

    def integrate_boundary(self, f: np.ndarray) -> np.ndarray:
        """Trapezoid quadrature over the unit circle

        Accepts values on the boundary ring (n_theta rows) or a full node field.
        """
        g = self.grid
        if f.shape[0] == g.n_nodes:
            f = f[g.boundary_nodes]
        if f.shape[0] != g.n_theta:
            raise ValueError(f"Boundary field has {f.shape[0]} rows, expected {g.n_theta}")
        result = np.tensordot(g.boundary_arc_weights, f, axes=(0, 0))
        return float(result) if np.ndim(result) == 0 else result

    def normal_flux(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        """<(f1, f2), nu> on the boundary ring, entrywise over trailing axes"""
        g = self.grid
        nu = g.boundary_normal
        b1, b2 = f1[g.boundary_nodes], f2[g.boundary_nodes]
        extra = (1,) * (b1.ndim - 1)
        return nu[:, 0].reshape((-1,) + extra) * b1 + nu[:, 1].reshape((-1,) + extra) * b2

    # ------------------------------------------------------------------
    # Poisson solvers

    def _solve_checked(self, matrix, lu, rhs: np.ndarray, label: str) -> np.ndarray:
        tolerance = settings.poisson_residual_tolerance * np.linalg.norm(rhs, axis=0)
        solution = lu.solve(rhs)
        residual = np.linalg.norm(matrix @ solution - rhs, axis=0)
        if np.any(residual > tolerance):
            # One step of iterative refinement before giving up
            solution = solution - lu.solve(matrix @ solution - rhs)
            residual = np.linalg.norm(matrix @ solution - rhs, axis=0)
            if np.any(residual > tolerance):
                logger.error(f"{label} solve residual {residual.max():.3e} above {tolerance.max():.3e}")
                raise SolverConvergenceError(
                    f"{label} solve residual {residual.max():.3e} exceeds tolerance"
                )
        return solution

    def solve_poisson_dirichlet(self, rhs: np.ndarray) -> np.ndarray:
        """Solve Laplace(phi) = rhs inside with phi = 0 on the boundary"""
        self.grid.check_field(rhs)
        matrix, lu = self._dirichlet_system()
        flat = np.array(rhs, dtype=float).reshape(rhs.shape[0], -1)
        flat[self.grid.boundary_nodes] = 0.0
        solution = self._solve_checked(matrix, lu, flat, "Dirichlet")
        # LU leaves round-off on the identity rows
        solution[self.grid.boundary_nodes] = 0.0
        return solution.reshape(rhs.shape)

    def solve_poisson_neumann(
        self, rhs: np.ndarray, boundary_flux: np.ndarray, reference_scale: float = 0.0
    ) -> np.ndarray:
        """Solve Laplace(phi) = rhs, d(phi)/d(nu) = boundary_flux, with zero mean

        The compatibility gap is measured against the L1 size of the data, or
        against reference_scale when that is larger (data that are themselves
        residuals of a nearly compatible field).
        """
        g = self.grid
        g.check_field(rhs)
        f = np.array(rhs, dtype=float).reshape(rhs.shape[0], -1)
        flux = np.asarray(boundary_flux, dtype=float)
        if flux.shape[0] == g.n_nodes:
            flux = flux[g.boundary_nodes]
        flux = flux.reshape(g.n_theta, -1)

        # Divergence-theorem compatibility, column by column
        gap = self.integrate_disc(f) - self.integrate_boundary(flux)
        scale = self.integrate_disc(np.abs(f)) + self.integrate_boundary(np.abs(flux))
        gap = np.atleast_1d(gap)
        scale = np.maximum(np.atleast_1d(scale), reference_scale)
        for column in range(f.shape[1]):
            relative = abs(gap[column]) / scale[column] if scale[column] > 0 else 0.0
            if relative <= settings.neumann_compat_tolerance:
                continue
            if relative <= settings.neumann_projection_tolerance:
                logger.warning(
                    f"Neumann data incompatible by {relative:.3e} (relative); "
                    f"projecting the surplus out of the source"
                )
                f[:, column] -= gap[column] / np.pi
            else:
                raise CompatibilityError(
                    f"Neumann data incompatible: integral of source {gap[column] + self.integrate_boundary(flux[:, column]):.6g} "
                    f"vs boundary flux {self.integrate_boundary(flux[:, column]):.6g}"
                )

        a_out, _, _ = self._laplacian_rows(g.n_r)
        system_rhs = np.zeros((g.n_nodes + 1, f.shape[1]))
        system_rhs[:g.n_nodes] = f
        system_rhs[g.boundary_nodes] -= 2.0 * g.dr * a_out * flux
        matrix, lu = self._neumann_system()
        solution = self._solve_checked(matrix, lu, system_rhs, "Neumann")
        return solution[:g.n_nodes].reshape(rhs.shape)

    # ------------------------------------------------------------------
    # Sobolev preconditioner for rotation-field descent

    def stiffness_and_mass(self) -> Tuple[sparse.csr_matrix, np.ndarray]:
        """Compact symmetric polar stiffness (Neumann) and lumped control-volume mass"""
        g = self.grid
        nt, nr, n_nodes = g.n_theta, g.n_r, g.n_nodes
        heads, tails, conductances = [], [], []

        heads.append(np.zeros(nt, dtype=int))
        tails.append(self._ring_nodes(1))
        conductances.append(np.full(nt, 0.5 * g.dtheta))
        for ring in range(1, nr):
            heads.append(self._ring_nodes(ring))
            tails.append(self._ring_nodes(ring + 1))
            conductances.append(np.full(nt, (ring + 0.5) * g.dr * g.dtheta / g.dr))
        for ring in range(1, nr + 1):
            width = g.dr if ring < nr else 0.5 * g.dr
            heads.append(self._ring_nodes(ring))
            tails.append(self._ring_nodes(ring, 1))
            conductances.append(np.full(nt, width / (ring * g.dr * g.dtheta)))

        a, b, c = np.concatenate(heads), np.concatenate(tails), np.concatenate(conductances)
        stiffness = sparse.csr_matrix(
            (np.concatenate([c, c, -c, -c]),
             (np.concatenate([a, b, a, b]), np.concatenate([a, b, b, a]))),
            shape=(n_nodes, n_nodes),
        )

        mass = np.empty(n_nodes)
        mass[0] = np.pi * (0.5 * g.dr) ** 2
        mass[1:] = g.r[1:] * g.dr * g.dtheta
        mass[g.boundary_nodes] = (1.0 - 0.25 * g.dr) * 0.5 * g.dr * g.dtheta
        return stiffness, mass

    def apply_sobolev_inverse(self, f: np.ndarray, shift: float) -> np.ndarray:
        """Solve (2 S + shift M) x = f entrywise over trailing axes"""
        if shift not in self._sobolev_lu:
            stiffness, mass = self.stiffness_and_mass()
            matrix = (2.0 * stiffness + shift * sparse.diags(mass)).tocsc()
            self._sobolev_lu[shift] = splu(matrix)
        flat = f.reshape(f.shape[0], -1)
        return self._sobolev_lu[shift].solve(np.ascontiguousarray(flat)).reshape(f.shape)
