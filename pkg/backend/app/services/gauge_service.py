import logging
from typing import Tuple

import numpy as np

from app.core.exceptions import CodimensionError
from app.models.fields import (
    CoulombResult,
    LieAlgebraField,
    NormalFrameField,
    RotationField,
    Route,
    SurfaceJet,
    TorsionField,
    skew,
)
from app.services.geometry_service import GeometryService
from app.services.grid_service import DiscOperators
from app.services.rotation_service import RotationService, rotation_from_angle

logger = logging.getLogger(__name__)

# Test functions phi and their gradients for the weak Euler-Lagrange form
WEAK_TEST_FUNCTIONS = {
    "u": lambda u, v: (np.ones_like(u), np.zeros_like(u)),
    "v": lambda u, v: (np.zeros_like(u), np.ones_like(u)),
    "uv": lambda u, v: (v, u),
    "u2-v2": lambda u, v: (2.0 * u, -2.0 * v),
    "u2+v2": lambda u, v: (2.0 * u, 2.0 * v),
}


class GaugeService:
    """Total torsion, its Euler-Lagrange residuals and gradients"""

    def __init__(self, ops: DiscOperators):
        self.ops = ops
        self.grid = ops.grid
        self.geometry = GeometryService(ops)
        self.rotations = RotationService(ops)

    def total_torsion(self, torsion: TorsionField) -> float:
        """Quadrature of |T_1|^2 + |T_2|^2 over ordered index pairs"""
        return float(self.ops.integrate_disc(torsion.squared_norm()))

    def total_torsion_metric(self, torsion: TorsionField, jet: SurfaceJet) -> float:
        """Parameter-invariant form sum g^ij <T_i, T_j> sqrt(det g)"""
        e = np.einsum("pa,pa->p", jet.xu, jet.xu)
        f = np.einsum("pa,pa->p", jet.xu, jet.xv)
        g = np.einsum("pa,pa->p", jet.xv, jet.xv)
        det = e * g - f ** 2
        t11 = np.sum(torsion.t1 ** 2, axis=(-2, -1))
        t12 = np.sum(torsion.t1 * torsion.t2, axis=(-2, -1))
        t22 = np.sum(torsion.t2 ** 2, axis=(-2, -1))
        density = (g * t11 - 2.0 * f * t12 + e * t22) / np.sqrt(det)
        return float(self.ops.integrate_disc(density))

    def el_residual(self, torsion: TorsionField) -> Tuple[float, float]:
        """Max interior divergence and max boundary flux over all index pairs"""
        div = self.ops.divergence(torsion.t1, torsion.t2)
        flux = self.ops.normal_flux(torsion.t1, torsion.t2)
        interior = float(np.max(np.abs(div[self.grid.interior_mask])))
        boundary = float(np.max(np.abs(flux)))
        return interior, boundary

    def weak_el_residual(self, torsion: TorsionField) -> float:
        """max over test functions of |integral (phi_u T_1 + phi_v T_2)|"""
        residual = 0.0
        for name, gradient in WEAK_TEST_FUNCTIONS.items():
            phi_u, phi_v = gradient(self.grid.u, self.grid.v)
            integrand = phi_u[:, None, None] * torsion.t1 + phi_v[:, None, None] * torsion.t2
            value = float(np.max(np.abs(self.ops.integrate_disc(integrand))))
            logger.debug(f"Weak EL residual for phi={name}: {value:.3e}")
            residual = max(residual, value)
        return residual

    def torsion_gradient(self, torsion: TorsionField) -> LieAlgebraField:
        """Nodal gradient of A -> total_torsion(transform_torsion(T, exp(A)))

        G = 2 sum_i D_i^T (w T_i), so that the plain Frobenius sum of G against
        a perturbation A over all nodes is the directional derivative. It is the
        discrete transpose of -2 div(T) inside plus 2 <T, nu> on the boundary.
        """
        w = self.grid.quad_weights[:, None, None]
        return LieAlgebraField(2.0 * self.ops.partials_transpose(w * torsion.t1, w * torsion.t2))

    def rotation_gradient(
        self, seed_torsion: TorsionField, rotation: RotationField
    ) -> Tuple[LieAlgebraField, TorsionField]:
        """Gradient of R -> total_torsion(transform_torsion(T~, R)) under exp(A) R

        Returns the gradient and the torsion at R.
        """
        r = rotation.matrices
        r_t = np.swapaxes(r, -1, -2)
        w = self.grid.quad_weights[:, None, None]
        r_u, r_v = self.rotations.rotation_partials(rotation)

        q = (r_u @ r_t, r_v @ r_t)
        p = (r @ seed_torsion.t1 @ r_t, r @ seed_torsion.t2 @ r_t)
        t = (skew(q[0]) + skew(p[0]), skew(q[1]) + skew(p[1]))

        transport = self.ops.partials_transpose(w * t[0] @ r, w * t[1] @ r) @ r_t
        local = np.zeros_like(r)
        for t_i, q_i, p_i in zip(t, q, p):
            t_i_t = np.swapaxes(t_i, -1, -2)
            p_i_t = np.swapaxes(p_i, -1, -2)
            local += t_i_t @ q_i + t_i @ p_i_t - p_i_t @ t_i
        gradient = LieAlgebraField(2.0 * (transport + w * local))
        return gradient, TorsionField(t[0], t[1])

    def coulomb_via_neumann(self, jet: SurfaceJet, frame: NormalFrameField) -> CoulombResult:
        """Exact gauge for codimension 2: rotate by the Neumann potential phi"""
        if jet.n != 2 or frame.n != 2:
            raise CodimensionError("Neumann route requires codimension 2")
        try:
            seed_torsion = self.geometry.torsion_of_frame(frame)
            t1, t2 = seed_torsion.t1[:, 0, 1], seed_torsion.t2[:, 0, 1]

            # T = T~ + grad(phi) is divergence free with zero normal flux
            rhs = -self.ops.divergence(t1, t2)
            flux = -self.ops.normal_flux(t1, t2)
            reference = self.ops.integrate_disc(np.abs(t1) + np.abs(t2))
            angle = self.ops.solve_poisson_neumann(rhs, flux, reference_scale=reference)

            rotation = rotation_from_angle(angle, 2)
            coulomb_frame = self.rotations.apply_rotation(frame, rotation)
            self.geometry.validate_frame(jet, coulomb_frame, "Neumann route")

            # Residuals and energy belong to the returned frame
            torsion = self.geometry.torsion_of_frame(coulomb_frame)
            el_interior, el_boundary = self.el_residual(torsion)
            total = self.total_torsion(torsion)
        except Exception as e:
            logger.error(f"Error in Neumann route: {e}")
            raise

        logger.info(
            f"Neumann route: total torsion {self.total_torsion(seed_torsion):.6f} -> {total:.6f}, "
            f"EL residuals ({el_interior:.2e}, {el_boundary:.2e})"
        )
        return CoulombResult(
            frame=coulomb_frame,
            rotation=rotation,
            torsion=torsion,
            total_torsion=total,
            el_interior=el_interior,
            el_boundary=el_boundary,
            iterations=1,
            route=Route.NEUMANN,
            converged=True,
            angle=angle,
        )
