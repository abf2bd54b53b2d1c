import logging
import math

import numpy as np

from app.models.fields import CoulombResult, NormalCurvatureField, TauPotential, TorsionField, skew
from app.schemas.report import AprioriReport
from app.services.grid_service import DiscOperators

logger = logging.getLogger(__name__)

CONSTANT_C_NOTE = "geometric constant of the estimate, not computed"


def gamma(n: int) -> float:
    """gamma(n) = min(1/4 sqrt(n(n-1)/2), sqrt(2))"""
    return min(0.25 * math.sqrt(n * (n - 1) / 2.0), math.sqrt(2.0))


class PotentialService:
    """Integral functions of a Coulomb torsion and the a priori report"""

    def __init__(self, ops: DiscOperators):
        self.ops = ops
        self.grid = ops.grid

    def tau_potential(self, torsion: TorsionField, curvature: NormalCurvatureField) -> TauPotential:
        """Solve Laplace(tau) = d_v T_1 - d_u T_2 with tau = 0 on the boundary"""
        _, t1_v = self.ops.cartesian_partials(torsion.t1)
        t2_u, _ = self.ops.cartesian_partials(torsion.t2)
        tau = skew(self.ops.solve_poisson_dirichlet(t1_v - t2_u))

        tau_u, tau_v = self.ops.cartesian_partials(tau)
        residual_gradient = float(max(
            np.max(np.abs(tau_u + torsion.t2)),
            np.max(np.abs(tau_v - torsion.t1)),
        ))
        residual_boundary = float(np.max(np.abs(tau[self.grid.boundary_nodes])))

        # Laplace(tau) + (tau_u tau_v - tau_v tau_u) = S_12 away from the boundary
        nonlinear = tau_u @ tau_v - tau_v @ tau_u
        poisson = self.ops.laplacian(tau) + nonlinear - curvature.s12
        residual_poisson = float(np.max(np.abs(poisson[self.grid.interior_mask])))

        logger.info(
            f"tau potential residuals: gradient {residual_gradient:.2e}, "
            f"boundary {residual_boundary:.2e}, poisson {residual_poisson:.2e}"
        )
        return TauPotential(
            tau=tau,
            residual_gradient=residual_gradient,
            residual_boundary=residual_boundary,
            residual_poisson=residual_poisson,
        )

    def apriori_report(
        self, n: int, result: CoulombResult, curvature: NormalCurvatureField
    ) -> AprioriReport:
        """Evaluate the smallness condition for the a priori torsion bound"""
        s0 = float(np.max(curvature.length))
        g = gamma(n)
        lhs = (math.sqrt(max(n - 2, 0)) / 4.0) * (
            (n - 2) / (2.0 * math.pi) * result.total_torsion + g * s0
        )
        report = AprioriReport(
            n=n,
            total_torsion_min=max(result.total_torsion, 0.0),
            s0=s0,
            gamma=g,
            lhs=max(lhs, 0.0),
            condition_met=lhs < 1.0,
            sup_t=result.torsion.sup_norm(),
            constant_c=CONSTANT_C_NOTE,
        )
        logger.info(f"A priori condition: lhs={report.lhs:.4f}, met={report.condition_met}")
        return report
