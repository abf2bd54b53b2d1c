import logging
from typing import List, Optional

import numpy as np

from app.models.fields import (
    CoulombResult,
    IterationRecord,
    LieAlgebraField,
    NormalFrameField,
    RotationField,
    Route,
    SurfaceJet,
)
from app.schemas.descent import DescentOptions
from app.services.gauge_service import GaugeService
from app.services.grid_service import DiscOperators
from app.services.rotation_service import random_initial_rotation

logger = logging.getLogger(__name__)


class DescentService:
    """Preconditioned gradient descent of total torsion over SO(n) fields"""

    def __init__(self, ops: DiscOperators):
        self.ops = ops
        self.gauge = GaugeService(ops)
        self.geometry = self.gauge.geometry
        self.rotations = self.gauge.rotations

    def initial_rotation(self, n: int, opts: DescentOptions) -> RotationField:
        if not opts.random_init:
            return RotationField.identity(self.ops.grid.n_nodes, n)
        rng = np.random.default_rng(opts.seed)
        return random_initial_rotation(self.ops.grid.r, n, rng, opts.init_amplitude)

    def search_direction(self, gradient: LieAlgebraField, opts: DescentOptions) -> LieAlgebraField:
        """Sobolev gradient (2 S + mu M)^-1 G, entrywise over the so(n) components"""
        return LieAlgebraField(self.ops.apply_sobolev_inverse(gradient.matrices, opts.preconditioner_shift))

    def minimize_total_torsion(
        self,
        jet: SurfaceJet,
        frame: NormalFrameField,
        opts: Optional[DescentOptions] = None,
    ) -> CoulombResult:
        """Minimize R -> total_torsion(transform_torsion(T~, R)) from R_0"""
        opts = opts or DescentOptions()
        seed_torsion = self.geometry.torsion_of_frame(frame)

        rotation = self.initial_rotation(frame.n, opts)
        torsion = self.rotations.transform_torsion(seed_torsion, rotation)
        energy = self.gauge.total_torsion(torsion)
        el_interior, el_boundary = self.gauge.el_residual(torsion)
        history: List[IterationRecord] = [IterationRecord(0, energy, el_interior, el_boundary, 0.0)]
        logger.info(f"Descent start: total torsion {energy:.6e}, EL ({el_interior:.2e}, {el_boundary:.2e})")

        stop_reason = f"iteration budget {opts.max_iterations} exhausted"
        iteration = 0
        while iteration < opts.max_iterations:
            if max(el_interior, el_boundary) <= opts.el_tolerance:
                stop_reason = "EL residuals below tolerance"
                break

            gradient, torsion = self.gauge.rotation_gradient(seed_torsion, rotation)
            direction = self.search_direction(gradient, opts)
            slope = float(np.sum(gradient.matrices * direction.matrices))
            if slope <= 0.0:
                stop_reason = "gradient vanished"
                break

            # Armijo backtracking on the exact discrete functional
            step = opts.initial_step
            accepted = False
            while step >= opts.min_step:
                trial_rotation = self.rotations.left_update(rotation, direction, step)
                trial_torsion = self.rotations.transform_torsion(seed_torsion, trial_rotation)
                trial_energy = self.gauge.total_torsion(trial_torsion)
                if trial_energy <= energy - opts.armijo * step * slope:
                    accepted = True
                    break
                step *= opts.shrink
            if not accepted:
                stop_reason = f"no step above {opts.min_step:g} decreases the functional"
                break

            iteration += 1
            decrease = energy - trial_energy
            rotation, torsion, previous, energy = trial_rotation, trial_torsion, energy, trial_energy
            el_interior, el_boundary = self.gauge.el_residual(torsion)
            history.append(IterationRecord(iteration, energy, el_interior, el_boundary, step))
            logger.debug(
                f"iter {iteration}: total torsion {energy:.6e}, "
                f"EL ({el_interior:.2e}, {el_boundary:.2e}), step {step:.3e}"
            )
            if decrease <= opts.rel_tolerance * max(previous, np.finfo(float).tiny):
                stop_reason = f"relative decrease below {opts.rel_tolerance:g}"
                break

        # Only the EL residuals certify a Coulomb frame
        converged = max(el_interior, el_boundary) <= opts.el_tolerance
        if converged:
            logger.info(f"Descent stopped: {stop_reason}")
        else:
            logger.warning(
                f"Descent did not converge after {iteration} iterations ({stop_reason}); "
                f"EL residuals ({el_interior:.2e}, {el_boundary:.2e}) above {opts.el_tolerance:g}"
            )

        result_frame = self.rotations.apply_rotation(frame, rotation)
        self.geometry.validate_frame(jet, result_frame, "descent")
        logger.info(f"Descent finished after {iteration} iterations: total torsion {energy:.6e}")
        return CoulombResult(
            frame=result_frame,
            rotation=rotation,
            torsion=torsion,
            total_torsion=energy,
            el_interior=el_interior,
            el_boundary=el_boundary,
            iterations=iteration,
            route=Route.DESCENT,
            converged=converged,
            history=history,
        )
