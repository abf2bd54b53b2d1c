import logging
import math
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import PipelineStageError, ScenarioConfigError
from app.models.fields import (
    CoulombResult,
    NormalFrameField,
    SurfaceJet,
    TauPotential,
    TorsionField,
)
from app.models.grid import DiscGrid
from app.models.surface import SurfaceSpec
from app.schemas.report import (
    AprioriReport,
    CheckSummary,
    RouteAgreement,
    RouteSummary,
    RunReport,
    StudyReport,
    StudyRow,
)
from app.schemas.scenario import RouteChoice, ScenarioConfig, TwistKind
from app.services.catalog_service import surface_catalog
from app.services.descent_service import DescentService
from app.services.grid_service import DiscOperators, build_polar_grid
from app.services.potential_service import PotentialService
from app.services.report_service import ReportService
from app.services.rotation_service import exp_so, random_skew

logger = logging.getLogger(__name__)

ORDER_FLOOR = 1e-13


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Run one pipeline stage; failures are re-raised with the stage name"""
    logger.info(f"Stage '{name}'")
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as e:
        logger.error(f"Error in stage '{name}': {e}")
        raise PipelineStageError(name, e) from e


def observed_order(coarse: Optional[float], fine: Optional[float]) -> Optional[float]:
    """log2 of successive error ratios; None when either error is at round-off"""
    if coarse is None or fine is None or coarse <= ORDER_FLOOR or fine <= ORDER_FLOOR:
        return None
    return float(math.log2(coarse / fine))


def upper_pairs(n: int) -> List[Tuple[int, int]]:
    return [(s, t) for s in range(n) for t in range(s + 1, n)]


class Toolkit:
    """Services bound to one grid"""

    def __init__(self, grid: DiscGrid):
        self.grid = grid
        self.ops = DiscOperators(grid)
        self.descent = DescentService(self.ops)
        self.gauge = self.descent.gauge
        self.geometry = self.gauge.geometry
        self.rotations = self.gauge.rotations
        self.potentials = PotentialService(self.ops)


@dataclass
class PipelineOutcome:
    config: ScenarioConfig
    toolkit: Toolkit
    spec: SurfaceSpec
    jet: SurfaceJet
    frame: NormalFrameField
    seed_torsion: TorsionField
    total_torsion_initial: float
    results: Dict[str, CoulombResult] = field(default_factory=dict)
    route_agreement: Optional[RouteAgreement] = None
    checks: Dict[str, CheckSummary] = field(default_factory=dict)
    apriori: Optional[AprioriReport] = None
    tau: Optional[TauPotential] = None
    ricci_residual: Optional[float] = None
    weingarten_residual: Optional[float] = None

    @property
    def grid(self) -> DiscGrid:
        return self.toolkit.grid

    @property
    def primary(self) -> Optional[CoulombResult]:
        return self.results.get("descent") or self.results.get("neumann")

    @property
    def final_torsion(self) -> TorsionField:
        return self.primary.torsion if self.primary is not None else self.seed_torsion


class ScenarioService:
    """Runs scenarios end to end: sample, seed, twist, routes, checks, report"""

    def __init__(self, output_dir: Optional[Path] = None):
        self.output_dir = output_dir

    def resolve_output_dir(self, cfg: ScenarioConfig) -> Path:
        """Environment override, then explicit directory, then scenario, then default"""
        override = os.getenv("FRAME_LAB_OUTPUT_DIR") or settings.output_dir_override
        if override:
            return Path(override)
        if self.output_dir is not None:
            return Path(self.output_dir)
        return Path(cfg.output_dir or settings.default_output_dir)

    # ------------------------------------------------------------------
    # pipeline

    def initial_frame(self, toolkit: Toolkit, spec: SurfaceSpec, jet: SurfaceJet) -> NormalFrameField:
        if spec.frame is not None:
            frame = NormalFrameField(spec.frame(toolkit.grid.u, toolkit.grid.v))
            return toolkit.geometry.orient_frame(jet, frame)
        return toolkit.geometry.seed_normal_frame(jet, spec.seeds)

    def run_pipeline(self, cfg: ScenarioConfig) -> PipelineOutcome:
        with stage("grid"):
            toolkit = Toolkit(build_polar_grid(cfg.n_r, cfg.n_theta))
        with stage("sample"):
            spec = surface_catalog(cfg.surface, cfg.surface_params())
            jet = toolkit.geometry.sample_surface(spec)
        with stage("seed"):
            frame = self.initial_frame(toolkit, spec, jet)
            toolkit.geometry.validate_frame(jet, frame, "seed")
        if cfg.twist.kind != TwistKind.NONE:
            with stage("twist"):
                angle = cfg.twist.angle_field(toolkit.grid.u, toolkit.grid.v)
                frame = toolkit.rotations.twist(frame, angle, cfg.twist.zero_based_plane)
                toolkit.geometry.validate_frame(jet, frame, "twist")
        with stage("torsion"):
            seed_torsion = toolkit.geometry.torsion_of_frame(frame)
            total_initial = toolkit.gauge.total_torsion(seed_torsion)
            logger.info(f"Initial total torsion {total_initial:.6f}")

        outcome = PipelineOutcome(
            config=cfg,
            toolkit=toolkit,
            spec=spec,
            jet=jet,
            frame=frame,
            seed_torsion=seed_torsion,
            total_torsion_initial=total_initial,
        )

        if cfg.route.uses_neumann:
            with stage("route:neumann"):
                outcome.results["neumann"] = toolkit.gauge.coulomb_via_neumann(jet, frame)
        if cfg.route.uses_descent:
            with stage("route:descent"):
                opts = cfg.descent
                if opts.seed is None:
                    opts = opts.model_copy(update={"seed": cfg.random_seed})
                outcome.results["descent"] = toolkit.descent.minimize_total_torsion(jet, frame, opts)
        if cfg.route == RouteChoice.BOTH:
            outcome.route_agreement = self.compare_routes(
                outcome.results["neumann"], outcome.results["descent"], cfg.tolerances.route
            )

        for name in cfg.checks:
            with stage(f"check:{name}"):
                outcome.checks[name] = getattr(self, f"check_{name}")(outcome)
        return outcome

    def compare_routes(
        self, neumann: CoulombResult, descent: CoulombResult, tolerance: float
    ) -> RouteAgreement:
        difference = max(
            float(np.max(np.abs(neumann.torsion.t1 - descent.torsion.t1))),
            float(np.max(np.abs(neumann.torsion.t2 - descent.torsion.t2))),
        )
        energy_gap = abs(neumann.total_torsion - descent.total_torsion)
        agreement = RouteAgreement(
            max_torsion_difference=difference,
            total_torsion_difference=energy_gap,
            tolerance=tolerance,
            agree=difference <= tolerance and energy_gap <= tolerance,
        )
        logger.info(f"Route agreement: max |dT| {difference:.2e}, |dT_total| {energy_gap:.2e}")
        return agreement

    # ------------------------------------------------------------------
    # checks

    def _h2_tolerance(self, outcome: PipelineOutcome) -> float:
        return outcome.config.tolerances.constant * outcome.grid.h ** 2

    def check_ricci(self, outcome: PipelineOutcome) -> CheckSummary:
        """Curvature from torsion against the algebraic Ricci equation"""
        geometry = outcome.toolkit.geometry
        tolerance = self._h2_tolerance(outcome)
        from_torsion = geometry.curvature_from_torsion(outcome.seed_torsion, outcome.jet.w)
        fundamental = geometry.second_fundamental(outcome.jet, outcome.frame)
        from_ricci = geometry.curvature_from_ricci(fundamental, outcome.jet)

        difference = float(np.max(np.abs(from_torsion.s12 - from_ricci.s12)))
        skew_defect = float(np.max(np.abs(from_torsion.s12 + np.swapaxes(from_torsion.s12, -1, -2))))
        origin_length = float(from_torsion.length[0])
        residuals = {
            "max_difference": difference,
            "skew_defect": skew_defect,
            "s12_origin_length": origin_length,
            "s12_sup_ricci": float(np.max(from_ricci.length)),
        }
        passed = difference <= tolerance
        notes = []
        oracle = outcome.spec.oracle.s12_origin
        if oracle is not None:
            # |S_12| at the origin is sqrt(2) |S[0, 1]| when only one plane curves
            origin_error = abs(origin_length - math.sqrt(2.0) * oracle)
            residuals["s12_origin_error"] = origin_error
            passed = passed and origin_error <= tolerance
        outcome.ricci_residual = difference
        return CheckSummary(name="ricci", passed=passed, tolerance=tolerance,
                            residuals=residuals, notes=notes)

    def check_weingarten(self, outcome: PipelineOutcome) -> CheckSummary:
        geometry = outcome.toolkit.geometry
        tolerance = self._h2_tolerance(outcome)
        fundamental = geometry.second_fundamental(outcome.jet, outcome.frame)
        residual = geometry.weingarten_residual(outcome.jet, outcome.frame, outcome.seed_torsion, fundamental)
        asymmetry = float(np.max(np.abs(fundamental.l - np.swapaxes(fundamental.l, -1, -2))))
        outcome.weingarten_residual = residual
        return CheckSummary(
            name="weingarten",
            passed=residual <= tolerance,
            tolerance=tolerance,
            residuals={"max_residual": residual, "second_fundamental_asymmetry": asymmetry},
        )

    def check_tau(self, outcome: PipelineOutcome) -> CheckSummary:
        """Integral functions of the Coulomb torsion"""
        toolkit = outcome.toolkit
        tolerance = self._h2_tolerance(outcome)
        torsion = outcome.final_torsion
        curvature = toolkit.geometry.curvature_from_torsion(torsion, outcome.jet.w)
        tau = toolkit.potentials.tau_potential(torsion, curvature)
        outcome.tau = tau

        residuals = {
            "gradient": tau.residual_gradient,
            "boundary": tau.residual_boundary,
            "poisson": tau.residual_poisson,
        }
        passed = (
            tau.residual_gradient <= tolerance
            and tau.residual_poisson <= tolerance
            and tau.residual_boundary == 0.0
        )
        notes = []
        if outcome.primary is None:
            notes.append("no route enabled; tau built from the seed torsion")
        profile = outcome.spec.oracle.tau_profile
        if profile is not None and outcome.spec.n == 2:
            error = float(np.max(np.abs(tau.tau[:, 0, 1] - profile(outcome.grid.r))))
            residuals["closed_form_error"] = error
            passed = passed and error <= tolerance
        return CheckSummary(name="tau", passed=passed, tolerance=tolerance,
                            residuals=residuals, notes=notes)

    def check_invariance(self, outcome: PipelineOutcome) -> CheckSummary:
        """Covariance of S_12 and invariance of |S_12| under random rotation fields"""
        toolkit = outcome.toolkit
        tolerance = self._h2_tolerance(outcome)
        n = outcome.spec.n
        rng = np.random.default_rng(outcome.config.random_seed)
        base = toolkit.geometry.curvature_from_torsion(outcome.seed_torsion, outcome.jet.w)

        covariance, length = 0.0, 0.0
        for _ in range(settings.invariance_samples):
            rotation = toolkit.rotations.random_field(n, rng, settings.invariance_amplitude)
            rotated = toolkit.rotations.transform_torsion(outcome.seed_torsion, rotation)
            curvature = toolkit.geometry.curvature_from_torsion(rotated, outcome.jet.w)
            r = rotation.matrices
            conjugated = r @ base.s12 @ np.swapaxes(r, -1, -2)
            covariance = max(covariance, float(np.max(np.abs(curvature.s12 - conjugated))))
            length = max(length, float(np.max(np.abs(curvature.length - base.length))))

        constant = exp_so(random_skew(n, rng, math.pi / 3.0)) if n > 1 else np.eye(1)
        constant_field = toolkit.rotations.constant_field(constant)
        rotated = toolkit.rotations.transform_torsion(outcome.seed_torsion, constant_field)
        energy = toolkit.gauge.total_torsion(outcome.seed_torsion)
        constant_gap = abs(toolkit.gauge.total_torsion(rotated) - energy)

        residuals = {
            "covariance": covariance,
            "length": length,
            "constant_rotation_gap": constant_gap,
        }
        passed = (
            covariance <= tolerance
            and length <= tolerance
            and constant_gap <= 1e-10 * max(1.0, energy)
        )
        return CheckSummary(name="invariance", passed=passed, tolerance=tolerance, residuals=residuals,
                            notes=[f"{settings.invariance_samples} random rotation fields"])

    def check_apriori(self, outcome: PipelineOutcome) -> CheckSummary:
        toolkit = outcome.toolkit
        fundamental = toolkit.geometry.second_fundamental(outcome.jet, outcome.frame)
        curvature = toolkit.geometry.curvature_from_ricci(fundamental, outcome.jet)
        result = outcome.primary
        if result is None:
            raise ScenarioConfigError("apriori check needs a route (neumann, descent or both)")
        report = toolkit.potentials.apriori_report(outcome.spec.n, result, curvature)
        outcome.apriori = report
        return CheckSummary(
            name="apriori",
            passed=report.condition_met,
            tolerance=1.0,
            residuals={"lhs": report.lhs, "sup_t": report.sup_t, "s0": report.s0},
            notes=[f"constant c: {report.constant_c}"],
        )

    def check_coulomb(self, outcome: PipelineOutcome) -> CheckSummary:
        tolerances = outcome.config.tolerances
        residuals: Dict[str, float] = {}
        passed = bool(outcome.results)
        for name, result in outcome.results.items():
            residuals[f"{name}_el_interior"] = result.el_interior
            residuals[f"{name}_el_boundary"] = result.el_boundary
            passed = passed and max(result.el_interior, result.el_boundary) <= tolerances.el
        notes = [] if outcome.results else ["no route enabled"]
        if outcome.route_agreement is not None:
            residuals["route_torsion_difference"] = outcome.route_agreement.max_torsion_difference
            residuals["route_total_torsion_difference"] = outcome.route_agreement.total_torsion_difference
            passed = passed and outcome.route_agreement.agree
        return CheckSummary(name="coulomb", passed=passed, tolerance=tolerances.el,
                            residuals=residuals, notes=notes)

    # ------------------------------------------------------------------
    # reports

    def route_summary(self, outcome: PipelineOutcome, result: CoulombResult) -> RouteSummary:
        gauge = outcome.toolkit.gauge
        return RouteSummary(
            route=result.route.value,
            total_torsion=result.total_torsion,
            total_torsion_metric=gauge.total_torsion_metric(result.torsion, outcome.jet),
            el_interior=result.el_interior,
            el_boundary=result.el_boundary,
            weak_el_residual=gauge.weak_el_residual(result.torsion),
            sup_torsion=result.torsion.sup_norm(),
            iterations=result.iterations,
            converged=result.converged,
        )

    def torsion_columns(self, torsion: TorsionField) -> Dict[str, np.ndarray]:
        columns = {}
        for s, t in upper_pairs(torsion.n):
            columns[f"t1_{s + 1}{t + 1}"] = torsion.t1[:, s, t]
            columns[f"t2_{s + 1}{t + 1}"] = torsion.t2[:, s, t]
        return columns

    def write_fields(self, outcome: PipelineOutcome, writer: ReportService) -> List[str]:
        grid = outcome.grid
        geometry = outcome.toolkit.geometry
        written = [
            writer.write_field(grid, "conformal_factor", {"w": outcome.jet.w}),
            writer.write_field(grid, "seed_torsion", self.torsion_columns(outcome.seed_torsion)),
        ]
        for name, result in outcome.results.items():
            written.append(writer.write_field(grid, f"coulomb_torsion_{name}", self.torsion_columns(result.torsion)))
            if result.angle is not None:
                written.append(writer.write_field(grid, f"rotation_angle_{name}", {"phi": result.angle}))

        curvature = geometry.curvature_from_torsion(outcome.final_torsion, outcome.jet.w)
        vector, squared = geometry.normal_curvature_vector(curvature)
        columns = {"length": curvature.length, "vector_length_sq": squared}
        for k, (s, t) in enumerate(upper_pairs(curvature.n)):
            columns[f"s12_{s + 1}{t + 1}"] = curvature.s12[:, s, t]
            columns[f"vector_{s + 1}{t + 1}"] = vector[:, k]
        written.append(writer.write_field(grid, "normal_curvature", columns))

        if outcome.tau is not None:
            tau_columns = {f"tau_{s + 1}{t + 1}": outcome.tau.tau[:, s, t] for s, t in upper_pairs(outcome.spec.n)}
            written.append(writer.write_field(grid, "tau", tau_columns))
        return [writer.relative(path) for path in written]

    def build_report(
        self,
        outcome: PipelineOutcome,
        wall_time: float,
        history_file: Optional[str] = None,
        field_files: Optional[List[str]] = None,
    ) -> RunReport:
        cfg = outcome.config
        primary = outcome.primary
        gauge = outcome.toolkit.gauge
        final_torsion = outcome.final_torsion
        metric_gap = abs(gauge.total_torsion_metric(final_torsion, outcome.jet) - gauge.total_torsion(final_torsion))

        return RunReport(
            schema_version=settings.report_schema_version,
            config=cfg.to_flat(),
            surface=outcome.spec.name,
            codimension=outcome.spec.n,
            n_r=cfg.n_r,
            n_theta=cfg.n_theta,
            h=outcome.grid.h,
            conformality_residual=outcome.jet.conformality_residual,
            total_torsion_initial=outcome.total_torsion_initial,
            total_torsion_final=primary.total_torsion if primary else None,
            el_interior=primary.el_interior if primary else None,
            el_boundary=primary.el_boundary if primary else None,
            metric_form_gap=metric_gap,
            weak_el_residual=gauge.weak_el_residual(final_torsion),
            routes={name: self.route_summary(outcome, r) for name, r in outcome.results.items()},
            route_agreement=outcome.route_agreement,
            checks=outcome.checks,
            apriori=outcome.apriori,
            history_file=history_file,
            field_files=field_files or [],
            wall_time=wall_time,
            passed=all(check.passed for check in outcome.checks.values()),
        )

    def run_scenario(self, cfg: ScenarioConfig, write: bool = True) -> RunReport:
        """Execute the full pipeline and, unless write is False, write its outputs"""
        started = time.perf_counter()
        outcome = self.run_pipeline(cfg)

        history_file, field_files = None, []
        if write:
            with stage("report"):
                writer = ReportService(self.resolve_output_dir(cfg))
                descent = outcome.results.get("descent")
                if descent is not None:
                    history_file = writer.relative(writer.write_history(descent.history))
                field_files = self.write_fields(outcome, writer)
                (writer.output_dir / "scenario.env").write_text(cfg.to_env_text())

        report = self.build_report(outcome, time.perf_counter() - started, history_file, field_files)
        if write:
            writer.write_report(report)
        failed = [name for name, check in report.checks.items() if not check.passed]
        if failed:
            logger.warning(f"Checks failed: {', '.join(failed)}")
        logger.info(f"Scenario {cfg.surface} finished in {report.wall_time:.2f}s, passed={report.passed}")
        return report

    # ------------------------------------------------------------------
    # convergence study

    def validate_levels(self, levels: Sequence[Tuple[int, int]]) -> None:
        if len(levels) < 3:
            raise ScenarioConfigError(f"A convergence study needs at least 3 levels, got {len(levels)}")
        for (r0, t0), (r1, t1) in zip(levels, levels[1:]):
            if r1 != 2 * r0 or t1 != 2 * t0:
                raise ScenarioConfigError(
                    f"Levels must double in both directions: {r0}x{t0} -> {r1}x{t1}"
                )

    def convergence_study(
        self, cfg: ScenarioConfig, levels: Sequence[Tuple[int, int]], write: bool = True
    ) -> StudyReport:
        """Run the pipeline at successive doublings and report observed orders"""
        self.validate_levels(levels)
        outcomes: List[PipelineOutcome] = []
        for n_r, n_theta in levels:
            logger.info(f"Study level {n_r}x{n_theta}")
            level_cfg = cfg.with_grid(n_r, n_theta).model_copy(update={"checks": []})
            outcome = self.run_pipeline(level_cfg)
            self.check_ricci(outcome)
            self.check_weingarten(outcome)
            outcomes.append(outcome)

        energies = [
            o.primary.total_torsion if o.primary else o.total_torsion_initial for o in outcomes
        ]
        analytic = outcomes[0].spec.oracle.coulomb_total_torsion
        if analytic is not None and any(o.primary for o in outcomes):
            reference, kind = analytic, "analytic"
            errors: List[Optional[float]] = [abs(e - reference) for e in energies]
        else:
            reference, kind = energies[-1], "finest level"
            errors = [abs(e - reference) for e in energies[:-1]] + [None]

        rows: List[StudyRow] = []
        for k, outcome in enumerate(outcomes):
            el_interior, el_boundary = outcome.toolkit.gauge.el_residual(outcome.final_torsion)
            row = StudyRow(
                n_r=outcome.grid.n_r,
                n_theta=outcome.grid.n_theta,
                h=outcome.grid.h,
                total_torsion=energies[k],
                torsion_error=errors[k],
                el_interior=el_interior,
                el_boundary=el_boundary,
                ricci_residual=outcome.ricci_residual,
                weingarten_residual=outcome.weingarten_residual,
            )
            if k > 0:
                previous = rows[-1]
                row.torsion_order = observed_order(previous.torsion_error, row.torsion_error)
                row.el_interior_order = observed_order(previous.el_interior, row.el_interior)
                row.el_boundary_order = observed_order(previous.el_boundary, row.el_boundary)
                row.ricci_order = observed_order(previous.ricci_residual, row.ricci_residual)
                row.weingarten_order = observed_order(previous.weingarten_residual, row.weingarten_residual)
            rows.append(row)

        study = StudyReport(
            schema_version=settings.report_schema_version,
            surface=cfg.surface,
            reference_total_torsion=reference,
            reference_kind=kind,
            rows=rows,
        )
        if write:
            ReportService(self.resolve_output_dir(cfg)).write_study(study)
        return study
