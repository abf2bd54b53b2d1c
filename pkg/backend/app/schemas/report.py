from pydantic import BaseModel, Field
from typing import Optional, List, Dict
import math


class AprioriReport(BaseModel):
    """Smallness condition of the a priori torsion estimate"""
    n: int = Field(..., ge=1)
    total_torsion_min: float = Field(..., ge=0, description="Best total torsion found")
    s0: float = Field(..., ge=0, description="sup |S_12|")
    gamma: float = Field(..., ge=0, le=math.sqrt(2.0) + 1e-15)
    lhs: float = Field(..., ge=0)
    condition_met: bool
    sup_t: float = Field(..., ge=0, description="max_i sup |T_i|")
    constant_c: str = "geometric constant of the estimate, not computed"


class CheckSummary(BaseModel):
    """Outcome of one verification suite"""
    name: str
    passed: bool
    tolerance: float
    residuals: Dict[str, float] = {}
    notes: List[str] = []


class RouteSummary(BaseModel):
    """Result of one gauge-fixing route"""
    route: str
    total_torsion: float
    total_torsion_metric: float
    el_interior: float
    el_boundary: float
    weak_el_residual: float
    sup_torsion: float
    iterations: int
    converged: bool


class RouteAgreement(BaseModel):
    """Node-wise comparison of the Neumann and descent torsions"""
    max_torsion_difference: float
    total_torsion_difference: float
    tolerance: float
    agree: bool


class HistoryRecord(BaseModel):
    """One accepted descent step"""
    iteration: int
    total_torsion: float
    el_interior: float
    el_boundary: float
    step: float


class RunReport(BaseModel):
    """Self-contained record of one scenario run"""
    schema_version: str
    config: Dict[str, str]
    surface: str
    codimension: int
    n_r: int
    n_theta: int
    h: float
    conformality_residual: float

    # Total torsion of the (twisted) seed frame and of the best route
    total_torsion_initial: float
    total_torsion_final: Optional[float] = None
    el_interior: Optional[float] = None
    el_boundary: Optional[float] = None
    metric_form_gap: Optional[float] = None
    weak_el_residual: Optional[float] = None

    routes: Dict[str, RouteSummary] = {}
    route_agreement: Optional[RouteAgreement] = None
    checks: Dict[str, CheckSummary] = {}
    apriori: Optional[AprioriReport] = None

    history_file: Optional[str] = None
    field_files: List[str] = []
    wall_time: float
    passed: bool


class StudyRow(BaseModel):
    """One refinement level of a convergence study"""
    n_r: int
    n_theta: int
    h: float
    total_torsion: float
    torsion_error: Optional[float] = None
    torsion_order: Optional[float] = None
    el_interior: float
    el_interior_order: Optional[float] = None
    el_boundary: float
    el_boundary_order: Optional[float] = None
    ricci_residual: float
    ricci_order: Optional[float] = None
    weingarten_residual: float
    weingarten_order: Optional[float] = None


class StudyReport(BaseModel):
    """Convergence study over successive grid doublings"""
    schema_version: str
    surface: str
    reference_total_torsion: Optional[float] = None
    reference_kind: str = Field(..., description="'analytic' or 'finest level'")
    rows: List[StudyRow]
