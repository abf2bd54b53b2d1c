from pydantic import BaseModel, Field
from typing import Optional

from app.core.config import settings


class DescentOptions(BaseModel):
    """Options for total-torsion descent over rotation fields"""
    max_iterations: int = Field(default_factory=lambda: settings.descent_max_iterations, gt=0)
    initial_step: float = Field(default_factory=lambda: settings.descent_initial_step, gt=0)
    armijo: float = Field(default_factory=lambda: settings.descent_armijo, gt=0, lt=1,
                          description="Armijo slope factor")
    shrink: float = Field(default_factory=lambda: settings.descent_shrink, gt=0, lt=1)
    min_step: float = Field(default_factory=lambda: settings.descent_min_step, gt=0)
    el_tolerance: float = Field(default_factory=lambda: settings.descent_el_tolerance, gt=0)
    rel_tolerance: float = Field(default_factory=lambda: settings.descent_rel_tolerance, gt=0,
                                 description="Stop when the relative decrease falls below this")
    preconditioner_shift: float = Field(default_factory=lambda: settings.descent_preconditioner_shift, gt=0)

    # Random smooth initial rotation instead of the identity
    random_init: bool = False
    seed: Optional[int] = None
    init_amplitude: float = Field(default_factory=lambda: settings.descent_init_amplitude, gt=0)
