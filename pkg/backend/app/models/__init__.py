from .grid import DiscGrid
from .fields import (
    CoulombResult,
    IterationRecord,
    LieAlgebraField,
    NormalCurvatureField,
    NormalFrameField,
    RotationField,
    Route,
    SecondFundamentalField,
    SurfaceJet,
    TauPotential,
    TorsionField,
)
from .surface import SurfaceOracle, SurfaceSpec

__all__ = [
    "DiscGrid",
    "SurfaceJet",
    "NormalFrameField",
    "TorsionField",
    "SecondFundamentalField",
    "NormalCurvatureField",
    "RotationField",
    "LieAlgebraField",
    "Route",
    "IterationRecord",
    "CoulombResult",
    "TauPotential",
    "SurfaceOracle",
    "SurfaceSpec",
]
