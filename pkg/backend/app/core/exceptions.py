from typing import Optional


class FrameLabError(Exception):
    """Base class for all frame-lab errors"""


class GridResolutionError(FrameLabError, ValueError):
    """Grid sizes below the usable minimum"""


class NonConformalSurfaceError(FrameLabError, ValueError):
    """Surface jets violate the conformality relations"""


class SeedDegeneracyError(FrameLabError, ValueError):
    """Seed vectors lose rank after projection onto the normal space"""

    def __init__(self, message: str, node_index: int):
        super().__init__(message)
        self.node_index = node_index


class CompatibilityError(FrameLabError, ValueError):
    """Neumann data violate the divergence-theorem compatibility"""


class SolverConvergenceError(FrameLabError, RuntimeError):
    """Linear solve did not reach the residual tolerance"""


class FrameInvariantError(FrameLabError, RuntimeError):
    """A produced frame lost orthonormality, tangency or orientation"""


class CodimensionError(FrameLabError, ValueError):
    """Operation not available for this codimension"""


class UnknownSurfaceError(FrameLabError, ValueError):
    """Surface name not in the catalog"""


class ScenarioConfigError(FrameLabError, ValueError):
    """Scenario file could not be parsed or validated"""


class PipelineStageError(FrameLabError, RuntimeError):
    """A scenario stage failed; wraps the original error"""

    def __init__(self, stage: str, cause: Optional[BaseException] = None):
        message = f"stage '{stage}' failed"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)
        self.stage = stage
        self.cause = cause
