from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional
import numpy as np

JetFunction = Callable[[np.ndarray, np.ndarray], Dict[str, np.ndarray]]
FrameFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SurfaceOracle:
    """Closed-form reference values for a catalog surface, where known"""

    coulomb_total_torsion: Optional[float] = None
    s12_sup: Optional[float] = None
    s12_origin: Optional[float] = None
    # tau[0, 1] of the Coulomb frame as a function of r (codimension 2 only)
    tau_profile: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True, eq=False)
class SurfaceSpec:
    """Analytic conformal immersion X: B -> R^(n+2) with frame data

    jets(u, v) returns arrays keyed x, xu, xv, xuu, xuv, xvv, each of shape
    (nodes, n+2). Either seeds (n constant vectors) or an analytic frame
    function returning (nodes, n+2, n) is provided.
    """

    name: str
    n: int
    params: Dict[str, float]
    jets: JetFunction
    seeds: Optional[List[np.ndarray]] = None
    frame: Optional[FrameFunction] = None
    oracle: SurfaceOracle = field(default_factory=SurfaceOracle)
    description: str = ""

    @property
    def ambient_dim(self) -> int:
        return self.n + 2

    def __repr__(self):
        return f"<SurfaceSpec(name='{self.name}', n={self.n}, params={self.params})>"
