from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional
import numpy as np


def skew(matrices: np.ndarray) -> np.ndarray:
    """Skew-symmetric part over the last two axes"""
    return 0.5 * (matrices - np.swapaxes(matrices, -1, -2))


@dataclass(frozen=True, eq=False)
class SurfaceJet:
    """Per-node values of X and its first and second partials"""

    n: int
    x: np.ndarray
    xu: np.ndarray
    xv: np.ndarray
    xuu: np.ndarray
    xuv: np.ndarray
    xvv: np.ndarray
    w: np.ndarray
    conformality_residual: float

    @property
    def ambient_dim(self) -> int:
        return self.n + 2

    @property
    def tangents(self) -> np.ndarray:
        """Tangent vectors as columns, shape (nodes, n+2, 2)"""
        return np.stack([self.xu, self.xv], axis=-1)


@dataclass(frozen=True, eq=False)
class NormalFrameField:
    """Per-node orthonormal oriented normal basis, columns N_1..N_n"""

    vectors: np.ndarray

    @property
    def n(self) -> int:
        return self.vectors.shape[-1]

    @property
    def n_nodes(self) -> int:
        return self.vectors.shape[0]

    def column(self, sigma: int) -> np.ndarray:
        return self.vectors[:, :, sigma]


@dataclass(frozen=True, eq=False)
class TorsionField:
    """Torsion coefficients T_i[sigma, theta] = <N_sigma,u^i, N_theta>"""

    t1: np.ndarray
    t2: np.ndarray

    @property
    def n(self) -> int:
        return self.t1.shape[-1]

    def components(self):
        return self.t1, self.t2

    def squared_norm(self) -> np.ndarray:
        """Pointwise |T_1|^2 + |T_2|^2 (Frobenius, ordered index pairs)"""
        return np.sum(self.t1 ** 2, axis=(-2, -1)) + np.sum(self.t2 ** 2, axis=(-2, -1))

    def sup_norm(self) -> float:
        """max_i sup |T_i| with the Frobenius length per node"""
        return float(max(
            np.max(np.sqrt(np.sum(self.t1 ** 2, axis=(-2, -1)))),
            np.max(np.sqrt(np.sum(self.t2 ** 2, axis=(-2, -1)))),
        ))

    @classmethod
    def zeros(cls, n_nodes: int, n: int) -> "TorsionField":
        return cls(np.zeros((n_nodes, n, n)), np.zeros((n_nodes, n, n)))


@dataclass(frozen=True, eq=False)
class SecondFundamentalField:
    """L[sigma][i, j] = <N_sigma, X_{u^i u^j}>, shape (nodes, n, 2, 2)"""

    l: np.ndarray

    @property
    def n(self) -> int:
        return self.l.shape[1]


@dataclass(frozen=True, eq=False)
class NormalCurvatureField:
    """Normal curvature tensor S_12 with the conformal factor it was built against"""

    s12: np.ndarray
    w: np.ndarray

    @property
    def n(self) -> int:
        return self.s12.shape[-1]

    @property
    def length(self) -> np.ndarray:
        return np.sqrt(np.sum(self.s12 ** 2, axis=(-2, -1)))

    @property
    def vector_components(self) -> np.ndarray:
        """2 S[sigma, theta] / W for sigma < theta, shape (nodes, n(n-1)/2)"""
        upper = np.triu_indices(self.n, k=1)
        return 2.0 * self.s12[:, upper[0], upper[1]] / self.w[:, None]


@dataclass(frozen=True, eq=False)
class RotationField:
    """Per-node SO(n) matrices acting as N_sigma = sum_theta R[sigma, theta] N~_theta"""

    matrices: np.ndarray

    @property
    def n(self) -> int:
        return self.matrices.shape[-1]

    def orthogonality_defect(self) -> float:
        eye = np.eye(self.n)
        gram = self.matrices @ np.swapaxes(self.matrices, -1, -2)
        return float(np.max(np.abs(gram - eye)))

    def determinant_defect(self) -> float:
        return float(np.max(np.abs(np.linalg.det(self.matrices) - 1.0)))

    @classmethod
    def identity(cls, n_nodes: int, n: int) -> "RotationField":
        return cls(np.broadcast_to(np.eye(n), (n_nodes, n, n)).copy())


@dataclass(frozen=True, eq=False)
class LieAlgebraField:
    """Per-node so(n) elements"""

    matrices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrices", skew(np.asarray(self.matrices, dtype=float)))


class Route(str, Enum):
    NEUMANN = "neumann"
    DESCENT = "descent"


@dataclass(frozen=True, eq=False)
class IterationRecord:
    iteration: int
    total_torsion: float
    el_interior: float
    el_boundary: float
    step: float


@dataclass(frozen=True, eq=False)
class CoulombResult:
    """Outcome of one gauge-fixing route"""

    frame: NormalFrameField
    rotation: RotationField
    torsion: TorsionField
    total_torsion: float
    el_interior: float
    el_boundary: float
    iterations: int
    route: Route
    converged: bool = True
    history: List[IterationRecord] = field(default_factory=list)
    angle: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class TauPotential:
    """Integral functions of the Coulomb torsion and their verification residuals"""

    tau: np.ndarray
    residual_gradient: float
    residual_boundary: float
    residual_poisson: float
