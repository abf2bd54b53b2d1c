from dataclasses import dataclass, field
import numpy as np


@dataclass(frozen=True, eq=False)
class DiscGrid:
    """Polar discretization of the closed unit disc

    Node 0 is the shared center. Ring j (1..n_r) at radius j/n_r holds n_theta
    nodes at angles 2*pi*k/n_theta, stored at index 1 + (j-1)*n_theta + k.
    """

    n_r: int
    n_theta: int
    r: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    quad_weights: np.ndarray
    boundary_nodes: np.ndarray
    boundary_normal: np.ndarray
    boundary_arc_weights: np.ndarray
    interior_mask: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.r.shape[0]

    @property
    def dr(self) -> float:
        return 1.0 / self.n_r

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @property
    def h(self) -> float:
        """Mesh width max(1/n_r, 2*pi/n_theta) used in C*h^2 tolerances"""
        return max(self.dr, self.dtheta)

    @property
    def nodes(self) -> np.ndarray:
        return np.column_stack([self.u, self.v])

    def node_index(self, ring: int, sector: int) -> int:
        if ring == 0:
            return 0
        return 1 + (ring - 1) * self.n_theta + (sector % self.n_theta)

    def ring(self, field_values: np.ndarray, ring: int) -> np.ndarray:
        """Values of a node field on one ring, shape (n_theta, ...)"""
        start = self.node_index(ring, 0)
        return field_values[start:start + self.n_theta]

    def boundary_values(self, field_values: np.ndarray) -> np.ndarray:
        return field_values[self.boundary_nodes]

    def check_field(self, field_values: np.ndarray) -> None:
        if field_values.shape[0] != self.n_nodes:
            raise ValueError(
                f"Field has {field_values.shape[0]} nodes, grid has {self.n_nodes}"
            )

    def __repr__(self):
        return f"<DiscGrid(n_r={self.n_r}, n_theta={self.n_theta}, nodes={self.n_nodes})>"
