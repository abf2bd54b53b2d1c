import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from app.models.fields import LieAlgebraField, NormalFrameField, RotationField, TorsionField, skew
from app.services.grid_service import DiscOperators

logger = logging.getLogger(__name__)

# Smooth basis {1, u, v, uv, u^2 - v^2} for random rotation fields
_SMOOTH_BASIS = (
    lambda u, v: np.ones_like(u),
    lambda u, v: u,
    lambda u, v: v,
    lambda u, v: u * v,
    lambda u, v: u ** 2 - v ** 2,
)


def exp_so(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of skew matrices over the last two axes

    Closed forms for n = 2 (single angle) and n = 3 (Rodrigues); scipy's
    scaling-and-squaring Pade for larger n.
    """
    a = skew(np.asarray(a, dtype=float))
    n = a.shape[-1]
    if n == 1:
        return np.ones_like(a)
    if n == 2:
        angle = a[..., 0, 1]
        c, s = np.cos(angle), np.sin(angle)
        out = np.empty_like(a)
        out[..., 0, 0] = c
        out[..., 0, 1] = s
        out[..., 1, 0] = -s
        out[..., 1, 1] = c
        return out
    if n == 3:
        angle = np.sqrt(0.5 * np.sum(a ** 2, axis=(-2, -1)))
        first = np.sinc(angle / np.pi)[..., None, None]
        second = 0.5 * np.sinc(angle / (2.0 * np.pi))[..., None, None] ** 2
        return np.eye(3) + first * a + second * (a @ a)
    return expm(a)


def rotation_from_angle(angle: np.ndarray, n: int, plane: Tuple[int, int] = (0, 1)) -> RotationField:
    """Rotation by angle phi in the (p, q) plane: N_p = cos phi N~_p + sin phi N~_q"""
    p, q = plane
    if not (0 <= p < n and 0 <= q < n and p != q):
        raise ValueError(f"Invalid rotation plane {plane} for n={n}")
    angle = np.asarray(angle, dtype=float)
    generator = np.zeros(angle.shape + (n, n))
    generator[..., p, q] = angle
    generator[..., q, p] = -angle
    return RotationField(exp_so(generator))


def random_skew(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random so(n) element with unit Frobenius norm times scale"""
    a = skew(rng.standard_normal((n, n)))
    norm = np.linalg.norm(a)
    return scale * a / norm if norm > 0 else a


def random_rotation_field(
    u: np.ndarray, v: np.ndarray, n: int, rng: np.random.Generator, amplitude: float = 0.5
) -> RotationField:
    """exp(sum_b c_b(u, v) A_b) with random skew A_b over a smooth polynomial basis"""
    generator = np.zeros(u.shape + (n, n))
    for basis in _SMOOTH_BASIS:
        generator += basis(u, v)[:, None, None] * random_skew(n, rng, amplitude)
    return RotationField(exp_so(generator))


def random_initial_rotation(
    r: np.ndarray, n: int, rng: np.random.Generator, amplitude: float
) -> RotationField:
    """Random constant Lie element modulated by the radial bump (1 - r^2)^2"""
    bump = (1.0 - r ** 2) ** 2
    return RotationField(exp_so(bump[:, None, None] * random_skew(n, rng, amplitude)))


class RotationService:
    """Rotation fields acting on normal frames and torsion coefficients"""

    def __init__(self, ops: DiscOperators):
        self.ops = ops

    def apply_rotation(self, frame: NormalFrameField, rotation: RotationField) -> NormalFrameField:
        """N_sigma = sum_theta R[sigma, theta] N~_theta at every node"""
        if frame.n != rotation.n or frame.n_nodes != rotation.matrices.shape[0]:
            raise ValueError(
                f"Frame ({frame.n_nodes} nodes, n={frame.n}) and rotation "
                f"({rotation.matrices.shape[0]} nodes, n={rotation.n}) do not match"
            )
        return NormalFrameField(frame.vectors @ np.swapaxes(rotation.matrices, -1, -2))

    def rotation_partials(self, rotation: RotationField) -> Tuple[np.ndarray, np.ndarray]:
        return self.ops.cartesian_partials(rotation.matrices)

    def transform_torsion(self, torsion: TorsionField, rotation: RotationField) -> TorsionField:
        """T_i = R_{u^i} R^T + R T~_i R^T, skew part taken explicitly"""
        r = rotation.matrices
        r_t = np.swapaxes(r, -1, -2)
        r_u, r_v = self.rotation_partials(rotation)
        t1 = skew(r_u @ r_t) + skew(r @ torsion.t1 @ r_t)
        t2 = skew(r_v @ r_t) + skew(r @ torsion.t2 @ r_t)
        return TorsionField(t1, t2)

    def left_update(
        self, rotation: RotationField, direction: LieAlgebraField, step: float
    ) -> RotationField:
        """R <- exp(-step * D) R, node by node"""
        return RotationField(exp_so(-step * direction.matrices) @ rotation.matrices)

    def random_field(
        self, n: int, rng: np.random.Generator, amplitude: float = 0.5
    ) -> RotationField:
        g = self.ops.grid
        return random_rotation_field(g.u, g.v, n, rng, amplitude)

    def twist(
        self, frame: NormalFrameField, angle: np.ndarray, plane: Optional[Sequence[int]] = None
    ) -> NormalFrameField:
        """Pre-twist a frame by a scalar angle field in one coordinate plane"""
        plane = tuple(plane) if plane is not None else (0, 1)
        return self.apply_rotation(frame, rotation_from_angle(angle, frame.n, plane))

    def constant_field(self, matrix: np.ndarray) -> RotationField:
        """The same rotation at every node"""
        matrix = np.asarray(matrix, dtype=float)
        return RotationField(np.broadcast_to(matrix, (self.ops.grid.n_nodes,) + matrix.shape).copy())
