import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import FrameInvariantError, NonConformalSurfaceError, SeedDegeneracyError
from app.models.fields import (
    NormalCurvatureField,
    NormalFrameField,
    SecondFundamentalField,
    SurfaceJet,
    TorsionField,
    skew,
)
from app.models.surface import SurfaceSpec
from app.services.grid_service import DiscOperators

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameQuality:
    orthonormality: float
    tangency: float
    min_orientation: float

    def is_valid(self, tolerance: float) -> bool:
        return (
            self.orthonormality <= tolerance
            and self.tangency <= tolerance
            and self.min_orientation > 0.0
        )


def conformality_residual(xu: np.ndarray, xv: np.ndarray) -> Tuple[float, np.ndarray]:
    """max(|<Xu,Xu> - <Xv,Xv>|, |<Xu,Xv>|) / W and the conformal factor W"""
    e = np.einsum("pa,pa->p", xu, xu)
    g = np.einsum("pa,pa->p", xv, xv)
    f = np.einsum("pa,pa->p", xu, xv)
    w = 0.5 * (e + g)
    if np.any(w <= 0.0):
        raise NonConformalSurfaceError("Conformal factor vanishes; X is not an immersion")
    residual = float(np.max(np.maximum(np.abs(e - g), np.abs(f)) / w))
    return residual, w


def orientation_determinants(jet: SurfaceJet, vectors: np.ndarray) -> np.ndarray:
    """det(X_u, X_v, N_1, ..., N_n) at every node"""
    basis = np.concatenate([jet.tangents, vectors], axis=-1)
    return np.linalg.det(basis)


class GeometryService:
    """Surface jets, normal frames and curvature of the normal bundle"""

    def __init__(self, ops: DiscOperators):
        self.ops = ops
        self.grid = ops.grid

    def sample_surface(self, spec: SurfaceSpec) -> SurfaceJet:
        """Evaluate the analytic jets of a catalog surface on the grid"""
        jets = spec.jets(self.grid.u, self.grid.v)
        residual, w = conformality_residual(jets["xu"], jets["xv"])
        if residual > settings.conformality_reject:
            logger.error(f"Surface {spec.name} rejected: conformality residual {residual:.3e}")
            raise NonConformalSurfaceError(
                f"Surface '{spec.name}' is not conformal: residual {residual:.3e} "
                f"exceeds {settings.conformality_reject:g}"
            )
        if residual > settings.conformality_tolerance:
            logger.warning(f"Surface {spec.name} conformality residual {residual:.3e} above target")

        jet = SurfaceJet(
            n=spec.n,
            x=jets["x"],
            xu=jets["xu"],
            xv=jets["xv"],
            xuu=jets["xuu"],
            xuv=jets["xuv"],
            xvv=jets["xvv"],
            w=w,
            conformality_residual=residual,
        )
        logger.info(f"Sampled {spec.name} (n={spec.n}) with conformality residual {residual:.2e}")
        return jet

    def _tangent_basis(self, jet: SurfaceJet) -> Tuple[np.ndarray, np.ndarray]:
        """Orthonormal tangent basis from X_u, X_v"""
        t1 = jet.xu / np.linalg.norm(jet.xu, axis=1, keepdims=True)
        t2 = jet.xv - np.einsum("pa,pa->p", jet.xv, t1)[:, None] * t1
        t2 /= np.linalg.norm(t2, axis=1, keepdims=True)
        return t1, t2

    def seed_normal_frame(self, jet: SurfaceJet, seeds: Sequence[np.ndarray]) -> NormalFrameField:
        """Project constant seeds onto the normal space and orthonormalize in order"""
        if len(seeds) != jet.n:
            raise ValueError(f"Need {jet.n} seeds for codimension {jet.n}, got {len(seeds)}")
        t1, t2 = self._tangent_basis(jet)
        n_nodes = jet.x.shape[0]
        columns: List[np.ndarray] = []

        for sigma, seed in enumerate(seeds):
            seed = np.asarray(seed, dtype=float)
            if seed.shape != (jet.ambient_dim,):
                raise ValueError(f"Seed {sigma} has shape {seed.shape}, expected ({jet.ambient_dim},)")
            vec = np.broadcast_to(seed, (n_nodes, jet.ambient_dim)).copy()
            # Two passes of projection keep tangency at round-off level
            for sweep in range(2):
                for basis in [t1, t2] + columns:
                    vec -= np.einsum("pa,pa->p", vec, basis)[:, None] * basis
                if sweep == 0:
                    pivot = np.linalg.norm(vec, axis=1)
                    bad = np.flatnonzero(pivot < settings.seed_pivot_tolerance)
                    if bad.size:
                        node = int(bad[0])
                        logger.error(f"Seed {sigma} degenerate at node {node}")
                        raise SeedDegeneracyError(
                            f"Seed {sigma} loses rank at node {node} "
                            f"(u={self.grid.u[node]:.4f}, v={self.grid.v[node]:.4f}); "
                            f"pivot {pivot[node]:.2e}",
                            node_index=node,
                        )
                vec /= np.linalg.norm(vec, axis=1, keepdims=True)
            columns.append(vec)

        frame = self.orient_frame(jet, NormalFrameField(np.stack(columns, axis=-1)))
        logger.debug(f"Seeded frame quality {self.frame_quality(jet, frame)}")
        return frame

    def orient_frame(self, jet: SurfaceJet, frame: NormalFrameField) -> NormalFrameField:
        """Flip N_n where det(X_u, X_v, N) < 0"""
        dets = orientation_determinants(jet, frame.vectors)
        flip = dets < 0.0
        if not np.any(flip):
            return frame
        vectors = frame.vectors.copy()
        vectors[flip, :, -1] *= -1.0
        logger.debug(f"Flipped N_n at {int(flip.sum())} nodes")
        return NormalFrameField(vectors)

    def frame_quality(self, jet: SurfaceJet, frame: NormalFrameField) -> FrameQuality:
        n = frame.vectors
        gram = np.einsum("pas,pat->pst", n, n)
        tangency = np.einsum("pai,pas->pis", jet.tangents, n)
        return FrameQuality(
            orthonormality=float(np.max(np.abs(gram - np.eye(frame.n)))),
            tangency=float(np.max(np.abs(tangency))),
            min_orientation=float(np.min(orientation_determinants(jet, n))),
        )

    def validate_frame(self, jet: SurfaceJet, frame: NormalFrameField, label: str) -> FrameQuality:
        """Raise if a produced frame violates the normal-frame invariants"""
        quality = self.frame_quality(jet, frame)
        if not quality.is_valid(settings.frame_tolerance):
            logger.error(f"Frame from {label} invalid: {quality}")
            raise FrameInvariantError(f"Frame from {label} violates normal-frame invariants: {quality}")
        return quality

    def frame_partials(self, frame: NormalFrameField) -> Tuple[np.ndarray, np.ndarray]:
        return self.ops.cartesian_partials(frame.vectors)

    def torsion_of_frame(self, frame: NormalFrameField) -> TorsionField:
        """T_i[sigma, theta] = 1/2 (<N_sigma,i, N_theta> - <N_sigma, N_theta,i>)"""
        n_u, n_v = self.frame_partials(frame)
        t1 = skew(np.einsum("pas,pat->pst", n_u, frame.vectors))
        t2 = skew(np.einsum("pas,pat->pst", n_v, frame.vectors))
        return TorsionField(t1, t2)

    def second_fundamental(self, jet: SurfaceJet, frame: NormalFrameField) -> SecondFundamentalField:
        hessian = np.stack(
            [np.stack([jet.xuu, jet.xuv], axis=-1), np.stack([jet.xuv, jet.xvv], axis=-1)],
            axis=-1,
        )
        return SecondFundamentalField(np.einsum("pas,paij->psij", frame.vectors, hessian))

    def curvature_from_torsion(self, torsion: TorsionField, w: np.ndarray) -> NormalCurvatureField:
        """S_12 = d_v T_1 - d_u T_2 + (T_1 T_2 - T_2 T_1)"""
        _, t1_v = self.ops.cartesian_partials(torsion.t1)
        t2_u, _ = self.ops.cartesian_partials(torsion.t2)
        commutator = torsion.t1 @ torsion.t2 - torsion.t2 @ torsion.t1
        return NormalCurvatureField(t1_v - t2_u + commutator, w)

    def curvature_from_ricci(
        self, fundamental: SecondFundamentalField, jet: SurfaceJet
    ) -> NormalCurvatureField:
        """Ricci equation S_12 = sum_k (L_s,1k L_t,2k - L_s,2k L_t,1k) / W"""
        l = fundamental.l
        product = np.einsum("psk,ptk->pst", l[:, :, 0, :], l[:, :, 1, :])
        s12 = (product - np.swapaxes(product, -1, -2)) / jet.w[:, None, None]
        return NormalCurvatureField(s12, jet.w)

    def normal_curvature_vector(self, curvature: NormalCurvatureField) -> Tuple[np.ndarray, np.ndarray]:
        """Components 2 S[s, t] / W for s < t and the squared length"""
        components = curvature.vector_components
        return components, np.sum(components ** 2, axis=-1)

    def weingarten_residual(
        self,
        jet: SurfaceJet,
        frame: NormalFrameField,
        torsion: TorsionField,
        fundamental: SecondFundamentalField,
    ) -> float:
        """max |N_s,i + L_s,ij g^jk X_k - T_i[s, t] N_t| over nodes and indices"""
        partials = self.frame_partials(frame)
        residual = 0.0
        for i, (n_i, t_i) in enumerate(zip(partials, torsion.components())):
            tangential = np.einsum("psj,paj->pas", fundamental.l[:, :, i, :], jet.tangents)
            tangential /= jet.w[:, None, None]
            normal = np.einsum("pst,pat->pas", t_i, frame.vectors)
            residual = max(residual, float(np.max(np.abs(n_i + tangential - normal))))
        return residual

