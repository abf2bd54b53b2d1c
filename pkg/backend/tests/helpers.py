from functools import lru_cache
from typing import NamedTuple

import numpy as np

from app.models.fields import NormalFrameField, SurfaceJet, TorsionField
from app.models.surface import SurfaceSpec
from app.services.catalog_service import surface_catalog
from app.services.descent_service import DescentService
from app.services.grid_service import DiscOperators, build_polar_grid

LEVELS = [(16, 32), (32, 64), (64, 128)]


@lru_cache(maxsize=None)
def disc_operators(n_r: int, n_theta: int) -> DiscOperators:
    return DiscOperators(build_polar_grid(n_r, n_theta))


class Sampled(NamedTuple):
    ops: DiscOperators
    descent: DescentService
    spec: SurfaceSpec
    jet: SurfaceJet
    frame: NormalFrameField
    torsion: TorsionField


def sample(name: str, n_r: int = 32, n_theta: int = 64, **params) -> Sampled:
    """Catalog surface with its seeded (or analytic, oriented) frame and torsion"""
    ops = disc_operators(n_r, n_theta)
    descent = DescentService(ops)
    geometry = descent.geometry
    spec = surface_catalog(name, params)
    jet = geometry.sample_surface(spec)
    if spec.frame is not None:
        frame = geometry.orient_frame(jet, NormalFrameField(spec.frame(ops.grid.u, ops.grid.v)))
    else:
        frame = geometry.seed_normal_frame(jet, spec.seeds)
    return Sampled(ops, descent, spec, jet, frame, geometry.torsion_of_frame(frame))


def observed_orders(errors):
    errors = np.asarray(errors, dtype=float)
    return np.log2(errors[:-1] / errors[1:])


def h2(ops: DiscOperators, constant: float = 20.0) -> float:
    return constant * ops.grid.h ** 2


