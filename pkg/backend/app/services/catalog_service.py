import logging
import math
from typing import Callable, Dict, List, Optional

import numpy as np

from app.core.exceptions import UnknownSurfaceError
from app.models.surface import SurfaceOracle, SurfaceSpec

logger = logging.getLogger(__name__)


def _basis(dim: int, index: int) -> np.ndarray:
    e = np.zeros(dim)
    e[index] = 1.0
    return e


def _zeros(u: np.ndarray, dim: int) -> np.ndarray:
    return np.zeros((u.shape[0], dim))


def _plane(params: Dict[str, float]) -> SurfaceSpec:
    n = int(params.get("codimension", 2))
    aspect = float(params.get("aspect", 1.0))
    if n < 1:
        raise ValueError(f"plane codimension must be >= 1, got {n}")
    dim = n + 2

    def jets(u, v):
        x = _zeros(u, dim)
        x[:, 0], x[:, 1] = u, aspect * v
        xu, xv = _zeros(u, dim), _zeros(u, dim)
        xu[:, 0] = 1.0
        xv[:, 1] = aspect
        return {"x": x, "xu": xu, "xv": xv,
                "xuu": _zeros(u, dim), "xuv": _zeros(u, dim), "xvv": _zeros(u, dim)}

    return SurfaceSpec(
        name="plane",
        n=n,
        params={"codimension": n, "aspect": aspect},
        jets=jets,
        seeds=[_basis(dim, 2 + k) for k in range(n)],
        oracle=SurfaceOracle(
            coulomb_total_torsion=0.0,
            s12_sup=0.0,
            s12_origin=0.0,
            tau_profile=(lambda r: np.zeros_like(r)) if n == 2 else None,
        ),
        description="(u, aspect*v, 0, ..., 0) in R^(n+2); conformal only for aspect = 1",
    )


def _graph_jets(scale: float, dim: int):
    """(u, v, s(u^2 - v^2)/2, s uv, 0, ...) padded to R^dim"""

    def jets(u, v):
        x, xu, xv = _zeros(u, dim), _zeros(u, dim), _zeros(u, dim)
        xuu, xuv, xvv = _zeros(u, dim), _zeros(u, dim), _zeros(u, dim)
        x[:, 0], x[:, 1] = u, v
        x[:, 2], x[:, 3] = 0.5 * scale * (u ** 2 - v ** 2), scale * u * v
        xu[:, 0], xu[:, 2], xu[:, 3] = 1.0, scale * u, scale * v
        xv[:, 1], xv[:, 2], xv[:, 3] = 1.0, -scale * v, scale * u
        xuu[:, 2] = scale
        xuv[:, 3] = scale
        xvv[:, 2] = -scale
        return {"x": x, "xu": xu, "xv": xv, "xuu": xuu, "xuv": xuv, "xvv": xvv}

    return jets


def _graph_oracle(scale: float, with_tau: bool) -> SurfaceOracle:
    lam2 = scale ** 2
    tau = None
    if with_tau:
        def tau(r):
            return 0.5 * np.log((1.0 + lam2 * r ** 2) / (1.0 + lam2))
    return SurfaceOracle(
        coulomb_total_torsion=2.0 * math.pi * (math.log(1.0 + lam2) - lam2 / (1.0 + lam2)),
        s12_sup=2.0 * math.sqrt(2.0) * lam2,
        s12_origin=2.0 * lam2,
        tau_profile=tau,
    )


def _holomorphic_graph(params: Dict[str, float]) -> SurfaceSpec:
    return SurfaceSpec(
        name="holomorphic_graph",
        n=2,
        params={},
        jets=_graph_jets(1.0, 4),
        seeds=[_basis(4, 2), _basis(4, 3)],
        oracle=_graph_oracle(1.0, with_tau=True),
        description="graph of z^2/2: (u, v, (u^2 - v^2)/2, uv) in R^4",
    )


def _holomorphic_graph_embedded(params: Dict[str, float]) -> SurfaceSpec:
    return SurfaceSpec(
        name="holomorphic_graph_embedded",
        n=3,
        params={},
        jets=_graph_jets(1.0, 5),
        seeds=[_basis(5, 2), _basis(5, 3), _basis(5, 4)],
        oracle=_graph_oracle(1.0, with_tau=False),
        description="holomorphic graph inside R^5 with a constant extra normal e5",
    )


def _scaled_graph(params: Dict[str, float]) -> SurfaceSpec:
    scale = float(params.get("lambda", 1.0))
    if scale <= 0:
        raise ValueError(f"scaled_graph lambda must be positive, got {scale}")
    return SurfaceSpec(
        name="scaled_graph",
        n=2,
        params={"lambda": scale},
        jets=_graph_jets(scale, 4),
        seeds=[_basis(4, 2), _basis(4, 3)],
        oracle=_graph_oracle(scale, with_tau=True),
        description="(u, v, lambda(u^2 - v^2)/2, lambda uv) in R^4",
    )


def _clifford_patch(params: Dict[str, float]) -> SurfaceSpec:
    a = float(params.get("scale", 1.0))
    if a <= 0:
        raise ValueError(f"clifford_patch scale must be positive, got {a}")
    c = 1.0 / math.sqrt(2.0)

    def jets(u, v):
        cu, su, cv, sv = np.cos(a * u), np.sin(a * u), np.cos(a * v), np.sin(a * v)
        zero = np.zeros_like(u)
        x = np.column_stack([cu, su, cv, sv]) * c / a
        xu = np.column_stack([-su, cu, zero, zero]) * c
        xv = np.column_stack([zero, zero, -sv, cv]) * c
        xuu = np.column_stack([-cu, -su, zero, zero]) * c * a
        xvv = np.column_stack([zero, zero, -cv, -sv]) * c * a
        return {"x": x, "xu": xu, "xv": xv, "xuu": xuu,
                "xuv": np.zeros_like(x), "xvv": xvv}

    def frame(u, v):
        cu, su, cv, sv = np.cos(a * u), np.sin(a * u), np.cos(a * v), np.sin(a * v)
        zero = np.zeros_like(u)
        n1 = np.column_stack([cu, su, zero, zero])
        n2 = -np.column_stack([zero, zero, cv, sv])
        return np.stack([n1, n2], axis=-1)

    return SurfaceSpec(
        name="clifford_patch",
        n=2,
        params={"scale": a},
        jets=jets,
        frame=frame,
        oracle=SurfaceOracle(coulomb_total_torsion=0.0, s12_sup=0.0, s12_origin=0.0,
                             tau_profile=lambda r: np.zeros_like(r)),
        description="(cos au, sin au, cos av, sin av)/(a sqrt 2): flat normal bundle, analytic frame",
    )


SURFACE_CATALOG: Dict[str, Callable[[Dict[str, float]], SurfaceSpec]] = {
    "plane": _plane,
    "holomorphic_graph": _holomorphic_graph,
    "holomorphic_graph_embedded": _holomorphic_graph_embedded,
    "clifford_patch": _clifford_patch,
    "scaled_graph": _scaled_graph,
}

# Parameters each entry accepts
SURFACE_PARAMETERS: Dict[str, List[str]] = {
    "plane": ["codimension", "aspect"],
    "holomorphic_graph": [],
    "holomorphic_graph_embedded": [],
    "clifford_patch": ["scale"],
    "scaled_graph": ["lambda"],
}


def surface_catalog(name: str, params: Optional[Dict[str, float]] = None) -> SurfaceSpec:
    """Look up a catalog surface and bind its parameters"""
    params = {k: v for k, v in (params or {}).items() if v is not None}
    if name not in SURFACE_CATALOG:
        raise UnknownSurfaceError(
            f"Unknown surface '{name}'; catalog: {', '.join(sorted(SURFACE_CATALOG))}"
        )
    unexpected = set(params) - set(SURFACE_PARAMETERS[name])
    if unexpected:
        raise ValueError(f"Surface '{name}' does not take parameters {sorted(unexpected)}")
    spec = SURFACE_CATALOG[name](params)
    logger.debug(f"Catalog lookup {spec!r}")
    return spec


def surface_codimension(name: str, params: Optional[Dict[str, float]] = None) -> int:
    return surface_catalog(name, params).n


def catalog_listing() -> List[Dict[str, object]]:
    """One entry per surface with its default parameters and known oracles"""
    listing = []
    for name in sorted(SURFACE_CATALOG):
        spec = surface_catalog(name)
        listing.append({
            "name": name,
            "codimension": spec.n,
            "parameters": SURFACE_PARAMETERS[name],
            "frame": "analytic" if spec.frame is not None else "seeded",
            "coulomb_total_torsion": spec.oracle.coulomb_total_torsion,
            "s12_sup": spec.oracle.s12_sup,
            "description": spec.description,
        })
    return listing
