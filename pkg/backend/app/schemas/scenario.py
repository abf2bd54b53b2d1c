from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.core.config import settings
from app.core.exceptions import ScenarioConfigError
from app.schemas.descent import DescentOptions
from app.services.catalog_service import surface_codimension

KNOWN_CHECKS = ("ricci", "weingarten", "tau", "invariance", "apriori", "coulomb")


class RouteChoice(str, Enum):
    NEUMANN = "neumann"
    DESCENT = "descent"
    BOTH = "both"

    @property
    def uses_neumann(self) -> bool:
        return self in (RouteChoice.NEUMANN, RouteChoice.BOTH)

    @property
    def uses_descent(self) -> bool:
        return self in (RouteChoice.DESCENT, RouteChoice.BOTH)


class TwistKind(str, Enum):
    NONE = "none"
    CONSTANT = "constant"
    LINEAR = "linear"
    BUMP = "bump"


class TwistSpec(BaseModel):
    """Closed-form angle field used to pre-twist the seed frame"""
    kind: TwistKind = TwistKind.NONE
    angle: float = 0.0
    a: float = 0.0
    b: float = 0.0
    amplitude: float = 0.0
    plane: Tuple[int, int] = Field((1, 2), description="1-based normal indices of the rotation plane")

    @field_validator("plane", mode="before")
    @classmethod
    def parse_plane(cls, value):
        if isinstance(value, str):
            parts = [p for p in value.replace(" ", "").split(",") if p]
            return tuple(int(p) for p in parts)
        return value

    @field_validator("plane")
    @classmethod
    def check_plane(cls, value):
        p, q = value
        if p < 1 or q < 1 or p == q:
            raise ValueError(f"twist plane must be two distinct 1-based indices, got {value}")
        return value

    def angle_field(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """phi(u, v): constant, a u + b v, or amplitude (1 - r^2)^2"""
        if self.kind == TwistKind.CONSTANT:
            return np.full_like(u, self.angle)
        if self.kind == TwistKind.LINEAR:
            return self.a * u + self.b * v
        if self.kind == TwistKind.BUMP:
            return self.amplitude * (1.0 - u ** 2 - v ** 2) ** 2
        return np.zeros_like(u)

    @property
    def zero_based_plane(self) -> Tuple[int, int]:
        return self.plane[0] - 1, self.plane[1] - 1


class ToleranceOptions(BaseModel):
    """Verification tolerances; grid-dependent checks use constant * h^2"""
    el: float = Field(default_factory=lambda: settings.el_tolerance, gt=0)
    constant: float = Field(default_factory=lambda: settings.check_constant, gt=0)
    route: float = Field(default_factory=lambda: settings.route_tolerance, gt=0)


# Flat file key -> (section, field); section None means top level
_FLAT_KEYS: Dict[str, Tuple[Optional[str], str]] = {
    "SURFACE": (None, "surface"),
    "SURFACE_CODIMENSION": (None, "surface_codimension"),
    "SURFACE_SCALE": (None, "surface_scale"),
    "SURFACE_LAMBDA": (None, "surface_lambda"),
    "SURFACE_ASPECT": (None, "surface_aspect"),
    "N_R": (None, "n_r"),
    "N_THETA": (None, "n_theta"),
    "ROUTE": (None, "route"),
    "CHECKS": (None, "checks"),
    "OUTPUT_DIR": (None, "output_dir"),
    "RANDOM_SEED": (None, "random_seed"),
    "TWIST": ("twist", "kind"),
    "TWIST_ANGLE": ("twist", "angle"),
    "TWIST_A": ("twist", "a"),
    "TWIST_B": ("twist", "b"),
    "TWIST_AMPLITUDE": ("twist", "amplitude"),
    "TWIST_PLANE": ("twist", "plane"),
    "DESCENT_MAX_ITERATIONS": ("descent", "max_iterations"),
    "DESCENT_INITIAL_STEP": ("descent", "initial_step"),
    "DESCENT_ARMIJO": ("descent", "armijo"),
    "DESCENT_SHRINK": ("descent", "shrink"),
    "DESCENT_MIN_STEP": ("descent", "min_step"),
    "DESCENT_EL_TOLERANCE": ("descent", "el_tolerance"),
    "DESCENT_REL_TOLERANCE": ("descent", "rel_tolerance"),
    "DESCENT_PRECONDITIONER_SHIFT": ("descent", "preconditioner_shift"),
    "DESCENT_RANDOM_INIT": ("descent", "random_init"),
    "DESCENT_INIT_AMPLITUDE": ("descent", "init_amplitude"),
    "TOLERANCE_EL": ("tolerances", "el"),
    "TOLERANCE_CONSTANT": ("tolerances", "constant"),
    "TOLERANCE_ROUTE": ("tolerances", "route"),
}


def _flat_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


class ScenarioConfig(BaseModel):
    """One scenario: surface, grid, route, twist, checks and options"""
    surface: str
    surface_codimension: Optional[int] = None
    surface_scale: Optional[float] = None
    surface_lambda: Optional[float] = None
    surface_aspect: Optional[float] = None
    n_r: int = 32
    n_theta: int = 64
    route: RouteChoice = RouteChoice.DESCENT
    twist: TwistSpec = Field(default_factory=TwistSpec)
    checks: List[str] = []
    output_dir: Optional[str] = None
    random_seed: int = 0
    descent: DescentOptions = Field(default_factory=DescentOptions)
    tolerances: ToleranceOptions = Field(default_factory=ToleranceOptions)

    @field_validator("checks", mode="before")
    @classmethod
    def parse_checks(cls, value):
        if isinstance(value, str):
            return [c.strip().lower() for c in value.split(",") if c.strip()]
        return value

    @field_validator("checks")
    @classmethod
    def known_checks(cls, value):
        unknown = [c for c in value if c not in KNOWN_CHECKS]
        if unknown:
            raise ValueError(f"Unknown checks {unknown}; known: {', '.join(KNOWN_CHECKS)}")
        return list(dict.fromkeys(value))

    @model_validator(mode="after")
    def route_matches_codimension(self):
        n = surface_codimension(self.surface, self.surface_params())
        if self.route.uses_neumann and n != 2:
            raise ValueError(f"route={self.route.value} requires codimension 2, surface '{self.surface}' has n={n}")
        if self.twist.kind != TwistKind.NONE and max(self.twist.plane) > n:
            raise ValueError(f"twist plane {self.twist.plane} exceeds codimension {n}")
        return self

    def surface_params(self) -> Dict[str, float]:
        params = {
            "codimension": self.surface_codimension,
            "scale": self.surface_scale,
            "lambda": self.surface_lambda,
            "aspect": self.surface_aspect,
        }
        return {k: v for k, v in params.items() if v is not None}

    def with_grid(self, n_r: int, n_theta: int) -> "ScenarioConfig":
        return self.model_copy(update={"n_r": n_r, "n_theta": n_theta})

    @classmethod
    def from_flat(cls, values: Mapping[str, Optional[str]]) -> "ScenarioConfig":
        """Build from KEY=value pairs; unknown keys are rejected"""
        data: Dict[str, Union[str, Dict[str, str]]] = {}
        for key, value in values.items():
            upper = key.strip().upper()
            if upper not in _FLAT_KEYS:
                raise ScenarioConfigError(f"Unknown scenario key '{key}'")
            if value is None or value.strip() == "":
                raise ScenarioConfigError(f"Scenario key '{key}' has no value")
            section, name = _FLAT_KEYS[upper]
            if section is None:
                data[name] = value.strip()
            else:
                data.setdefault(section, {})[name] = value.strip()
        if "surface" not in data:
            raise ScenarioConfigError("Scenario is missing SURFACE")
        try:
            config = cls.model_validate(data)
        except ValidationError as e:
            raise ScenarioConfigError(f"Invalid scenario: {e}") from e
        if config.descent.seed is None:
            config = config.model_copy(
                update={"descent": config.descent.model_copy(update={"seed": config.random_seed})}
            )
        return config

    @classmethod
    def from_env_file(cls, path: Union[str, Path]) -> "ScenarioConfig":
        path = Path(path)
        if not path.is_file():
            raise ScenarioConfigError(f"Scenario file not found: {path}")
        return cls.from_flat(dotenv_values(path))

    def to_flat(self) -> Dict[str, str]:
        """KEY=value echo that re-runs this scenario"""
        flat: Dict[str, str] = {}
        for key, (section, name) in _FLAT_KEYS.items():
            owner = self if section is None else getattr(self, section)
            value = getattr(owner, name)
            if value is None or (name == "checks" and not value):
                continue
            flat[key] = _flat_value(value)
        return flat

    def to_env_text(self) -> str:
        return "".join(f"{key}={value}\n" for key, value in self.to_flat().items())
