from pydantic_settings import BaseSettings
from typing import Optional
import os
from dotenv import load_dotenv

load_dotenv()


class Settings(BaseSettings):
    """Application settings"""

    # Application
    app_name: str = "frame-lab"
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    report_schema_version: str = "1.0"

    # Output directory; the environment override wins over scenario files
    output_dir_override: Optional[str] = os.getenv("FRAME_LAB_OUTPUT_DIR")
    default_output_dir: str = os.getenv("DEFAULT_OUTPUT_DIR", "frame_lab_output")

    # Geometry tolerances
    conformality_tolerance: float = float(os.getenv("CONFORMALITY_TOLERANCE", "1e-8"))
    conformality_reject: float = float(os.getenv("CONFORMALITY_REJECT", "1e-6"))
    frame_tolerance: float = float(os.getenv("FRAME_TOLERANCE", "1e-10"))
    seed_pivot_tolerance: float = float(os.getenv("SEED_PIVOT_TOLERANCE", "1e-6"))

    # Poisson solvers
    poisson_residual_tolerance: float = float(os.getenv("POISSON_RESIDUAL_TOLERANCE", "1e-10"))
    neumann_compat_tolerance: float = float(os.getenv("NEUMANN_COMPAT_TOLERANCE", "1e-6"))
    neumann_projection_tolerance: float = float(os.getenv("NEUMANN_PROJECTION_TOLERANCE", "5e-2"))

    # Descent defaults
    descent_max_iterations: int = int(os.getenv("DESCENT_MAX_ITERATIONS", "300"))
    descent_initial_step: float = float(os.getenv("DESCENT_INITIAL_STEP", "1.0"))
    descent_armijo: float = float(os.getenv("DESCENT_ARMIJO", "1e-4"))
    descent_shrink: float = float(os.getenv("DESCENT_SHRINK", "0.5"))
    descent_min_step: float = float(os.getenv("DESCENT_MIN_STEP", "1e-10"))
    descent_el_tolerance: float = float(os.getenv("DESCENT_EL_TOLERANCE", "1e-3"))
    descent_rel_tolerance: float = float(os.getenv("DESCENT_REL_TOLERANCE", "1e-16"))
    descent_preconditioner_shift: float = float(os.getenv("DESCENT_PRECONDITIONER_SHIFT", "1e-2"))
    descent_init_amplitude: float = float(os.getenv("DESCENT_INIT_AMPLITUDE", "0.8"))

    # Verification checks
    el_tolerance: float = float(os.getenv("EL_TOLERANCE", "1e-3"))
    check_constant: float = float(os.getenv("CHECK_CONSTANT", "20.0"))  # C in C*h^2
    route_tolerance: float = float(os.getenv("ROUTE_TOLERANCE", "5e-3"))
    invariance_samples: int = int(os.getenv("INVARIANCE_SAMPLES", "5"))
    invariance_amplitude: float = float(os.getenv("INVARIANCE_AMPLITUDE", "0.5"))

    class Config:
        env_file = ".env"
        case_sensitive = False
        extra = "ignore"


# Create settings instance
settings = Settings()
