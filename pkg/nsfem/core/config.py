"""
Configuration settings for the generalized Navier-Stokes solver.
"""
import os

class Settings:
    """Solver and study settings"""

    # Flow law defaults (experiment setup)
    DEFAULT_DELTA: float = 1e-5
    DEFAULT_NU0: float = 100.0
    DEFAULT_BETA: float = 0.01

    # Newton iteration
    NEWTON_ABS_TOL: float = 1e-8
    NEWTON_MAX_ITERS: int = 50
    NEWTON_MAX_HALVINGS: int = 10
    CONTINUATION_START: float = 2.0
    CONTINUATION_STEP: float = 0.1

    # Quadrature degrees
    QUAD_DEGREE_NONLINEAR: int = 8  # stress and convection
    QUAD_DEGREE_LINEAR: int = 6
    QUAD_DEGREE_ERROR: int = 10
    EDGE_QUAD_DEGREE: int = 8

    # Pointwise math
    SINGULARITY_GUARD: float = 1e-14

    # Sparse direct solver
    LU_RESIDUAL_TOL: float = 1e-11
    LU_REFINEMENT_STEPS: int = 3

    # Study levels
    MAX_CI_LEVEL: int = 5
    MAX_FULL_TABLES_LEVEL: int = 7

    # --- Runtime (env overridable) ---
    THREADS: int = max(1, int(os.getenv("NSFEM_THREADS", "1")))
    ASSEMBLY_CHUNK_CELLS: int = int(os.getenv("NSFEM_CHUNK_CELLS", "2048"))
    OUTPUT_DIR: str = os.getenv("NSFEM_OUTPUT_DIR", "results")

# Global settings instance
settings = Settings()
