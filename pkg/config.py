"""Configuration management for the lidmed solver library."""
import os

# Linear algebra tolerances
DEFAULT_TOL: float = float(os.getenv("LIDMED_DEFAULT_TOL", "1e-10"))
RANK_RTOL: float = 1e-12  # relative singular-value cutoff, scaled by s_max * n

# Condition A solvers
SOLVER_TOL: float = float(os.getenv("LIDMED_SOLVER_TOL", "1e-11"))
MAX_ITERS: int = int(os.getenv("LIDMED_MAX_ITERS", "200"))
DAMPING: float = 1.0
BACKTRACK_FACTOR: float = 0.5
MIN_STEP: float = 2.0 ** -20
FD_EPS: float = 1e-7  # forward-difference step for the Jacobian fallback
TAYLOR_ORDER: int = 4
MAX_HALVINGS: int = 20
TAYLOR_BLOWUP: float = 1e-3  # residual after a Taylor step that triggers halving
NEWTON_FALLBACK: bool = os.getenv("LIDMED_NEWTON_FALLBACK", "1") not in ("0", "false", "False")

# Optimality certificates
CERT_TOL: float = 1e-8
CERT_EIG_TOL: float = 1e-10

# Random ensemble generation
MAX_CONDITION: float = 1e6
MAX_DRAWS: int = 100

# Barrier-type interior point baseline
BARRIER_WEIGHT: float = 1e-3
BARRIER_DECAY: float = 0.1
BARRIER_MAX_OUTER: int = 6
BARRIER_MAX_INNER: int = 500
BARRIER_INNER_TOL: float = 1e-10
BARRIER_OUTER_TOL: float = 1e-7
BARRIER_START_SHIFT: float = 0.1

# Oracles and benchmarks
GRID_POINT_LIMIT: int = 5_000_000
HAAR_SAMPLES: int = 100_000
HAAR_BATCH: int = 2_000
HAAR_REFINE_SCALES: int = 40  # shrinking perturbation radii after sampling
BENCH_WORKERS: int = int(os.getenv("LIDMED_BENCH_WORKERS", "1"))

# Command line
CLI_TOL: float = 1e-8
CLI_MAX_ITER: int = 200
LOG_LEVEL: str = os.getenv("LIDMED_LOG_LEVEL", "WARNING")
LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
