"""Optimal minimum-error measurements for linearly independent ensembles."""
try:
    from .complex_linalg import RankProfile
    from .ensemble import Ensemble, Povm, PureDecomposition, decompose, random_ensemble, success_probability
    from .gram import build_gram, dual_basis
    from .med_solver import (
        HomotopySolver,
        MedSolver,
        NewtonSolver,
        SolverConfig,
        homotopy_solve,
        newton_solve,
        povm_from_solution,
        solve_ensemble,
    )
    from .certificates import check_optimal
    from .rotation_map import map_R, map_R_inverse, pgm, pgm_is_optimal
    from .baselines import BarrierSolver, barrier_solve, helstrom_two_state
except ImportError:
    # Fallback for direct script execution
    from complex_linalg import RankProfile
    from ensemble import Ensemble, Povm, PureDecomposition, decompose, random_ensemble, success_probability
    from gram import build_gram, dual_basis
    from med_solver import (
        HomotopySolver,
        MedSolver,
        NewtonSolver,
        SolverConfig,
        homotopy_solve,
        newton_solve,
        povm_from_solution,
        solve_ensemble,
    )
    from certificates import check_optimal
    from rotation_map import map_R, map_R_inverse, pgm, pgm_is_optimal
    from baselines import BarrierSolver, barrier_solve, helstrom_two_state

__version__ = "0.1.0"
__all__ = [
    "RankProfile",
    "Ensemble",
    "Povm",
    "PureDecomposition",
    "decompose",
    "random_ensemble",
    "success_probability",
    "build_gram",
    "dual_basis",
    "MedSolver",
    "NewtonSolver",
    "HomotopySolver",
    "BarrierSolver",
    "SolverConfig",
    "newton_solve",
    "homotopy_solve",
    "povm_from_solution",
    "solve_ensemble",
    "check_optimal",
    "map_R",
    "map_R_inverse",
    "pgm",
    "pgm_is_optimal",
    "barrier_solve",
    "helstrom_two_state",
]
