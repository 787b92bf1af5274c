"""Optimal strong-stability-preserving linear multistep methods."""
from .integrate import (IvpProblem, NewtonError, Trajectory, integrate, max_monotone_dt,
                        monotone_measure, step)
from .lp import LpProblem, LpSolution, certify_infeasible, solve_feasibility
from .methods import (Family, MethodTable, SspCertificate, canonicalize_downwind,
                      order_residuals, satisfies_order, ssp_coefficient_pair, to_underlying)
from .optimize import (BracketCapError, OptFamily, OptimalMethodResult, optimal_method,
                       region_scan, uniqueness_test, verify_additive_beta_equality,
                       verify_nonzero_bound)
from .problems import (LeVequeYeeConfig, harmonic_step_size, leveque_yee_imex_problem,
                       leveque_yee_problem, scalar_cubic_problem)

__all__ = [
    "BracketCapError", "Family", "IvpProblem", "LeVequeYeeConfig", "LpProblem", "LpSolution",
    "MethodTable", "NewtonError", "OptFamily", "OptimalMethodResult", "SspCertificate",
    "Trajectory", "canonicalize_downwind", "certify_infeasible", "harmonic_step_size",
    "integrate", "leveque_yee_imex_problem", "leveque_yee_problem", "max_monotone_dt",
    "monotone_measure", "optimal_method", "order_residuals", "region_scan",
    "satisfies_order", "scalar_cubic_problem", "solve_feasibility", "ssp_coefficient_pair",
    "step", "to_underlying", "uniqueness_test", "verify_additive_beta_equality",
    "verify_nonzero_bound",
]
