"""Max-min power control for cell-free and multi-cell massive MIMO.

This package provides:
1. Convex core - bisection and a phase-I QCQP feasibility solver
2. Uplink - globally optimal max-min powers under SAR caps
3. Downlink - successive convex optimisation under IPD caps
4. Baselines - uniform, proportional and fractional power control
"""

from .convex_core import (
    BisectionResult,
    FeasibilityResult,
    QuadraticConstraint,
    bisection,
    qcqp_feasibility,
)
from .ul_opt import UlGainTable, UlSolution, build_gain_table, solve_ul_maxmin, ul_feasible
from .dl_opt import (
    DlProblemData,
    DlSolution,
    build_dl_problem,
    linearize_desired,
    sco_subproblem,
    solve_dl_maxmin,
)
from .baselines import fpc_ul, ppc_dl, upc_dl, upc_ul

__all__ = [
    'BisectionResult',
    'FeasibilityResult',
    'QuadraticConstraint',
    'bisection',
    'qcqp_feasibility',
    'UlGainTable',
    'UlSolution',
    'build_gain_table',
    'solve_ul_maxmin',
    'ul_feasible',
    'DlProblemData',
    'DlSolution',
    'build_dl_problem',
    'linearize_desired',
    'sco_subproblem',
    'solve_dl_maxmin',
    'fpc_ul',
    'ppc_dl',
    'upc_dl',
    'upc_ul',
]
