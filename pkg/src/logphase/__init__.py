"""Finite-element toolkit for the logarithmic double phase operator.

Pieces:

* :mod:`logphase.phi` -- scalar integrand kernels, the t0/kappa
  constants, and the pointwise inequalities as gap functions.
* :mod:`logphase.mesh` -- structured P1 triangulations, discrete
  functions with zero Dirichlet trace, nodal-domain counting.
* :mod:`logphase.modular` -- modulars and Luxemburg norms.
* :mod:`logphase.energy` -- the gradient energy, its weak-form
  operator, the full energy with right-hand side, truncated variants,
  built-in right-hand sides and assumption validation.
* :mod:`logphase.solve` -- monotone fixed-right-hand-side solve,
  fibering projection, constant-sign and sign-changing solvers.
* :mod:`logphase.verify` / :mod:`logphase.cli` -- the executable
  property suite and the command line front end.
"""

from .phi import (
    PhiParams,
    LogConstants,
    compute_log_constants,
    log_constants,
    hlog_eval,
    hlog_density,
    hlog_density_dt,
    f_epsilon,
    f_epsilon_critical_points,
    f_epsilon_almost_increasing_constant,
    young_log_gap,
    monotone_gap,
    quotient_frac_log_max,
    log_growth_check,
)
from .mesh import (
    Mesh,
    DiscreteFunction,
    ExponentField,
    build_rect_mesh,
    element_gradient,
    truncate,
    nodal_domains,
)
from .modular import (
    ModularReport,
    modular_hlog,
    modular_hlog_nodal,
    modular_sobolev,
    modular_var_exp,
    luxemburg_norm,
    norm_grad,
    norm_hlog_nodal,
    poincare_ratio,
)
from .energy import (
    RhsSpec,
    DualVector,
    energy_I,
    apply_A,
    energy_phi,
    grad_phi,
    energy_phi_pm,
    grad_phi_pm,
    builtin_rhs,
    validate_assumptions,
)
from .solve import (
    SolverConfig,
    SolverResult,
    SolverError,
    solve_fixed_rhs,
    fibering_root,
    solve_constant_sign,
    nehari0_project,
    solve_sign_changing,
)

__version__ = "0.1.0"
