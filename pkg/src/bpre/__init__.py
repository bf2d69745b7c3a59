"""Small-value probabilities for branching processes in random environment.

Library layout:

  laws         offspring laws (finite support / linear fractional)
  environment  environment models, tilting, rate function, regimes
  pgf          truncated generating-function series and composition
  exact        quenched and annealed exact probabilities, subadditive bounds
  lf           linear-fractional closed forms
  simulate     forward / genealogy / conditioned-spine samplers, MRCA
  rates        decay-rate reports and the two-environment example suites
  cli          command-line front end
"""

from .environment import (
    EnvironmentModel,
    Regime,
    WalkIncrementSummary,
    classify_regime,
    lattice_span,
    rate_function_at_zero,
    solve_critical_tilt,
    summarize_increments,
    tilt,
)
from .errors import (
    BpreError,
    BudgetError,
    ContractError,
    DegenerateLawError,
    NotSupercriticalError,
    PopulationCapError,
    TruncationError,
)
from .exact import (
    EnvSequence,
    FeketeTable,
    QuenchedLaw,
    annealed_pmf,
    annealed_pmf_row,
    fekete_bounds,
    phi_n,
    quenched_pmf,
    quenched_survival,
    smallest_reachable,
    subtree_extinction_identity,
)
from .laws import FiniteLaw, LinearFractionalLaw, OffspringLaw, moments
from .lf import (
    LFQuenchedState,
    agresti_survival_bounds,
    lf_derivative,
    lf_fgen,
    lf_quenched_pmf,
    lf_rho,
)
from .pgf import TruncatedPGF, compose
from .rates import (
    MonotoneRho,
    MrcaRegimeReport,
    RhoReport,
    example1_suite,
    example2_suite,
    monotone_rho,
    mrca_regime_suite,
    rho_report,
)
from .simulate import (
    GenealogyTree,
    ImportanceEstimate,
    MrcaDistribution,
    SpineSample,
    Trajectory,
    conditioned_mrca_sample,
    geiger_sample,
    importance_estimate,
    mrca,
    simulate_forward,
    simulate_tree,
    stream,
    subseed,
    worker_count,
)

__all__ = [name for name in dir() if not name.startswith("_")]
