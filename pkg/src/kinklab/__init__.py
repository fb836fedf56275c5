"""kinklab: a lattice path-integral laboratory for a double-well model.

The broken-symmetry interacting action maps exactly onto a free-field
action under a nonlocal, triangular, unit-Jacobian substitution of path
increments.  This package samples both sides of that equality, checks the
exact lattice identities behind it, and runs the classical-limit experiment
in which the sampled mean path lands on a symmetric-equation kink rather
than on any solution of the broken equation.
"""

__version__ = "0.1.0"

from .action import (
    ActionForm,
    discrete_ito_identity_residual,
    interacting_action,
    ito_sum,
    kinetic_action,
    potential,
    symmetric_action,
)
from .analysis import (
    ComparisonResult,
    DegenerateComparisonError,
    EquivalenceReport,
    EquivalenceRow,
    EstimatorResult,
    ObservableId,
    SweepReport,
    SweepRow,
    compare,
    equivalence_experiment,
    estimate,
    evaluate_observable,
    hbar_sweep,
)
from .classical import (
    ConvergenceError,
    EquationId,
    KinkSolution,
    ProfileKind,
    SingularityError,
    action_gap,
    boundary_action_gap,
    coth_pole_time,
    kink_profile,
    make_kink,
    odd_gap_prediction,
    odd_kink,
    residual,
    solve_broken_bvp,
)
from .core import (
    BlowupReport,
    Branch,
    Lattice,
    ModelParams,
    Path,
    make_lattice,
    make_params,
)
from .sampler import (
    BlowupBudgetError,
    SampleBatch,
    SamplerConfig,
    TuningError,
    run_metropolis,
    sample_mapped_batch,
    sample_wiener_batch,
    sample_wiener_path,
    tune_proposal,
)
from .transform import (
    BlowupError,
    forward_map,
    inverse_map,
    inverse_map_batch,
    numeric_jacobian_det,
    scan_singularities,
)

__all__ = [
    "ActionForm",
    "BlowupBudgetError",
    "BlowupError",
    "BlowupReport",
    "Branch",
    "ComparisonResult",
    "ConvergenceError",
    "DegenerateComparisonError",
    "EquationId",
    "EquivalenceReport",
    "EquivalenceRow",
    "EstimatorResult",
    "KinkSolution",
    "Lattice",
    "ModelParams",
    "ObservableId",
    "Path",
    "ProfileKind",
    "SampleBatch",
    "SamplerConfig",
    "SingularityError",
    "SweepReport",
    "SweepRow",
    "TuningError",
    "action_gap",
    "boundary_action_gap",
    "compare",
    "coth_pole_time",
    "discrete_ito_identity_residual",
    "equivalence_experiment",
    "estimate",
    "evaluate_observable",
    "forward_map",
    "hbar_sweep",
    "interacting_action",
    "inverse_map",
    "inverse_map_batch",
    "ito_sum",
    "kinetic_action",
    "kink_profile",
    "make_kink",
    "make_lattice",
    "make_params",
    "numeric_jacobian_det",
    "odd_gap_prediction",
    "odd_kink",
    "potential",
    "residual",
    "run_metropolis",
    "sample_mapped_batch",
    "sample_wiener_batch",
    "sample_wiener_path",
    "scan_singularities",
    "solve_broken_bvp",
    "symmetric_action",
    "tune_proposal",
]
