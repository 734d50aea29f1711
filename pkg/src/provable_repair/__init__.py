"""Provable single-layer repair of feed-forward networks via decoupled networks."""

from .ddnn import Ddnn, Linearization, apply_delta, decouple, eval_ddnn, linearize, set_value_layer
from .errors import (
    FormatError,
    InputError,
    IterationLimitError,
    RepairError,
    RepairTimeoutError,
    SolverProtocolError,
    SolverUnavailableError,
    UnsupportedActivationError,
)
from .jacobian import ParamJacobian, finite_difference_check, param_jacobian
from .lp import LinearProgram, LpOutcome, LpStatus, NormObjective, encode_min_norm, solve, solve_external
from .metrics import LabeledSet, accuracy, check_polytope_spec_sampled, drawdown, generalization
from .network import (
    ActivationKind,
    ActivationPattern,
    Dnn,
    Layer,
    activation_pattern,
    eval_dnn,
    eval_trace,
    eval_with_pattern,
    is_pwl,
)
from .regions import KeyPoint, Polygon2D, RegionPartition, Segment, exactline, key_points, plane_transfer
from .repair import (
    PointConstraint,
    PointSpec,
    PolytopeConstraint,
    PolytopeSpec,
    RepairResult,
    RepairStatus,
    classification_rows,
    point_repair,
    polytope_repair,
    repair_all_layers,
    satisfies_points,
)

__version__ = "0.1.0"
