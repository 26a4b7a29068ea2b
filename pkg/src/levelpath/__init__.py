"""Constructive low-loss paths in piecewise-linear network landscapes.

The library builds explicit continuous parameter paths between two
points of a network's loss landscape that provably stay inside a given
sublevel set once the first hidden layer is wider than the number of
training samples, verifies those paths numerically, and produces
machine-checkable disconnection certificates for two-layer networks at
the critical width where the guarantee tips over.
"""

from .activations import A2Report, Activation, LeakyReLU, PiecewiseLinear, a2_falsify
from .connect import connect_sublevel
from .disconnect import (DisconnectionCertificate, barrier_scan,
                         build_width_n_instance, certify_disconnection,
                         embed_extra_neuron, permute_neurons, width_n_spec)
from .engine import (RestoreResult, align_first_layer,
                     first_layer_permutation_path, restore_full_rank)
from .errors import (DegenerateDeterminant, DimensionMismatch, HomotopyFailed,
                     Infeasible, LevelPathError, NoDependentColumn,
                     PreconditionError, RankNotRestored, TrainingDiverged)
from .linalg import (RankDecision, det_sign, exact_solve_right,
                     independent_columns, numeric_rank, span_coefficients)
from .network import (CrossEntropy, Dataset, LossKind, NetworkSpec, SquareLoss,
                      Theta, check_distinct_rows, forward, lerp_theta, loss,
                      output_loss, random_theta)
from .paths import (MatrixCurve, ParamPath, Segment, constant_segment,
                    curve_segment, linear_segment, transfer_neuron,
                    zero_dependent_rows)
from .subnet import subnet_connect
from .train import TrainResult, gradients, train_gd
from .verify import PathReport, path_description, verify_path, write_trace_csv

__version__ = "0.1.0"

__all__ = [
    "A2Report", "Activation", "LeakyReLU", "PiecewiseLinear", "a2_falsify",
    "connect_sublevel",
    "DisconnectionCertificate", "barrier_scan", "build_width_n_instance",
    "certify_disconnection", "embed_extra_neuron", "permute_neurons", "width_n_spec",
    "RestoreResult", "align_first_layer", "first_layer_permutation_path",
    "restore_full_rank",
    "DegenerateDeterminant", "DimensionMismatch", "HomotopyFailed", "Infeasible",
    "LevelPathError", "NoDependentColumn", "PreconditionError", "RankNotRestored",
    "TrainingDiverged",
    "RankDecision", "det_sign", "exact_solve_right", "independent_columns",
    "numeric_rank", "span_coefficients",
    "CrossEntropy", "Dataset", "LossKind", "NetworkSpec", "SquareLoss", "Theta",
    "check_distinct_rows", "forward", "lerp_theta", "loss", "output_loss",
    "random_theta",
    "MatrixCurve", "ParamPath", "Segment", "constant_segment", "curve_segment",
    "linear_segment", "transfer_neuron", "zero_dependent_rows",
    "subnet_connect",
    "TrainResult", "gradients", "train_gd",
    "PathReport", "path_description", "verify_path", "write_trace_csv",
]
