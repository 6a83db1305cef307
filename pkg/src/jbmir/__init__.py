"""Joint XCT/DOT image reconstruction with edge-coupled Mumford-Shah regularization."""

from .dot import DiffusionModel, DotOperator, OpticsGeometry, assemble_system, dot_fidelity_gradient, dot_forward
from .errors import ConfigError, DataError, DotSolveError, JbmirError, NumericalError
from .functional import (
    DotModality,
    JointObjective,
    JointState,
    ModalityParams,
    RegParams,
    TermBreakdown,
    XctModality,
    eval_joint,
)
from .grid import GridGeometry, backward_divergence, disk_mask, forward_gradient
from .metrics import SsimParams, line_profile, ssim_global
from .phantom import PhantomPair, ShapeSpec, add_noise, builtin_phantom, rasterize
from .solver import LineSearchParams, RunLog, ScheduleParams, backtracking_step, jbmir, smir
from .xct import ScanGeometry, radon_adjoint, radon_forward, system_matrix

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DiffusionModel", "DotModality", "DotOperator", "DotSolveError",
    "GridGeometry", "JbmirError", "JointObjective", "JointState", "LineSearchParams", "ModalityParams",
    "NumericalError", "OpticsGeometry", "PhantomPair", "RegParams", "RunLog", "ScanGeometry",
    "ScheduleParams", "ShapeSpec", "SsimParams", "TermBreakdown", "XctModality", "add_noise",
    "assemble_system", "backtracking_step", "backward_divergence", "builtin_phantom", "disk_mask",
    "dot_fidelity_gradient", "dot_forward", "eval_joint", "forward_gradient", "jbmir", "line_profile",
    "radon_adjoint", "radon_forward", "rasterize", "smir", "ssim_global", "system_matrix",
]
