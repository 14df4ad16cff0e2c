"""
Structure-preserving finite elements for hyperelastic solids described by
Mooney-Rivlin or physics-augmented neural network (PANN) potentials.
"""

from . import errors
from .calibration import Dataset, TrainConfig, gen_loadcase, loss_and_grad, sobolev_loss, train_adam
from .diagnostics import FdReport, StepAudit, audit_quantities, fd_check
from .discrete_gradients import algo_stress, greenspan_dg, midpoint_stress
from .dynamics import DynamicState, run_dynamic, time_step
from .material import (MR_COMPRESSIBLE, MR_NEARLY_INCOMPRESSIBLE, MooneyRivlin, MrParams,
                       PannModel, PannParams, pann_build, pk2)
from .scene import build_scene, cook_scene, lshape_scene
from .solver import FeProblem, LoadStepSchedule, NewtonConfig, newton, static_driver

__version__ = "0.1.0"

__all__ = [
    "errors", "Dataset", "TrainConfig", "gen_loadcase", "loss_and_grad", "sobolev_loss",
    "train_adam", "FdReport", "StepAudit", "audit_quantities", "fd_check", "algo_stress",
    "greenspan_dg", "midpoint_stress", "DynamicState", "run_dynamic", "time_step",
    "MR_COMPRESSIBLE", "MR_NEARLY_INCOMPRESSIBLE", "MooneyRivlin", "MrParams", "PannModel",
    "PannParams", "pann_build", "pk2", "build_scene", "cook_scene", "lshape_scene",
    "FeProblem", "LoadStepSchedule", "NewtonConfig", "newton", "static_driver",
]
