"""Numerical EPR / movable-diaphragm gedanken experiments on periodic lattices."""

__version__ = "0.1.0"

from .lattice import Grid1D, Rep, gaussian_kernel, make_grid, transform_1d
from .measurement import Density, PointerSpec, joint_density, marginal, postselect, ridge_fit, total_variation
from .protocols import ProtocolConfig, ProtocolReport, run_protocol
from .states import Envelope, PreparationParams, StateTensor, build_bohr_state, build_epr_state

__all__ = [
    "Density", "Envelope", "Grid1D", "PointerSpec", "PreparationParams", "ProtocolConfig",
    "ProtocolReport", "Rep", "StateTensor", "build_bohr_state", "build_epr_state",
    "gaussian_kernel", "joint_density", "make_grid", "marginal", "postselect", "ridge_fit",
    "run_protocol", "total_variation", "transform_1d",
]
