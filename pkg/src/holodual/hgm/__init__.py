"""Holonomic gradient method: Pfaffian systems, initial values, path integration."""

from .core import (DET_CLEARANCE, Path, PathPlan, StateVector, hgm_eval, hgm_eval_all,
                   hgm_eval_path, initial_state, integrate_segment, plan_path,
                   register_pfaffian, straighten_points, system_for, taylor_extend)
from .ode import OdeResult, dopri45
from .pfaffian import (PfaffianSystem, compatibility_residual, dump_pfaffian,
                       heaviside_pfaffian, homogeneous_pfaffian, load_pfaffian,
                       relu_pfaffian)

__all__ = [
    "DET_CLEARANCE", "Path", "PathPlan", "StateVector", "hgm_eval", "hgm_eval_all",
    "hgm_eval_path", "initial_state", "integrate_segment", "plan_path", "register_pfaffian",
    "straighten_points", "system_for", "taylor_extend", "OdeResult", "dopri45",
    "PfaffianSystem", "compatibility_residual", "dump_pfaffian", "heaviside_pfaffian",
    "homogeneous_pfaffian", "load_pfaffian", "relu_pfaffian",
]
