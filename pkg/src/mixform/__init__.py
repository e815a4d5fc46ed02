"""Distributed end-effector formation control of planar two-link arms.

The group may mix fully-actuated arms with passive-active arms (first joint
unactuated). See :mod:`mixform.sim` for the closed-loop simulator and
:mod:`mixform.scenario` for the built-in cases.
"""

from .control import Gains, NetworkState, control_fa, control_pa, lyapunov, stationarity_residuals
from .dynamics import AlphaParams, JointState, ManipulatorParams, alphas
from .errors import (
    AssumptionViolation,
    BranchDomainError,
    DivergenceError,
    MixformError,
    ParameterError,
    ScenarioError,
)
from .formation import FormationSpec, incidence_matrix
from .kinematics import BasePose, HolonomicBranch, find_singularities, holonomic_branch
from .network import Agent, Network, NetworkModel
from .scenario import builtin_case, load_scenario, save_scenario
from .sim import Scenario, SimConfig, TrajectoryLog, run, step, verify_run

__version__ = "0.1.0"
