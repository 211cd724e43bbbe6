"""Robust safe-control synthesis with fixed-time convergence guarantees.

The package couples barrier and Lyapunov certificates, tightened for bounded
disturbances and state-estimation error, into a per-step quadratic program
whose slack structure keeps it feasible, and validates the scheme on a
multi-agent underactuated marine-vehicle simulation.
"""

from .certificates import (Box, Certificate, LieData, Plant,
                           estimate_lipschitz, hat_lift, hocbf_reduce,
                           lie_derivatives, robust_margin, smooth_max)
from .fxt_clf import FxtParams, NoGuarantee, fxt_params, fxt_rhs, settling_bound
from .marine_sim import (AgentState, CurrentSpec, Estimator, EstimatorSpec,
                         Trace, VehicleParams, World, current, estimate,
                         plant_from_params, rk4_step, simulate,
                         vehicle_dynamics)
from .qp_controller import (ControllerSpec, ControlResult, QpWeights,
                            assemble_qp, compute_control, delta1_monitor,
                            feasible_point)
from .qp_core import (QpProblem, QpSolution, QpStatus, active_set_oracle,
                      check_point, solve_qp)
from .scenario_cli import (AgentConfig, ConfigError, ScenarioConfig,
                           SummaryReport, build_case_study, default_scenario,
                           desired_state, load_scenario, summarize)

__version__ = "0.1.0"
