"""Joint-friction identification via sparse regression, with an MPC demo.

The package simulates a 2-link planar arm with velocity-dependent joint
friction, recovers derivatives from encoder-grade measurements, identifies
friction models by sparse regression (sequential thresholded least squares
or LASSO) and a nonlinear-regression baseline, and demonstrates the model
quality inside a feed-forward + linear time-varying MPC tracking loop.
"""

__version__ = "0.1.0"

from .dynamics import (ArmParameters, JointState, Plant, TimeSeries,
                       forward_dynamics, inverse_dynamics, simulate)
from .friction import (FunctionLibrary, LibraryModel, StribeckModel,
                       default_friction_library, load_friction_models,
                       save_friction_models)
from .nlreg import StribeckRegressor, fit_stribeck
from .regression import (RegressionProblem, SparseSolution, lasso_cv,
                         pareto_sweep, solve_lasso, solve_ols, solve_stls)
from .signals import (EncoderSpec, TVDiffConfig, finite_difference,
                      quantize_measurements, tvdiff)
from .sindy import (IdentificationDataset, SindyRegressor, identify_friction,
                    preprocess_small_angle, residual_friction_torque)
from .trajectory import (ReferenceTrajectory, SineTrajectorySpec,
                         attach_feedforward, gravity_compensated_pair,
                         generate_sine)
from .mpc import (MpcConfig, QPProblem, build_condensed_qp, linearize_along,
                  run_closed_loop, solve_qp)

__all__ = [name for name in dir() if not name.startswith("_")]
