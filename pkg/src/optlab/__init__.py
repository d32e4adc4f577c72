"""optlab: an optimization workbench for regularized empirical risk.

Derivative-oracle problems (linear and small feed-forward models with
logistic, hinge, least-squares, and 01 losses), first-order and
variance-reduced solvers, quasi-Newton / Newton-CG / trust-region methods,
desk-scale learning-theory demos, and a CLI for reproducible trace runs.
"""

from .backend import BACKEND
from .datasets import Dataset, gen_synthetic, parse_libsvm, read_libsvm, write_libsvm
from .errors import (ConfigError, CurvatureError, LibsvmParseError,
                     LineSearchError, NegativeCurvatureError, OptlabError,
                     ShapeError, UnsupportedOracleError)
from .first_order import StepSchedule, gradient_descent, sgd, step_size
from .learning_theory import (LabeledPoints, generalization_gap,
                              separable_by_affine, shatter_check,
                              zero_one_error)
from .params import ParamVector
from .problems import (LinearModel, MlpModel, Problem, Regularizer,
                       conv2d_valid, l1, l2, mlp, mlp_forward,
                       mlp_parameter_count, no_reg, prox_step)
from .second_order import (LbfgsMemory, SteihaugResult, TrustRegionState,
                           bfgs, bfgs_update_inverse, cg_solve, damp_pair,
                           newton_cg, steihaug_cg, stochastic_lbfgs,
                           trust_region, two_loop, wolfe_line_search)
from .trace import (RunResult, StopRule, TraceRecord, read_trace, write_trace)
from .variance_reduced import (GradientTable, dynamic_batch_sgd,
                               dynamic_batch_sizes, saga, sarah, svrg)

__version__ = "0.1.0"
