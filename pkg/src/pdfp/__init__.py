"""Primal-dual fixed-point (PDFP) solvers for ``min f1(x) + f2(Bx) + f3(x)``."""

from .operators import (LinearMap, OpNormEstimate, make_conv2d_periodic, make_dense,
                        make_first_difference, make_grad2d, make_identity, make_zero,
                        op_norm_sq_estimate)
from .prox import (ProxFn, SmoothFn, conjugate_prox_via_moreau, prox_group_l1_pairs, prox_l1,
                   prox_quadratic, project_box, project_nonneg, residual_shrink)
from .solvers import (History, IterationRecord, PrimalDualState, ProblemSpec, SolverConfig,
                      StepSizeError, condat_config, condat_step, lambda_norm, m_norm,
                      pdfp2o_step, pdfp2oc_step, pdfp_step, solve, validate_config)
from .problems import (FusedLassoSpec, TvRestorationSpec, build_fused_lasso,
                       build_tv_restoration, kkt_residual, objective, synthesize_fused_lasso,
                       synthesize_tv_restoration)

__version__ = "0.1.0"
