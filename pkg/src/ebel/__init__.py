"""Expansive block empirical likelihood for stationary time series."""

__version__ = "0.1.0"

from .bel_classic import (BlockSelection, bel_ci_mean, bel_statistic, select_block,
                          select_block_aar, select_block_ftk)
from .blocking import (BEL, EBEL1, EBEL2, BlockScheme, WeightFn, forward_backward_block_sums,
                       forward_block_sums, ol_block_sums, scheme_block_sums)
from .el_core import ELSolution, contains_origin_interior, log_el_ratio, solve_el
from .errors import (BlockLengthError, DegenerateSample, DimensionMismatch, DomainError,
                     EBELError, HullViolation, NonCausal, NonConvergence, ProfileNonConvergence)
from .experiments import (CoverageReport, Method, PowerCurve, coverage_experiment, parse_method,
                          power_curve)
from .inference import (EbelConfig, EstimatingFunction, SmoothFunctionModel, ebel_ci_mean,
                        ebel_region_member, ebel_statistic, ebel_statistic_ef,
                        ebel_statistic_smooth)
from .limit_law import (REFERENCE_90TH, QuantileTable, estimate_quantiles, limit_draw,
                        limit_draw_local_alternative, simulate_limit_draws)
from .processes import (ArmaSpec, Ma1StarSpec, COVERAGE_PROCESSES, long_run_variance,
                        parse_process, simulate_arma, simulate_ma1_star)
