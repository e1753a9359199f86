"""Integral operators on set-valued functions of bounded variation.

Compact sets are represented by finite point sets in R^d. Set-valued
functions are approximated through their metric selections, and kernel
operators act selection by selection.
"""

from .analysis import (ConvergenceTable, PointwiseBound, a_f_set, bound_continuity, bound_jump,
                       convergence_experiment, integral_modulus, l1_hausdorff_selection_sets,
                       lambda_n)
from .catalog import CATALOG, load_svf
from .errors import BoundViolation, ChainTruncationWarning, DimensionError, SvfApproxError, UsageError
from .integral import (QuadratureRule, WeightFunction, integrate_vector, weighted_metric_integral,
                       weighted_metric_riemann_sum)
from .operators import (Kernel, KernelDiagnostics, apply_scalar, apply_svf, bernstein_basis,
                        bernstein_durrmeyer, diagnostics, kantorovich)
from .selections import (ChainFunction, Selection, chain_function, metric_selection_through,
                         refine_selection, selection_family)
from .sets import (CompactSet, Norm, hausdorff, is_metric_pair, kuratowski_limsup,
                   metric_chains, metric_linear_combination, metric_pairs,
                   minkowski_linear_combination)
from .svf import (ClosedFormSVF, Function, GridSVF, Partition, StepFunction, local_modulus,
                  quasi_modulus, quasi_modulus_left, quasi_modulus_right, total_variation,
                  variation, variation_function)

# longer names for the two kernel constructors
kernel_bernstein_durrmeyer = bernstein_durrmeyer
kernel_kantorovich = kantorovich

__version__ = "0.1.0"
