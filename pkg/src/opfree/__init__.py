"""Operator-valued free probability over B = M_d(C).

Convolution powers of B-valued laws by completely positive maps, computed
by cumulant transport, by compression on a free product and (for integer
multiples of the identity) as sums of free copies; matricial Cauchy and
R-transforms; subordination; and numerical checks of the identities that
tie these together.
"""

from .algebra import TOL, CPMap, Tolerances, apply_cp, choi_of, is_cp, is_eta_minus_id_cp, kraus_from_choi
from .compression import build_V_space, eta_power_compression, eta_power_cumulant, scalar_projection_model
from .correspondence import HilbertBModule, PointedCorrespondence, cp_module, tensor_over_B
from .cumulants import CumulantSeq, cumulants_to_moments, moments_to_cumulants, nc_partitions, r_series
from .errors import (ConstructionError, ConvergenceError, DegreeError, DomainError, OpfreeError, SchemaError,
                     SingularMapError, TruncationError)
from .free_product import FreeProductSpace, cond_expectation, embed, expectation, freeness_selftest
from .io import ProblemSpec, parse_problem
from .laws import (BLaw, bernoulli, cauchy, discrete_law, gtilde, gtilde_inverse, moment, point_mass, r_transform,
                   semicircle)
from .nfold import build_K, build_phi, nfold_sum_moments, verify_intertwine
from .subordination import F_via_eta_identity, density_scalar, phi_X_check, subordination_F, verify_cond_exp

__version__ = "0.1.0"
