"""Constant-sign analysis of Green's functions of u^(n) + M u with two-point conditions."""

from .combinatorics import TwoPointSpace, adjoint, check_na, derivative_space, phi
from .cone import NonlinearProblem, apply_L, build_envelope, cone_membership, picard_solve
from .green import build_green, eval_q, verify_green
from .ode_basis import UNIT, Domain
from .sign_analysis import predict_interval, sweep, verify_sign
from .spectral import FIRST_NEGATIVE, FIRST_POSITIVE, char_det, find_first

__version__ = "0.1.0"
