"""Convergent one-matrix integrals on generalized paths and their theta-function asymptotics.

The package evaluates ``Zhat(gamma)`` exactly through Hankel determinants
of contour moments, builds the spectral curve and the filling-fraction
derivatives of F_0 and F_1, and assembles the oscillatory large-N
expansion in theta functions, its resummation, and the Wick-pairing form
used by the holomorphic anomaly.
"""
from .contour import (BasisPath, GeneralizedPath, Potential, basis_moments, convergence_sectors,
                      default_basis, moment_integral)
from .errors import *  # noqa: F401,F403
from .expansion import StableTerm, assemble_ratio, brute_force_terms, enumerate_stable_terms
from .holan import (enumerate_pairings, fhat_g, gaussian_moment_identity, scalar_fhat2,
                    structure_match)
from .invariants import FgTable, curve_table, fit_from_oracle, stable_pairs
from .oracle import FillingCounts, Oracle, partition_fixed_filling, partition_full, virasoro_residual
from .resummation import ResummedCorrections, eval_resummed, solve_corrections
from .spectral_curve import (CutStructure, SpectralCurveData, boutroux_find, periods_and_tau,
                             solve_curve)
from .theta import ThetaJet, jacobi_theta, theta_eval

__version__ = "0.1.0"
