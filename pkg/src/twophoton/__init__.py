"""Two-photon coincidence spectra of a driven, damped Jaynes-Cummings system
and the coincidence-window time that maximizes their peak-to-valley ratio."""

__version__ = "0.1.0"

from .hilbert import PEAK_DELTA_TILDE, OperatorSet, SystemParams, build_operator_set, dressed_state, jc_hamiltonian
from .liouville import build_sideband_superops, build_static_liouvillian, devectorize, vectorize
from .floquet import BlochHierarchy, dc_component, integrate_master_equation, solve_bloch_steady_state
from .correlation import (
    G2Coefficients,
    Moments,
    StaticModel,
    background_coeffs,
    delta_conditional,
    delta_unconditional,
    eigen_expand_g2,
    g2_at,
    moments,
)
from .ensemble import (
    CouplingDensity,
    Spectrum,
    average_over_g,
    background_subtract,
    point_mass,
    sample_coupling_distribution,
    spectrum_scan,
)
from .optimize import PvrModel, PvrPoint, RegressionFit, optimal_window, pvr, regression_fit, tau_opt_curve
from .errors import SolverError
