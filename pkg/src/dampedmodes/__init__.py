"""Numerical laboratory for the nonlinearly damped modal system

    u_k'' + (sum_i u_i'**2) u_k' + lambda_k**2 u_k = 0

and its averaged amplitude flow.
"""

__version__ = "0.1.0"

from .averaged import (AveragedState, StationaryProfile, functional_F, grad_F, integrate_averaged,
                       rhs_averaged, stationary_profile, verify_averaged_identities)
from .diagnostics import (ProfileSpec, equipartition_index, phase_drift, profile_error,
                          quotient_series, rescaled_energy_series)
from .errors import (DegenerateInput, IntegrationFailure, InvalidArgument, NeedsDenserSampling,
                     QuadratureFailure)
from .full import (IntegratorConfig, Sampler, fit_decay, integrate_full, verify_energy_identity,
                   verify_polar_reduction)
from .oscillatory import (OscillatoryForcing, PhaseFunction, ScalarHarnessSpec, bernoulli_harness,
                          osc_integral, prop_R_harness, semi_integrability_probe, time_average)
from .spectral import (ModalState, ModeSet, PolarState, Spectrum, Trajectory, classical_energy,
                       from_polar, make_spectrum, support, to_polar)
