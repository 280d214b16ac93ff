"""Numerical laboratory for suspension flows over subshifts of finite type."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .shift import (CylinderFunction, SymbolicSystem, TwoSidedPoint, lipschitz_seminorm,  # noqa: E402
                    metric_distance)
from .thermo import (GibbsData, TransferMatrix, build_transfer_matrix, gibbs_for,  # noqa: E402
                     normalize_potential, pressure, rpf_data, spectral_gap, spectral_radius, verify_gibbs)
from .suspension import (RoofFunction, SuspensionPoint, birkhoff_sum, construct_roof_with_range,  # noqa: E402
                         delta_s, delta_u, delta_u_truncation, flow_evolve, temporal_distance,
                         temporal_range)
from .diophantine import (chord, circle_pair_scan, continued_fraction, diophantine_exponent,  # noqa: E402
                          four_point_certificate)
from .dolgopyat import (BNormContext, b_norm, cancellation_pair_bound, cancellation_search,  # noqa: E402
                        contraction_factor, contraction_report, flat_case_contraction,
                        l1_to_sup_contraction, lasota_yorke_verify)
from .mixing import (CorrelationSeries, Observable, correlation, decay_fit,  # noqa: E402
                     standard_observable, suspension_integral)
from .orbits import (OrbitCensus, OrbitRecord, enumerate_prime_orbits, li, pot_deviation,  # noqa: E402
                     topological_entropy)
