"""Open symmetric exclusion on weighted graphs: exact solves, duality, closed forms, Monte Carlo."""
from .lattice import (AbgdParams, CapacityError, GraphSpec, ParameterError, decode, encode,
                      from_abgd, homogeneous_segment, site_set, standard_battery, subsets_of,
                      to_abgd, validate)
from .exact import (AbsorptionTable, NumericalError, StationaryDistribution, absorption_distribution,
                    all_absorbed_at_N, build_sep_generator, check_generator_duality,
                    check_two_particle_martingales, stationary_distribution)
from .closed_forms import (CorrelationRequest, MixtureWeights, absorption_level, absorption_levels,
                           absorption_product, centered_correlation, density_profile, harmonic_h,
                           mixture_measure, mixture_weight, mixture_weights, n_point_correlation,
                           ninja_recursion_residual, psi, two_point_correlation)
from .simulate import (DualState, McEstimate, RngStream, StirringOutcome, run_replicas,
                       simulate_dual, simulate_ninja, simulate_sep, simulate_stirring)

__version__ = "0.1.0"
