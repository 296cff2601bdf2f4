"""Simulation and verification of the random potential of interacting absorbed Bessel processes."""

from .config import ExperimentConfig, reference_c1, reference_c2
from .errors import (BetaSdeError, ClockOverrun, ConfigError, DegenerateClock, HorizonExceeded,
                     InsufficientHits, SingularMatrix, UnsupportedDimension, UnsupportedIndex)
from .lamperti import (RhoPathBundle, clock_change, conditional_from_b_star, extract_b_star,
                       forward_rho_samples, rho_sde_samples, simulate_rho_conditional,
                       simulate_rho_sde)
from .lattice import GraphPotentialParams, determinant, h_beta, is_positive_definite, k_t, solve
from .laws import (GammaParams, GigParams, IgParams, bessel_k_half, bessel_k_ratio_3half,
                   gamma_cdf, gamma_density, gamma_sample, gig_cdf, gig_density, gig_sample,
                   ig_cdf, ig_density, ig_laplace, ig_sample, my_pair_laws, verify_my_property_1d,
                   verify_zero_time_laws, zero_times)
from .matyor import (EqualityLawDraw, ZPathBundle, kernel_K, sample_equality_lhs,
                     sample_equality_rhs, simulate_z_sde, verify_conditional_law,
                     verify_equality_in_law, verify_independence_z_tinf, verify_intertwining,
                     z_from_rho)
from .paths import (BridgePath, HorizonPolicy, SdeOptions, XPathBundle, bessel_bridge_path,
                    simulate_x, simulate_x_mixture)
from .potential import (BetaGridOracle, PotentialSample, RestartParams, nu_density, nu_laplace,
                        nu_logdensity, restart_params, sample_beta_oracle, sample_beta_via_hitting)
from .report import VerificationReport
from .rng import Streams
from .stats import (distance_correlation_test, empirical_laplace, energy_distance_test,
                    ks_2samp, ks_test)
from .suite import run_suite

__version__ = "0.1.0"
