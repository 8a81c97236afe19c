"""Long-run risk-sensitive impulse control on a dyadic time grid.

Solves the Bellman pair (w, lambda) by span-contraction value iteration
over a frozen Monte Carlo kernel, extracts the induced impulse policy,
and verifies by simulation and certification reports that lambda / delta
matches the achievable long-run entropic rate.
"""

from .bellman import (Action, BellmanSolution, BellmanStep, ImpulseProblem,
                      bellman_apply, contraction_estimate, default_beta,
                      esscher_tv_diagnostic, operator_T, solve_fixed_point)
from .control import (ControlledRun, LongRunEstimate, RandomShiftPolicy,
                      StationaryPolicy, estimate_longrun_value, extract_policy,
                      omega_moment_path, simulate_controlled, stay_policy)
from .entropic import (HolderSplit, RiskParams, effective_sample_size,
                       entropic_utility, entropic_utility_weighted,
                       esscher_weights, holder_split)
from .errors import ConvergenceError, DomainError, NumericalError, RiskImpulseError
from .kernel import (FrozenKernel, build_kernel, esscher_ess,
                     interpolate_grid_function, kernel_entropic_value,
                     load_kernel, save_kernel, stay_values)
from .norms import (GridFunction, StateGrid, beta_omega_norm,
                    beta_span_seminorm, centering_constant, omega_norm,
                    weighted_tv_norm)
from .processes import (DiffusionModel, PathSegment, PdmpModel,
                        StepProcessModel, derive_stream,
                        diffusion_noise_mgf_bound, noise_component_samples,
                        sample_segment)
from .verify import (DriftEstimate, MinorisationEstimate, NoiseBoundCheck,
                     SweepResult, lambda_gamma_sweep, verify_drift,
                     verify_minorisation, verify_noise_bound_example1)

__version__ = "0.1.0"
