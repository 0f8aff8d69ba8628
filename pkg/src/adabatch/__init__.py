"""Adaptive mini-batch SGD for strongly convex finite sums.

Computes sampling-specific expected-smoothness and gradient-noise constants
in closed form, derives the optimal batch size, and runs the adaptive
optimizer that learns it online. Every expectation formula is backed by an
exact enumeration oracle in the test suite.
"""

from .data import (Dataset, ParseError, Partitioning, load_libsvm, make_partitioning,
                   make_synthetic, normalize_rows, parse_libsvm, single_partition)
from .objectives import (Objective, PowerIterationError, SmoothnessProfile, SolveError,
                         power_iteration, smoothness_profile, solve_reference)
from .sampling import (EnumerationBoundError, SampleDraw, SamplingStrategy, draw,
                       enumerate_draws, expected_cardinality, make_strategy,
                       stochastic_gradient)
from .theory import (NoiseAggregates, TotalComplexity, VerifyReport,
                     brute_force_optimal_tau, expected_smoothness, gradient_noise,
                     iteration_bound, noise_aggregates_exact, optimal_tau, step_size,
                     total_complexity, verify_noise_formula)
from .optimizer import (DivergenceError, GradientTracker, RunConfig, RunResult,
                        TraceRecord, derived_seed, grid_search, init_tracker,
                        run_adaptive, run_fixed)

__version__ = "0.1.0"
