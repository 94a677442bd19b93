"""Tail inequalities and deviation diagnostics for bounded strongly mixing sequences."""

__version__ = "0.1.0"

from .bounds import (BoundConstants, BoundNotApplicable, LaplaceBound,
                     TailReport, TheoremConstants, aggregate_breta,
                     bern1_bound, bern2_bound, bern3_bound, best_bound,
                     calibrate_c3, laplace_cantor, laplace_fraction,
                     laplace_small_t, make_constants)
from .cantor import (BlockPlan, CantorScheme, GapMap, IntervalUnion,
                     PeelSequence, build_cantor, choose_mdp_blocking,
                     choose_mdp_blocking_triangular, default_delta, gap_map,
                     group, peel)
from .kde_app import (BiasReport, DiffusionSpec, KdeEstimate, KernelSpec,
                  PairDensityIntegral, bias_check, discretize_array,
                  g_integral_ou, get_kernel, kde, kde_rate_function,
                  kde_speed_check, simulate_ou)
from .mdp import (BlockVarianceReport, MdpExperiment, MdpPoint, RateFunction,
                  block_variance_ratio, empirical_rate, sigma_ratio,
                  speed_condition_ok, speed_condition_triangular,
                  variance_ratio_for_blocks)
from .mixing import (MixingProfile, QuantileFunction, SequenceSpec, alpha_at,
                     geometric_profile, independent_profile, k_constant,
                     markov2_mixing, tabulated_profile, v_squared_general,
                     v_squared_stationary)
from .processes import (ArconesReport, IbragimovReport, McTailEstimate,
                        ProcessSpec, SamplePath, arcones_check, bounded_ar1,
                        exact_alpha_two_state, exact_tail_small,
                        ibragimov_indicator_sweep, indicator, interval_sum,
                        mc_tail, process_spec_from_json, rademacher, simulate,
                        two_state_chain, uniform_centered, verify_ibragimov,
                        wilson_interval)
