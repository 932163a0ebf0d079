"""Numerical laboratory for a degenerate kinetic p-Laplacian.

Computes the discrete dynamic-programming fixed point for the operator
family combining the normalized infinity Laplacian in velocity with a
Kolmogorov-type transport coupling, cross-validates it against a tug-of-war
game with noise, and verifies the asymptotic mean-value characterizations
against exact solutions.
"""

from .geometry import (GroupPoint, point, identity, compose, inverse, dilate,
                       quasi_norm, quasi_distance, boundary_distance, extension_metric)
from .domains import (Ball, Box, interval, ParabolicCollar, Region, classify_parabolic,
                      KolmogorovRegion, classify_kolmogorov, BoundaryDatum,
                      mcshane_extend, verify_g_eps_lipschitz)
from .operators import (SmoothProfile, ExactSolution, catalog, coin_weights,
                        apply_K, apply_Kp, inf_laplacian_normalized, viscosity_check,
                        DegenerateGradient, profile_by_name)
from .meanvalue import MeanValueVariant, mv_value, mv_residual, mv_limit_estimate
from .quadrature import BallQuadrature, shared_ball_points
from .solver import (SolveConfig, ValueGrid, time_ladder, solve, solve_iterative,
                     apply_dpp, fixed_point_residual, compare,
                     write_grid_binary, read_grid_binary, write_grid_csv)
from .game import (GameConfig, GameState, Strategy, step, run_episode, estimate_value,
                   pull_toward, stay_strategy, greedy_from_grid,
                   supermartingale_diagnostic, episode_rng)

__version__ = "0.1.0"
