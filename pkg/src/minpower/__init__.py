"""Power-minimizing linear precoding for the multi-user MIMO downlink.

Exact optimal precoders, their closed-form large-system counterparts and a
Monte Carlo harness comparing OLP, A-OLP, RZF, PA-RZF and ZF.
"""

from .asympt import (
    HeuristicEquivalents,
    OptimalEquivalents,
    heuristic_deteq,
    mu_prime,
    optimal_deteq,
    optimal_rho,
    parzf_power_bar,
    parzf_rho_star,
    rzf_rho_star,
    solve_mu,
    solve_mu_star,
    synthetic_users,
    optimal_equivalents,
)
from .exact import (
    ConvergenceError,
    InfeasibleError,
    PrecoderError,
    PrecoderSolution,
    SolverOptions,
    directions,
    evaluate,
    heuristic,
    olp,
    power_allocation,
    solve_lambda,
    zf,
)
from .harness import ExperimentConfig, ResultsTable, run_sweep, validate
from .model import (
    ChannelRealization,
    SystemConfig,
    UserState,
    dbm_to_watt,
    draw_channel,
    make_users,
    pathloss,
    sample_positions,
)

__version__ = "0.1.0"
