"""Perturbed learning automata on positive-utility strategic-form games:
simulation, resistance-graph stochastic-stability analysis, and Monte Carlo
cross-validation of the induced finite-state chain."""

from .dynamics import (
    LearnerConfig,
    LearnerState,
    OccupancyReport,
    Trace,
    action_update,
    initial_state,
    occupancy,
    run,
    run_unperturbed_to_absorption,
    step,
    strategy_update,
    vertex_state,
)
from .errors import InfeasibleError, NumericError, ResourceLimitError
from .game import Game, two_player_game
from .netform import (
    DirectedGraph,
    Topology,
    critically_connected,
    induced_graph,
    inverse_total_distance,
    make_netform_game,
    mean_inverse_total_distance,
    nf_utility,
    reach_indicator,
)
from .stability import (
    CoordinationViolationError,
    OneStepGraph,
    ResistanceReport,
    StationaryDistribution,
    TransitionMatrix,
    WGraph,
    best_br_graph,
    build_one_step_graph,
    enumerate_s_graphs,
    estimate_phat,
    eta,
    gamma,
    graph_resistance,
    graph_weight,
    min_hitting_time,
    min_resistance,
    phi_tremble,
    psi_tremble,
    sample_tremble,
    shortest_path_prob,
    stationary_from_graphs,
    stationary_solve,
    stochastically_stable_set,
)

__version__ = "0.1.0"
