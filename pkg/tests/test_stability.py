import math

import numpy as np
import pytest

from plautomata import (
    CoordinationViolationError,
    InfeasibleError,
    OneStepGraph,
    ResourceLimitError,
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
    two_player_game,
)
from plautomata.stability import _enumerate_arborescences

from conftest import random_positive_game

# State encoding of a 2x2 game: (0,0)=0, (1,0)=1, (0,1)=2, (1,1)=3.


def stag_hunt():
    return two_player_game([[3, 1], [1, 2]], [[3, 1], [1, 2]], name="stag")


def analytic(matrix):
    return TransitionMatrix(matrix=np.asarray(matrix, float), provenance="analytic")


# -- scalar formulas ---------------------------------------------------------


def test_phi_tremble():
    assert phi_tremble(0.0, 5) == 0.0
    assert phi_tremble(1.0, 5) == 1.0
    assert abs(phi_tremble(0.1, 2) - 0.19) < 1e-15


def test_psi_tremble():
    # 1 - n lam (1-lam)^{n-1} / (1 - (1-lam)^n); at lam=1/2, n=2 this is 1/3
    assert abs(psi_tremble(0.5, 2) - 1.0 / 3.0) < 1e-15
    assert psi_tremble(1.0, 3) == 1.0
    with pytest.raises(ValueError):
        psi_tremble(0.0, 2)


def test_gamma():
    assert gamma(3, 4) == 1.0 / 12.0
    assert gamma(1, 1) == 1.0
    with pytest.raises(ValueError):
        gamma(0, 2)


def test_eta_endpoints_and_dilogarithm_identity():
    assert eta(1.0) == 0.0
    assert abs(eta(0.0, tol=1e-7) + math.pi**2 / 6.0) < 1e-6
    # eta(d) = -pi^2/6 + dilog(d); check against the independent dilog series
    for d in (0.05, 0.1, 0.5, 0.9):
        dilog = sum(d**l / l**2 for l in range(1, 200))
        assert abs(eta(d, tol=1e-7) - (dilog - math.pi**2 / 6.0)) < 1e-6
    # closer to 1 means fewer required consecutive wins, so less cost
    assert eta(0.9) > eta(0.1)


def test_min_hitting_time():
    assert min_hitting_time(0.01, 0.1, 1.0) == 44
    assert min_hitting_time(0.5, 0.5, 1.0) == 1
    with pytest.raises(ValueError):
        min_hitting_time(0.01, 0.5, 3.0)  # gain >= 1


def test_shortest_path_prob():
    exact, approx = shortest_path_prob(0.1, 0.02, 1.0)
    assert 0.0 < exact < 1.0
    assert abs(approx - math.exp(eta(0.1) / 0.02)) < 1e-15
    # the exact product approaches the approximation as the gain shrinks
    err = []
    for gain in (0.05, 0.005):
        exact, _ = shortest_path_prob(0.1, gain, 1.0)
        err.append(abs(math.log(exact) * gain - eta(0.1)))
    assert err[1] < err[0]


# -- one-step graph ----------------------------------------------------------


def test_build_one_step_graph_weights():
    g = stag_hunt()
    graph = build_one_step_graph(g, 0.01, delta=0.01)
    assert graph.num_states == 4
    assert len(graph.arrows) == 8  # 4 states x 2 unilateral deviations
    # weight is 1/(eps * deviator's utility at the destination)
    a = graph.arrows[(1, 0)]  # (1,0) -> (0,0): player 0 moves, earns 3
    assert a.deviator == 0
    assert abs(a.weight - 1.0 / (0.01 * 3.0)) < 1e-12
    assert a.gamma == gamma(2, 2)
    assert abs(a.prob_annotation - math.exp(eta(0.01) * a.weight)) < 1e-15
    b = graph.arrows[(0, 1)]  # (0,0) -> (1,0): player 0 moves, earns 1
    assert b.deviator == 0
    assert abs(b.weight - 1.0 / 0.01) < 1e-12
    assert (0, 3) not in graph.arrows  # two players cannot move at once
    with pytest.raises(ValueError):
        build_one_step_graph(g, 0.5)  # eps * max utility >= 1


def test_wgraph_validation():
    WGraph(w=frozenset([0]), arrows={1: 0, 2: 1}).validate(3)
    with pytest.raises(ValueError):
        WGraph(w=frozenset([0]), arrows={1: 1, 2: 0}).validate(3)  # self-loop
    with pytest.raises(ValueError):
        WGraph(w=frozenset([0]), arrows={1: 2, 2: 1}).validate(3)  # cycle
    with pytest.raises(ValueError):
        WGraph(w=frozenset([0]), arrows={1: 0}).validate(3)  # 2 has no arrow
    with pytest.raises(ValueError):
        WGraph(w=frozenset([0]), arrows={1: 0, 2: 0, 0: 1}).validate(3)


def test_enumerate_s_graphs_stag_hunt():
    g = stag_hunt()
    graph = build_one_step_graph(g, 0.01)
    # rooted at (0,0): states 1,2 point to {0,3}, state 3 to {1,2};
    # of the 8 assignments, 4 contain a 2-cycle through state 3
    graphs = enumerate_s_graphs(graph, 0)
    assert len(graphs) == 4
    for wg in graphs:
        assert wg.w == frozenset([0])
        wg.validate(4)


def test_s_graph_guard(monkeypatch):
    import plautomata.stability as stability_mod

    monkeypatch.setattr(stability_mod, "S_GRAPH_GUARD", 3)
    graph = build_one_step_graph(stag_hunt(), 0.01)
    with pytest.raises(ResourceLimitError):
        enumerate_s_graphs(graph, 0)


def test_graph_weight_and_resistance():
    graph = build_one_step_graph(stag_hunt(), 0.01)
    wg = WGraph(w=frozenset([0]), arrows={1: 0, 2: 0, 3: 1})
    # 100(1/3) + 100(1/3) + 100 = 500/3
    assert abs(graph_resistance(wg, graph) - 500.0 / 3.0) < 1e-9
    with pytest.raises(ValueError):
        graph_resistance(WGraph(frozenset([0]), {1: 0, 2: 0, 3: 0}), graph)
    phat = analytic(np.full((4, 4), 0.25))
    assert abs(graph_weight(wg, phat) - 0.25**3) < 1e-15


def test_min_resistance_stag_hunt_values():
    graph = build_one_step_graph(stag_hunt(), 0.01)
    # per-root minima derived by hand from the 8 arrow weights; the root-3
    # optimum chains 1 -> 0 -> 2 -> 3 (100/3 + 100 + 50)
    expected = {0: 500.0 / 3.0, 1: 700.0 / 3.0, 2: 700.0 / 3.0, 3: 550.0 / 3.0}
    for s, want in expected.items():
        phi, wg = min_resistance(graph, s)
        assert abs(phi - want) < 1e-9
        wg.validate(4)
        assert abs(graph_resistance(wg, graph) - phi) < 1e-9


def test_min_resistance_matches_enumeration():
    rng = np.random.RandomState(17)
    for _ in range(10):
        g = random_positive_game(rng, (2, 2))
        graph = build_one_step_graph(g, 0.05)
        for s in range(4):
            phi, _ = min_resistance(graph, s)
            best = min(
                graph_resistance(wg, graph) for wg in enumerate_s_graphs(graph, s)
            )
            assert abs(phi - best) < 1e-12


def test_min_resistance_infeasible():
    graph = build_one_step_graph(stag_hunt(), 0.01)
    # cut every arrow into state 3: nothing reaches it, so no tree roots there
    arrows = {k: a for k, a in graph.arrows.items() if k[1] != 3}
    cut = OneStepGraph(num_states=4, epsilon=0.01, delta=0.01,
                       eta_value=graph.eta_value, arrows=arrows)
    with pytest.raises(InfeasibleError, match="state 0"):
        min_resistance(cut, 3)


# -- stationary distributions -----------------------------------------------


def test_stationary_two_state_closed_form():
    phat = analytic([[0.7, 0.3], [0.1, 0.9]])
    for pi in (stationary_from_graphs(phat), stationary_solve(phat)):
        assert np.allclose(pi.pi, [0.25, 0.75], atol=1e-12)


def test_stationary_methods_agree_on_random_chains():
    rng = np.random.RandomState(19)
    for _ in range(10):
        num = int(rng.randint(3, 8))
        matrix = rng.dirichlet(np.ones(num), size=num)
        phat = analytic(matrix)
        a = stationary_from_graphs(phat)
        b = stationary_solve(phat)
        assert np.abs(a.pi - b.pi).max() < 1e-9
        assert np.abs(a.pi @ matrix - a.pi).max() < 1e-9


def test_stationary_rejects_reducible():
    phat = analytic([[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(ValueError, match="irreducible"):
        stationary_from_graphs(phat)
    with pytest.raises(ValueError, match="irreducible"):
        stationary_solve(phat)


def test_enumerate_arborescences_complete_graph():
    # Cayley: a complete digraph on m nodes has m^{m-2} spanning in-trees
    # per root (m=4 -> 16)
    out = {s: [d for d in range(4) if d != s] for s in range(4)}
    assert sum(1 for _ in _enumerate_arborescences(out, frozenset([0]), 4)) == 16


# -- Monte Carlo estimation ----------------------------------------------------


def test_sample_tremble_frequencies():
    g = random_positive_game(np.random.RandomState(23), (2, 3))
    rng = np.random.RandomState(29)
    n_samples = 30000
    counts = {}
    for _ in range(n_samples):
        j, a = sample_tremble(g, rng)
        counts[(j, a)] = counts.get((j, a), 0) + 1
    for (j, a), c in counts.items():
        p = gamma(g.n, g.sizes[j])
        sigma = (p * (1 - p) / n_samples) ** 0.5
        assert abs(c / n_samples - p) < 4 * sigma


def test_estimate_phat_deterministic_and_worker_independent():
    g = stag_hunt()
    a = estimate_phat(g, 0.3, 0.05, trials=60, cap=10000, seed=42)
    b = estimate_phat(g, 0.3, 0.05, trials=60, cap=10000, seed=42)
    c = estimate_phat(g, 0.3, 0.05, trials=60, cap=10000, seed=42, workers=2)
    assert np.array_equal(a.matrix, b.matrix)
    assert np.array_equal(a.matrix, c.matrix)
    assert np.allclose(a.matrix.sum(axis=1), 1.0)
    assert a.spill.max() == 0.0
    d = estimate_phat(g, 0.3, 0.05, trials=60, cap=10000, seed=43)
    assert not np.array_equal(a.matrix, d.matrix)


def test_estimate_phat_agrees_with_resistance_ranking():
    g = stag_hunt()
    phat = estimate_phat(g, 0.3, 0.05, trials=4000, cap=100000, seed=3)
    pi_graphs = stationary_from_graphs(phat)
    pi_solve = stationary_solve(phat)
    assert np.abs(pi_graphs.pi - pi_solve.pi).max() < 1e-9
    # the payoff-3 equilibrium (state 0) dominates the payoff-2 one (state 3)
    assert pi_graphs.pi[0] > pi_graphs.pi[3] > max(pi_graphs.pi[1], pi_graphs.pi[2])


# -- stochastically stable set ---------------------------------------------------


def test_stable_set_stag_hunt():
    report = stochastically_stable_set(stag_hunt(), 0.01)
    assert report.stable == [(0, 0)]
    assert abs(report.gap - 50.0 / 3.0) < 1e-9
    assert report.strict_gap
    assert np.allclose(
        report.phi_star,
        [500.0 / 3.0, 700.0 / 3.0, 700.0 / 3.0, 550.0 / 3.0],
        atol=1e-9,
    )
    d = report.to_dict()
    assert d["stochastically_stable"] == ["0,0"]


def test_stable_set_invariances():
    rng = np.random.RandomState(31)
    g = random_positive_game(rng, (2, 3))
    base = stochastically_stable_set(g, 0.02)
    halved = stochastically_stable_set(g, 0.01)
    assert base.stable_indices == halved.stable_indices
    from plautomata import Game

    scaled = Game(actions=g.actions, table=3.0 * g.table, name="scaled")
    rescaled = stochastically_stable_set(scaled, 0.02 / 3.0)
    assert base.stable_indices == rescaled.stable_indices


def test_best_br_graph_stag_hunt():
    wg = best_br_graph(stag_hunt())
    assert wg.w == frozenset([0, 3])
    assert wg.arrows == {1: 0, 2: 0}


def test_best_br_graph_rejects_non_coordination():
    pennies = two_player_game([[2, 1], [1, 2]], [[1, 2], [2, 1]])
    ok, _ = pennies.is_coordination_game()
    assert not ok
    with pytest.raises(CoordinationViolationError):
        best_br_graph(pennies)
