import numpy as np
import pytest

from plautomata import (
    DirectedGraph,
    ResourceLimitError,
    Topology,
    critically_connected,
    induced_graph,
    inverse_total_distance,
    make_netform_game,
    mean_inverse_total_distance,
    nf_utility,
    reach_indicator,
)
from plautomata.netform import profile_to_choice


def wheel(n):
    """Directed ring: each node links to its predecessor, giving (i-1) -> i."""
    return DirectedGraph(n=n, links=frozenset(((i - 1) % n, i) for i in range(n)))


def test_topology_validation():
    with pytest.raises(ValueError):
        Topology(n=2, neighbors=((1,),))  # wrong length
    with pytest.raises(ValueError):
        Topology(n=2, neighbors=((0,), (0,)))  # self link
    with pytest.raises(ValueError):
        Topology(n=2, neighbors=((1, 1), (0,)))  # duplicate
    with pytest.raises(ValueError):
        Topology(n=2, neighbors=((2,), (0,)))  # out of range


def test_ring_topology():
    t = Topology.ring(6)
    assert t.neighbors[0] == (1, 5)
    assert t.neighbors[3] == (2, 4)
    with pytest.raises(ValueError):
        Topology.ring(2)


def test_topology_save_load(tmp_path):
    t = Topology.ring(5)
    path = tmp_path / "topology.json"
    t.save(path)
    assert Topology.load(path) == t


def test_link_subsets_order():
    t = Topology.ring(6)
    assert t.link_subsets(0) == [(), (1,), (5,), (1, 5)]


def test_induced_graph_and_reach():
    t = Topology.ring(3)
    # node 1 links to 0 => (0,1); node 2 links to 1 => (1,2)
    g = induced_graph(t, [(), (0,), (1,)])
    assert g.links == frozenset({(0, 1), (1, 2)})
    assert reach_indicator(g, 0, 2) == 1
    assert reach_indicator(g, 2, 0) == 0
    with pytest.raises(ValueError):
        # on a 4-ring node 0 cannot link with the opposite node 2
        induced_graph(Topology.ring(4), [(2,), (), (), ()])
    with pytest.raises(ValueError):
        reach_indicator(g, 1, 1)


def test_nf_utility_wheel():
    t = Topology.ring(3)
    profile = [(2,), (0,), (1,)]  # wheel: every node is reached by both others
    for i in range(3):
        assert nf_utility(t, profile, i, kappa=0.5) == 2 - 0.5
        assert nf_utility(t, profile, i, kappa=0.5, offset=1.0) == 2.5
    empty = [(), (), ()]
    assert nf_utility(t, empty, 0, kappa=0.5) == 0.0
    with pytest.raises(ValueError):
        nf_utility(t, profile, 0, kappa=1.5)
    with pytest.raises(ValueError):
        nf_utility(t, profile, 0, kappa=0.5, offset=-1.0)


def test_make_netform_game():
    t = Topology.ring(3)
    game = make_netform_game(t, kappa=0.5)
    assert game.sizes == (4, 4, 4)
    assert game.table.min() > 0.0
    rng = np.random.RandomState(37)
    for _ in range(20):
        profile = tuple(int(rng.randint(4)) for _ in range(3))
        choice = profile_to_choice(t, game, profile)
        for i in range(3):
            assert game.utility(profile, i) == nf_utility(
                t, choice, i, kappa=0.5, offset=1.0
            )
    # the all-empty profile scores exactly the offset, so offset=0 must fail
    with pytest.raises(ValueError, match="offset"):
        make_netform_game(t, kappa=0.5, offset=0.0)
    with pytest.raises(ResourceLimitError):
        make_netform_game(Topology.ring(20), kappa=0.5, max_profiles=1000)


def test_critically_connected():
    assert critically_connected(wheel(3))
    assert critically_connected(wheel(6))
    assert not critically_connected(DirectedGraph(n=3, links=frozenset()))
    # a fully bidirected triangle is connected but every link is redundant
    both = DirectedGraph(n=3, links=frozenset(
        (i, j) for i in range(3) for j in range(3) if i != j
    ))
    assert not critically_connected(both)
    # connected with one redundant pair of paths
    extra = DirectedGraph(n=3, links=frozenset({(0, 1), (1, 2), (2, 0), (0, 2)}))
    assert not critically_connected(extra)
    with pytest.raises(ResourceLimitError):
        critically_connected(wheel(13))


def test_inverse_total_distance_wheel():
    t = Topology.ring(6)
    g = wheel(6)
    for v in range(6):
        # distance 1 to the successor, 5 around to the predecessor
        assert inverse_total_distance(g, t, v) == pytest.approx(1.0 / 6.0)
        assert inverse_total_distance(g, t, v, transposed=True) == pytest.approx(
            1.0 / 6.0
        )
    assert mean_inverse_total_distance(g, t) == pytest.approx(1.0 / 6.0)


def test_inverse_total_distance_unreachable():
    t = Topology.ring(3)
    g = DirectedGraph(n=3, links=frozenset({(0, 1)}))
    assert inverse_total_distance(g, t, 0) == 0.0
