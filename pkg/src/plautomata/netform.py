"""Distributed network formation as a positive-utility game.

Each node chooses a subset of its candidate neighbors to link to; a link
established by node i with node j is directed from j toward i.  Payoff is the
number of nodes with a directed path into i, minus kappa per owned link, plus
a uniform offset that restores strict positivity (the raw payoff is 0 for an
isolated node).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .game import Game

CRITICAL_GUARD = 12


@dataclass(frozen=True)
class Topology:
    """Node count plus per-node candidate link partners."""

    n: int
    neighbors: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        neighbors = tuple(tuple(sorted(int(j) for j in ns)) for ns in self.neighbors)
        object.__setattr__(self, "neighbors", neighbors)
        if len(neighbors) != self.n:
            raise ValueError("need one neighbor list per node")
        for i, ns in enumerate(neighbors):
            if len(set(ns)) != len(ns):
                raise ValueError(f"duplicate neighbor for node {i}")
            for j in ns:
                if not 0 <= j < self.n:
                    raise ValueError(f"neighbor {j} of node {i} out of range")
                if j == i:
                    raise ValueError(f"node {i} lists itself as a neighbor")

    def save(self, path):
        with open(path, "w") as fh:
            json.dump({"n": self.n, "neighbors": [list(ns) for ns in self.neighbors]}, fh)

    @classmethod
    def load(cls, path) -> "Topology":
        with open(path) as fh:
            data = json.load(fh)
        return cls(n=int(data["n"]), neighbors=tuple(tuple(ns) for ns in data["neighbors"]))

    @classmethod
    def ring(cls, n: int) -> "Topology":
        """Candidate partners are the two immediate nodes on an n-ring."""
        if n < 3:
            raise ValueError("a ring needs at least 3 nodes")
        return cls(n=n, neighbors=tuple(
            ((i - 1) % n, (i + 1) % n) for i in range(n)
        ))

    def link_subsets(self, node: int) -> list[tuple[int, ...]]:
        """All link actions of a node: subsets of its neighbor list, in
        binary-counter order over the sorted neighbors (empty set first)."""
        ns = self.neighbors[node]
        subsets = []
        for mask in range(1 << len(ns)):
            subsets.append(tuple(ns[k] for k in range(len(ns)) if mask >> k & 1))
        return subsets


@dataclass(frozen=True)
class DirectedGraph:
    n: int
    links: frozenset[tuple[int, int]]

    def __post_init__(self):
        for j, i in self.links:
            if not (0 <= i < self.n and 0 <= j < self.n) or i == j:
                raise ValueError(f"bad link ({j}, {i})")

    def successors(self, node: int) -> list[int]:
        return [i for j, i in self.links if j == node]


def induced_graph(topology: Topology, profile) -> DirectedGraph:
    """Union of each node's chosen links; node i's choice of j adds (j, i)."""
    links = set()
    for i, chosen in enumerate(profile):
        for j in chosen:
            if j not in topology.neighbors[i]:
                raise ValueError(f"node {i} cannot link with non-neighbor {j}")
            links.add((j, i))
    return DirectedGraph(n=topology.n, links=frozenset(links))


def _distances_from(graph: DirectedGraph, source: int) -> dict[int, int]:
    dist = {source: 0}
    frontier = [source]
    succ: dict[int, list[int]] = {v: [] for v in range(graph.n)}
    for j, i in graph.links:
        succ[j].append(i)
    while frontier:
        nxt = []
        for node in frontier:
            for other in succ[node]:
                if other not in dist:
                    dist[other] = dist[node] + 1
                    nxt.append(other)
        frontier = nxt
    return dist


def reach_indicator(graph: DirectedGraph, j: int, i: int) -> int:
    """1 iff a directed path from j to i exists."""
    if j == i:
        raise ValueError("reach indicator is defined for distinct nodes")
    return int(i in _distances_from(graph, j))


def nf_utility(topology: Topology, profile, player: int, kappa: float,
               offset: float = 0.0) -> float:
    """Nodes that reach the player, minus kappa per owned link, plus offset."""
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    if offset < 0.0:
        raise ValueError("offset must be nonnegative")
    graph = induced_graph(topology, profile)
    reached = sum(
        reach_indicator(graph, j, player)
        for j in range(topology.n) if j != player
    )
    return reached - kappa * len(profile[player]) + offset


def make_netform_game(topology: Topology, kappa: float, offset: float = 1.0,
                      max_profiles: int = 10**7) -> Game:
    """Tabulate the network formation payoffs into a Game.

    Construction fails if any tabulated value is non-positive; pick the
    offset accordingly (the all-empty profile scores exactly ``offset``).
    """
    subsets = [topology.link_subsets(i) for i in range(topology.n)]
    sizes = [len(s) for s in subsets]
    total = int(np.prod(sizes))
    if total > max_profiles:
        raise ResourceLimitError(f"{total} profiles exceed the guard of {max_profiles}")
    actions = tuple(
        tuple("{" + ",".join(map(str, subset)) + "}" for subset in subsets[i])
        for i in range(topology.n)
    )
    table = np.zeros((total, topology.n))
    for idx in range(total):
        rem, choice = idx, []
        for i, m in enumerate(sizes):
            choice.append(subsets[i][rem % m])
            rem //= m
        graph = induced_graph(topology, choice)
        for i in range(topology.n):
            reached = sum(
                1 for j in range(topology.n)
                if j != i and reach_indicator(graph, j, i)
            )
            table[idx, i] = reached - kappa * len(choice[i]) + offset
    bad = np.nonzero((table <= 0.0).any(axis=1))[0]
    if len(bad):
        rem, choice = int(bad[0]), []
        for i, m in enumerate(sizes):
            choice.append(subsets[i][rem % m])
            rem //= m
        raise ValueError(
            f"non-positive payoff at profile {tuple(choice)}; raise the offset"
        )
    return Game(actions=actions, table=table, name=f"netform-n{topology.n}")


def profile_to_choice(topology: Topology, game: Game, profile) -> list[tuple[int, ...]]:
    """Map a game action profile back to per-node link subsets."""
    subsets = [topology.link_subsets(i) for i in range(topology.n)]
    return [subsets[i][a] for i, a in enumerate(profile)]


def _count_simple_paths(succ: dict[int, list[int]], src: int, dst: int,
                        limit: int = 2) -> int:
    """Count simple directed paths src -> dst, stopping at ``limit``."""
    count = 0
    stack = [(src, {src})]
    while stack:
        node, visited = stack.pop()
        for other in succ[node]:
            if other == dst:
                count += 1
                if count >= limit:
                    return count
            elif other not in visited:
                stack.append((other, visited | {other}))
    return count


def critically_connected(graph: DirectedGraph) -> bool:
    """Connected, and every established link is its endpoints' unique path."""
    if graph.n > CRITICAL_GUARD:
        raise ResourceLimitError(
            f"{graph.n} nodes exceed the path-enumeration guard of {CRITICAL_GUARD}"
        )
    for j in range(graph.n):
        if len(_distances_from(graph, j)) < graph.n:
            return False
    succ: dict[int, list[int]] = {v: [] for v in range(graph.n)}
    for j, i in graph.links:
        succ[j].append(i)
    for j, i in graph.links:
        if _count_simple_paths(succ, j, i) != 1:
            return False
    return True


def inverse_total_distance(graph: DirectedGraph, topology: Topology, node: int,
                           transposed: bool = False) -> float:
    """Inverse of the summed directed distances from the node to its
    candidate neighbors (0 if any is unreachable).  ``transposed`` measures
    distances toward the node instead."""
    total = 0
    dist = None if transposed else _distances_from(graph, node)
    for m in topology.neighbors[node]:
        if transposed:
            d = _distances_from(graph, m).get(node)
        else:
            d = dist.get(m)
        if d is None:
            return 0.0
        total += d
    return 1.0 / total if total > 0 else 0.0


def mean_inverse_total_distance(graph: DirectedGraph, topology: Topology) -> float:
    return float(np.mean([
        inverse_total_distance(graph, topology, v) for v in range(topology.n)
    ]))
