"""Finite-state reduction over pure strategy states: one-step transition
graphs, W-graphs, resistances, stationary distributions (tree-sum and linear
solve), Monte Carlo transition estimation, and the stochastically stable set.

States are identified with action-profile indices in the game's mixed-radix
encoding throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import networkx as nx
import numpy as np

from . import _engine
from .dynamics import _engine_args, strategy_update
from .errors import InfeasibleError, NumericError, ResourceLimitError
from .game import Game, Profile

# Enumeration cap for explicit arborescence listings.
S_GRAPH_GUARD = 9


class CoordinationViolationError(ValueError):
    """The best-BR graph failed its W-graph verification."""


# -- scalar quantities ------------------------------------------------------


def phi_tremble(lam: float, n: int) -> float:
    """Probability that at least one of n agents trembles."""
    if not 0.0 <= lam <= 1.0 or n < 1:
        raise ValueError("need lambda in [0, 1] and n >= 1")
    return 1.0 - (1.0 - lam) ** n


def psi_tremble(lam: float, n: int) -> float:
    """Probability that at least two agents tremble, given at least one did."""
    if not 0.0 < lam <= 1.0 or n < 1:
        raise ValueError("need lambda in (0, 1] and n >= 1 (0/0 at lambda=0)")
    return 1.0 - n * lam * (1.0 - lam) ** (n - 1) / (1.0 - (1.0 - lam) ** n)


def gamma(n: int, a_j: int) -> float:
    """Probability that a specific agent trembled and picked a specific action."""
    if n < 1 or a_j < 1:
        raise ValueError("need n >= 1 and a_j >= 1")
    return 1.0 / (n * a_j)


def eta(delta: float, tol: float = 1e-8) -> float:
    """The series -sum_{l>=1} (1 - delta^l) / l^2, summed until the tail
    bound sum_{l>L} 1/l^2 < 1/L drops below tol."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _eta_cached(float(delta), float(tol))


@lru_cache(maxsize=64)
def _eta_cached(delta: float, tol: float) -> float:
    if delta == 1.0:
        return 0.0
    limit = int(math.ceil(1.0 / tol))
    total = 0.0
    start = 1
    while start <= limit:
        stop = min(start + 1_000_000, limit + 1)
        ell = np.arange(start, stop, dtype=np.float64)
        total += float(((1.0 - delta**ell) / ell**2).sum())
        start = stop
    return -total


def min_hitting_time(delta: float, epsilon: float, u: float) -> int:
    """Fewest steps of constant play needed to push the strategy gap below
    delta: ceil(log delta / log(1 - epsilon*u))."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    gain = epsilon * u
    if not 0.0 < gain < 1.0:
        raise ValueError("epsilon * u must lie in (0, 1)")
    return int(math.ceil(math.log(delta) / math.log(1.0 - gain)))


def shortest_path_prob(delta: float, epsilon: float, u: float) -> tuple[float, float]:
    """Probability of playing the destination profile for the full minimum
    hitting time, exactly and in the exp(eta/(epsilon*u)) approximation."""
    T = min_hitting_time(delta, epsilon, u)
    H = 1.0 - epsilon * u
    log_exact = sum(math.log1p(-(H**t)) for t in range(1, T + 1))
    approx = math.exp(eta(delta) / (epsilon * u))
    return math.exp(log_exact), approx


# -- graph types ------------------------------------------------------------


@dataclass(frozen=True)
class Arrow:
    src: int
    dst: int
    deviator: int
    weight: float
    gamma: float
    prob_annotation: float


@dataclass
class OneStepGraph:
    """All single-agent single-action deviations between pure strategy states.

    Arrow weights are 1 / (epsilon * u_j(destination)); the probability
    annotation is the exp(eta(delta) / (epsilon * u_j)) approximation of the
    one-step transition probability (not normalized).
    """

    num_states: int
    epsilon: float
    delta: float
    eta_value: float
    arrows: dict[tuple[int, int], Arrow]
    out: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.out:
            out: dict[int, list[int]] = {s: [] for s in range(self.num_states)}
            for src, dst in self.arrows:
                out[src].append(dst)
            self.out = out


@dataclass
class WGraph:
    """Arrow assignment with exactly one outgoing arrow per state outside the
    target set, no cycles, and every such state leading into the target set."""

    w: frozenset[int]
    arrows: dict[int, int]

    def validate(self, num_states: int):
        for s in range(num_states):
            if s in self.w:
                if s in self.arrows:
                    raise ValueError(f"target state {s} must have no arrow")
            elif s not in self.arrows:
                raise ValueError(f"state {s} outside the target set has no arrow")
        for s, d in self.arrows.items():
            if s == d:
                raise ValueError(f"self-loop at state {s}")
            if not 0 <= d < num_states:
                raise ValueError(f"arrow {s}->{d} leaves the state set")
        for s in self.arrows:
            seen = {s}
            node = s
            while node in self.arrows:
                node = self.arrows[node]
                if node in seen:
                    raise ValueError(f"cycle through state {node}")
                seen.add(node)
            if node not in self.w:
                raise ValueError(f"state {s} does not reach the target set")


@dataclass
class TransitionMatrix:
    """Row-stochastic matrix over pure strategy states."""

    matrix: np.ndarray
    provenance: str  # "monte-carlo" | "analytic"
    spill: np.ndarray | None = None
    trials: int = 0
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("transition matrix must be square")
        tol = 1e-9 if self.provenance == "monte-carlo" else 1e-12
        if (m < 0).any() or np.abs(m.sum(axis=1) - 1.0).max() > tol:
            raise ValueError("rows must be nonnegative and sum to 1")

    @property
    def num_states(self) -> int:
        return self.matrix.shape[0]


@dataclass
class StationaryDistribution:
    pi: np.ndarray
    method: str  # "wgraph" | "solve"

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=np.float64)
        if (self.pi < 0).any() or abs(self.pi.sum() - 1.0) > 1e-10:
            raise ValueError("pi must be a probability vector")


@dataclass
class ResistanceReport:
    """Minimum resistances, their arborescences, and the resulting
    stochastically stable set."""

    states: list[Profile]
    phi_star: np.ndarray
    g_star: list[WGraph]
    gamma_bar: list[float]
    stable_indices: list[int]
    stable: list[Profile]
    gap: float | None
    strict_gap: bool
    epsilon: float
    rho: float

    def to_dict(self) -> dict:
        label = lambda p: ",".join(map(str, p))
        return {
            "epsilon": self.epsilon,
            "rho": self.rho,
            "phi_star": {label(s): float(v) for s, v in zip(self.states, self.phi_star)},
            "gamma_bar": {label(s): g for s, g in zip(self.states, self.gamma_bar)},
            "stochastically_stable": [label(self.states[i]) for i in self.stable_indices],
            "gap": self.gap,
            "strict_gap": self.strict_gap,
            "g_star": {
                label(self.states[i]): {
                    label(self.states[a]): label(self.states[b])
                    for a, b in sorted(self.g_star[i].arrows.items())
                }
                for i in range(len(self.states))
            },
        }


# -- one-step graph ----------------------------------------------------------


def build_one_step_graph(game: Game, epsilon: float, delta: float = 0.01) -> OneStepGraph:
    """All arrows between profiles differing in a single player's action."""
    gains = epsilon * game.table
    if gains.min() <= 0.0 or gains.max() >= 1.0:
        raise ValueError("epsilon * utility must lie in (0, 1) for every entry")
    eta_value = eta(delta)
    n = game.n
    radix = game._radix
    arrows: dict[tuple[int, int], Arrow] = {}
    for src in range(game.num_profiles):
        profile = game.decode(src)
        for j in range(n):
            gamma_j = gamma(n, game.sizes[j])
            for a in range(game.sizes[j]):
                if a == profile[j]:
                    continue
                dst = src + int(radix[j]) * (a - profile[j])
                gain = epsilon * game.table[dst, j]
                arrows[(src, dst)] = Arrow(
                    src=src, dst=dst, deviator=j, weight=1.0 / gain,
                    gamma=gamma_j, prob_annotation=math.exp(eta_value / gain),
                )
    return OneStepGraph(
        num_states=game.num_profiles, epsilon=epsilon, delta=delta,
        eta_value=eta_value, arrows=arrows,
    )


# -- W-graph enumeration and weights ------------------------------------------


def _enumerate_arborescences(out_neighbors: dict[int, list[int]], targets: frozenset[int],
                             num_states: int):
    """Yield every arrow assignment whose chains all terminate in ``targets``."""
    free = [s for s in range(num_states) if s not in targets]
    arrows: dict[int, int] = {}

    def creates_cycle(src: int, dst: int) -> bool:
        node = dst
        while node in arrows:
            node = arrows[node]
            if node == src:
                return True
        return False

    def rec(k: int):
        if k == len(free):
            yield dict(arrows)
            return
        src = free[k]
        for dst in out_neighbors.get(src, ()):
            if dst == src:
                continue
            if creates_cycle(src, dst):
                continue
            arrows[src] = dst
            yield from rec(k + 1)
            del arrows[src]

    yield from rec(0)


def enumerate_s_graphs(graph: OneStepGraph, s: int) -> list[WGraph]:
    """All spanning in-arborescences rooted at state ``s`` over the one-step
    arrows.  Guarded to small state counts; use ``min_resistance`` beyond."""
    if graph.num_states > S_GRAPH_GUARD:
        raise ResourceLimitError(
            f"{graph.num_states} states exceed the enumeration guard of "
            f"{S_GRAPH_GUARD}; use min_resistance instead"
        )
    targets = frozenset([s])
    result = []
    for arrows in _enumerate_arborescences(graph.out, targets, graph.num_states):
        g = WGraph(w=targets, arrows=arrows)
        g.validate(graph.num_states)
        result.append(g)
    return result


def graph_weight(g: WGraph, phat: TransitionMatrix) -> float:
    """Product of transition probabilities along the graph's arrows."""
    weight = 1.0
    for src, dst in g.arrows.items():
        weight *= float(phat.matrix[src, dst])
    return weight


def graph_resistance(g: WGraph, graph: OneStepGraph) -> float:
    """Sum of one-step arrow weights 1/(epsilon * destination utility)."""
    total = 0.0
    for src, dst in g.arrows.items():
        arrow = graph.arrows.get((src, dst))
        if arrow is None:
            raise ValueError(f"arrow {src}->{dst} is not a one-step transition")
        total += arrow.weight
    return total


def min_resistance(graph: OneStepGraph, s: int) -> tuple[float, WGraph]:
    """Minimum-resistance spanning in-arborescence rooted at ``s``.

    Computed as a minimum spanning arborescence on the reversed one-step
    graph (root as source), so no enumeration is involved.
    """
    # Feasibility: every state must reach s along one-step arrows.
    reached = {s}
    frontier = [s]
    incoming: dict[int, list[int]] = {v: [] for v in range(graph.num_states)}
    for src, dst in graph.arrows:
        incoming[dst].append(src)
    while frontier:
        node = frontier.pop()
        for prev in incoming[node]:
            if prev not in reached:
                reached.add(prev)
                frontier.append(prev)
    if len(reached) < graph.num_states:
        stranded = min(set(range(graph.num_states)) - reached)
        raise InfeasibleError(f"state {stranded} cannot reach state {s}")

    reversed_graph = nx.DiGraph()
    reversed_graph.add_nodes_from(range(graph.num_states))
    for (src, dst), arrow in graph.arrows.items():
        if src == s:
            continue  # the root has no outgoing arrow in an in-arborescence
        reversed_graph.add_edge(dst, src, weight=arrow.weight)
    tree = nx.minimum_spanning_arborescence(reversed_graph, attr="weight")
    arrows = {src: dst for dst, src in tree.edges()}
    g = WGraph(w=frozenset([s]), arrows=arrows)
    g.validate(graph.num_states)
    return graph_resistance(g, graph), g


# -- stationary distributions --------------------------------------------------


def _support_out_neighbors(phat: TransitionMatrix) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    num = phat.num_states
    for src in range(num):
        out[src] = [dst for dst in range(num)
                    if dst != src and phat.matrix[src, dst] > 0.0]
    return out


def _is_irreducible(phat: TransitionMatrix) -> bool:
    out = _support_out_neighbors(phat)
    num = phat.num_states

    def reach(start: int, neighbors) -> set[int]:
        seen = {start}
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for nxt in neighbors(node):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    forward = reach(0, lambda v: out[v])
    if len(forward) < num:
        return False
    incoming = {v: [u for u in range(num) if v in out[u]] for v in range(num)}
    return len(reach(0, lambda v: incoming[v])) == num


def stationary_from_graphs(phat: TransitionMatrix) -> StationaryDistribution:
    """Tree-sum stationary distribution: pi_s proportional to the sum over all
    {s}-graphs of the products of transition probabilities along their arrows."""
    if not _is_irreducible(phat):
        raise ValueError("transition matrix must be irreducible")
    num = phat.num_states
    if num > S_GRAPH_GUARD:
        raise ResourceLimitError(
            f"{num} states exceed the enumeration guard of {S_GRAPH_GUARD}"
        )
    out = _support_out_neighbors(phat)
    r = np.zeros(num)
    for s in range(num):
        total = 0.0
        for arrows in _enumerate_arborescences(out, frozenset([s]), num):
            total += graph_weight(WGraph(frozenset([s]), arrows), phat)
        r[s] = total
    return StationaryDistribution(pi=r / r.sum(), method="wgraph")


def stationary_solve(phat: TransitionMatrix) -> StationaryDistribution:
    """Direct linear solve of pi = pi P with sum(pi) = 1."""
    if not _is_irreducible(phat):
        raise ValueError("transition matrix must be irreducible")
    num = phat.num_states
    a = phat.matrix.T - np.eye(num)
    a[-1, :] = 1.0
    b = np.zeros(num)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"stationary solve failed: {exc}") from exc
    residual = np.abs(pi @ phat.matrix - pi).max()
    if residual > 1e-12:
        raise NumericError(f"stationary residual {residual} exceeds 1e-12")
    pi = np.clip(pi, 0.0, None)
    return StationaryDistribution(pi=pi / pi.sum(), method="solve")


# -- Monte Carlo estimation of the finite-state chain ---------------------------


def sample_tremble(game: Game, rng) -> tuple[int, int]:
    """Draw a one-tremble outcome: a uniform deviator j, then a uniform action
    from j's action set.  Each (j, a) pair has probability gamma(n, |A_j|)."""
    j = int(rng.randint(game.n))
    a = int(rng.randint(game.sizes[j]))
    return j, a


def _phat_rows(game: Game, epsilon: float, delta: float, trials: int, cap: int,
               seed: int, sources: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Trial counts for a batch of source states (worker payload)."""
    num = game.num_profiles
    util, sizes, radix = _engine_args(game)
    counts = np.zeros((num, num), dtype=np.int64)
    spill = np.zeros(num, dtype=np.int64)
    children = np.random.SeedSequence(seed).spawn(num)
    for src in sources:
        profile = game.decode(src)
        # Independent per-trial streams; merged counts are order-independent.
        trial_seeds = children[src].generate_state(2 * trials)
        for k in range(trials):
            picker = np.random.RandomState(int(trial_seeds[2 * k]))
            j, a = sample_tremble(game, picker)
            realized = profile[:j] + (a,) + profile[j + 1 :]
            x = np.zeros((game.n, max(game.sizes)))
            for i in range(game.n):
                vertex = np.zeros(game.sizes[i])
                vertex[profile[i]] = 1.0
                x[i, : game.sizes[i]] = strategy_update(
                    vertex, realized[i], game.utility(realized, i), epsilon
                )
            alpha = np.array(realized, dtype=np.int64)
            _engine.seed(int(trial_seeds[2 * k + 1]))
            absorbed, _ = _engine.absorb(util, sizes, radix, epsilon, delta, cap,
                                         x, alpha)
            if absorbed < 0:
                spill[src] += 1
            else:
                counts[src, absorbed] += 1
    return counts, spill


def estimate_phat(game: Game, epsilon: float, delta: float, trials: int,
                  cap: int, seed: int, workers: int = 1) -> TransitionMatrix:
    """Estimate the one-tremble transition matrix by simulation.

    From each pure strategy state: a uniformly chosen agent trembles to a
    uniformly chosen action (possibly its current one), every agent applies
    one reinforcement at the realized profile, and the unperturbed process
    runs to absorption.  Rows are empirical frequencies over the absorbed
    trials; timeouts are accounted in a spill column and excluded from
    normalization.  Per-trial RNG streams are derived from the seed, so the
    result does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("need at least one trial per state")
    num = game.num_profiles
    sources = list(range(num))
    if workers > 1 and num > 1:
        from concurrent.futures import ProcessPoolExecutor

        batches = [sources[k::workers] for k in range(min(workers, num))]
        counts = np.zeros((num, num), dtype=np.int64)
        spill = np.zeros(num, dtype=np.int64)
        with ProcessPoolExecutor(max_workers=len(batches)) as pool:
            futures = [
                pool.submit(_phat_rows, game, epsilon, delta, trials, cap, seed, batch)
                for batch in batches
            ]
            for future in futures:
                c, s = future.result()
                counts += c
                spill += s
    else:
        counts, spill = _phat_rows(game, epsilon, delta, trials, cap, seed, sources)
    completed = counts.sum(axis=1)
    if (completed == 0).any():
        raise NumericError("some state had no absorbed trials; raise cap or trials")
    matrix = counts / completed[:, None]
    spill_fraction = spill / trials
    warnings_list = []
    if spill_fraction.max() > 0.01:
        warnings_list.append(
            f"absorption timeouts above 1% (max spill {spill_fraction.max():.3f})"
        )
    return TransitionMatrix(matrix=matrix, provenance="monte-carlo",
                            spill=spill_fraction, trials=trials,
                            warnings=warnings_list)


# -- stochastically stable set ---------------------------------------------------


def stochastically_stable_set(game: Game, epsilon: float, rho: float = 1e-9,
                              delta: float = 0.01) -> ResistanceReport:
    """Minimum-resistance analysis over all pure strategy states.

    The stable set is the argmin level set of the minimum resistances within
    relative tolerance rho; the report also carries the gap to the complement
    and whether a strict gap exists.
    """
    graph = build_one_step_graph(game, epsilon, delta)
    num = game.num_profiles
    phi_star = np.zeros(num)
    g_star: list[WGraph] = []
    gamma_bar: list[float] = []
    for s in range(num):
        phi, g = min_resistance(graph, s)
        phi_star[s] = phi
        g_star.append(g)
        bar = 1.0
        for src, dst in g.arrows.items():
            bar *= graph.arrows[(src, dst)].gamma
        gamma_bar.append(bar)
    lowest = phi_star.min()
    stable_indices = [s for s in range(num) if phi_star[s] <= lowest * (1.0 + rho)]
    others = [s for s in range(num) if s not in stable_indices]
    if others:
        gap = float(min(phi_star[s] for s in others)
                    - max(phi_star[s] for s in stable_indices))
        strict_gap = gap > 0.0
    else:
        gap = None
        strict_gap = True
    return ResistanceReport(
        states=[game.decode(s) for s in range(num)],
        phi_star=phi_star, g_star=g_star, gamma_bar=gamma_bar,
        stable_indices=stable_indices,
        stable=[game.decode(s) for s in stable_indices],
        gap=gap, strict_gap=strict_gap, epsilon=epsilon, rho=rho,
    )


def best_br_graph(game: Game) -> WGraph:
    """The W-graph over the Nash set whose arrows are best best-responses.

    Requires a coordination game; the W-graph conditions are verified and a
    violation (self-loop, cycle, or a state stranded away from the Nash set)
    raises ``CoordinationViolationError`` with the witness state.
    """
    nash = {game.encode(p) for p in game.nash_equilibria()}
    arrows: dict[int, int] = {}
    for src in range(game.num_profiles):
        if src in nash:
            continue
        profile = game.decode(src)
        _, _, dest = game.bbr(profile)
        dst = game.encode(dest)
        if dst == src:
            raise CoordinationViolationError(
                f"best-BR at non-Nash profile {profile} is a self-loop"
            )
        arrows[src] = dst
    g = WGraph(w=frozenset(nash), arrows=arrows)
    try:
        g.validate(game.num_profiles)
    except ValueError as exc:
        raise CoordinationViolationError(str(exc)) from exc
    return g
