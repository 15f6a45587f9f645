"""Reinforcement dynamics: tremble-perturbed action draws, strategy updates,
long runs, absorption of the unperturbed process, and occupancy measurement.

``step`` and friends are the reference implementation, driven by a
``numpy.random.RandomState``.  ``run`` delegates the inner loop to the
numba engine in :mod:`plautomata._engine`; both consume the same Mersenne
Twister stream in the same order (per player: one tremble Bernoulli, then one
inversion draw), so a run is reproducible and equals repeated ``step`` calls
seeded identically.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .game import Game, Profile

DRIFT_ALARM = 1e-6


def validate_strategy(x: np.ndarray, tol: float = 1e-12):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) < 1:
        raise ValueError("strategy must be a non-empty vector")
    if (x < 0).any() or abs(x.sum() - 1.0) > tol:
        raise ValueError("strategy must be a probability vector")
    return x


@dataclass(frozen=True)
class LearnerConfig:
    epsilon: float
    lam: float
    seed: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")

    def check_step_size(self, game: Game):
        bound = self.epsilon * game.max_utility()
        if bound >= 1.0:
            raise ValueError(
                f"epsilon * max utility = {bound} must stay below 1"
            )


@dataclass
class LearnerState:
    profile: Profile
    strategies: list[np.ndarray]

    def copy(self) -> "LearnerState":
        return LearnerState(tuple(self.profile), [x.copy() for x in self.strategies])


def vertex_state(game: Game, profile) -> LearnerState:
    """The pure strategy state sitting at ``profile``'s simplex vertices."""
    profile = tuple(int(a) for a in profile)
    game.encode(profile)
    strategies = []
    for i, m in enumerate(game.sizes):
        e = np.zeros(m)
        e[profile[i]] = 1.0
        strategies.append(e)
    return LearnerState(profile, strategies)


def initial_state(game: Game, rng) -> LearnerState:
    """Uniform strategies with a uniformly drawn initial profile."""
    profile = tuple(int(rng.randint(m)) for m in game.sizes)
    strategies = [np.full(m, 1.0 / m) for m in game.sizes]
    return LearnerState(profile, strategies)


# -- single-step reference implementation --------------------------------


def _uniform(rng) -> float:
    return float(rng.random_sample())


def action_update(strategy, lam: float, rng) -> int:
    """Draw an action: from the strategy w.p. 1-lam, uniformly w.p. lam.

    The uniform draw ranges over the full action set, so a tremble may well
    return the currently most likely action.
    """
    x = validate_strategy(strategy)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    m = len(x)
    u1 = _uniform(rng)
    u2 = _uniform(rng)
    if u1 < lam:
        return min(int(u2 * m), m - 1)
    c = 0.0
    for k in range(m - 1):
        c += x[k]
        if u2 < c:
            return k
    return m - 1


def strategy_update(strategy, chosen: int, payoff: float, epsilon: float) -> np.ndarray:
    """Move the strategy toward the chosen action's vertex by epsilon*payoff."""
    x = validate_strategy(strategy)
    gain = epsilon * payoff
    if not 0.0 < gain < 1.0:
        raise ValueError(f"epsilon * payoff = {gain} must lie in (0, 1)")
    if not 0 <= chosen < len(x):
        raise ValueError("chosen action out of range")
    # written as x - gain*x (+ gain on the chosen entry) so the jit engine's
    # update is bit-identical
    out = x - gain * x
    out[chosen] += gain
    return out


def step(game: Game, state: LearnerState, config: LearnerConfig, rng,
         return_trembles: bool = False):
    """One synchronous update of all players.

    All actions are drawn from the pre-step strategies (players in index
    order, one Bernoulli then one action draw each); then every player
    reinforces with its own realized payoff.
    """
    trembles = []
    new_profile = []
    for i in range(game.n):
        u1 = _uniform(rng)
        u2 = _uniform(rng)
        x = state.strategies[i]
        m = len(x)
        if u1 < config.lam:
            a = min(int(u2 * m), m - 1)
            trembles.append(True)
        else:
            a = m - 1
            c = 0.0
            for k in range(m - 1):
                c += x[k]
                if u2 < c:
                    a = k
                    break
            trembles.append(False)
        new_profile.append(a)
    new_profile = tuple(new_profile)
    new_strategies = [
        strategy_update(state.strategies[i], new_profile[i],
                        game.utility(new_profile, i), config.epsilon)
        for i in range(game.n)
    ]
    result = LearnerState(new_profile, new_strategies)
    if return_trembles:
        return result, tuple(trembles)
    return result


# -- long runs via the jit engine -----------------------------------------


@dataclass
class Trace:
    """Run record: realized profile per step plus occupancy classification.

    ``profiles[t]`` and ``occupied[t]`` describe step t+1 (the state after the
    update); ``occupied`` holds the profile index of the occupied
    delta-neighborhood or -1.  Strategy snapshots, if requested, are
    ``(t, [x_i...])`` pairs taken every ``snapshot_every`` steps.
    """

    profiles: np.ndarray
    occupied: np.ndarray
    delta: float
    config: LearnerConfig
    game_name: str
    snapshots: list = field(default_factory=list)
    final_state: LearnerState | None = None

    @property
    def steps(self) -> int:
        return len(self.profiles)

    def to_csv(self, fh, game: Game):
        writer = csv.writer(fh)
        writer.writerow(["t", "profile", "occupied_pss"])
        for t in range(self.steps):
            profile = ",".join(map(str, game.decode(int(self.profiles[t]))))
            occ = int(self.occupied[t])
            occ_str = "" if occ < 0 else ",".join(map(str, game.decode(occ)))
            writer.writerow([t + 1, profile, occ_str])

    def snapshots_to_jsonl(self, fh):
        for t, strategies in self.snapshots:
            fh.write(json.dumps(
                {"t": int(t), "strategies": [list(map(float, x)) for x in strategies]}
            ))
            fh.write("\n")


def _pack_state(game: Game, state: LearnerState):
    n, sizes = game.n, game.sizes
    x = np.zeros((n, max(sizes)))
    for i in range(n):
        x[i, : sizes[i]] = validate_strategy(state.strategies[i])
    alpha = np.array(state.profile, dtype=np.int64)
    return x, alpha


def _unpack_state(game: Game, x: np.ndarray, alpha: np.ndarray) -> LearnerState:
    strategies = [x[i, : m].copy() for i, m in enumerate(game.sizes)]
    return LearnerState(tuple(int(a) for a in alpha), strategies)


def _engine_args(game: Game):
    sizes = np.array(game.sizes, dtype=np.int64)
    return game.table, sizes, np.asarray(game._radix, dtype=np.int64)


def run(game: Game, init: LearnerState, config: LearnerConfig, T: int,
        snapshot_every: int = 0, delta: float = 0.01, sink=None) -> Trace:
    """Apply ``step`` T times with the jit engine, recording every profile.

    ``sink`` may be a text file object; trace rows are then streamed to it as
    CSV while the run progresses.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    config.check_step_size(game)
    util, sizes, radix = _engine_args(game)
    x, alpha = _pack_state(game, init)
    _engine.seed(config.seed)

    profiles = np.empty(T, dtype=np.int64)
    occupied = np.empty(T, dtype=np.int64)
    snapshots = []
    if snapshot_every > 0:
        snapshots.append((0, [x[i, : m].copy() for i, m in enumerate(game.sizes)]))

    writer = None
    if sink is not None:
        writer = csv.writer(sink)
        writer.writerow(["t", "profile", "occupied_pss"])

    chunk = snapshot_every if snapshot_every > 0 else 1 << 16
    done = 0
    while done < T:
        size = min(chunk, T - done)
        _engine.run_chunk(util, sizes, radix, config.epsilon, config.lam, delta,
                          x, alpha, profiles[done : done + size],
                          occupied[done : done + size])
        done += size
        if snapshot_every > 0 and done % snapshot_every == 0:
            snapshots.append((done, [x[i, : m].copy() for i, m in enumerate(game.sizes)]))
        if writer is not None:
            for t in range(done - size, done):
                profile = ",".join(map(str, game.decode(int(profiles[t]))))
                occ = int(occupied[t])
                occ_str = "" if occ < 0 else ",".join(map(str, game.decode(occ)))
                writer.writerow([t + 1, profile, occ_str])

    drift = max(abs(x[i, : m].sum() - 1.0) for i, m in enumerate(game.sizes))
    if drift > DRIFT_ALARM:
        warnings.warn(f"strategy simplex drift {drift} exceeds {DRIFT_ALARM}")

    trace = Trace(profiles, occupied, delta, config, game.name, snapshots)
    trace.final_state = _unpack_state(game, x, alpha)
    return trace


def run_unperturbed_to_absorption(game: Game, init: LearnerState, epsilon: float,
                                  delta: float, cap: int, rng):
    """Run with lambda = 0 until every strategy is within delta of a vertex.

    Returns ``(profile, steps)`` where profile is the absorbing pure strategy
    state, or ``(None, cap)`` on timeout.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if epsilon * game.max_utility() >= 1.0:
        raise ValueError("epsilon * max utility must stay below 1")
    config = LearnerConfig(epsilon=epsilon, lam=0.0, seed=0)
    state = init.copy()
    for t in range(cap + 1):
        vertex = _absorbed_profile_delta(state.strategies, delta)
        if vertex is not None:
            return vertex, t
        if t == cap:
            break
        state = step(game, state, config, rng)
    return None, cap


# -- occupancy -------------------------------------------------------------


@dataclass
class OccupancyReport:
    """Fraction of steps spent in each pure strategy state's
    delta-neighborhood, plus the residual fraction outside all of them."""

    fractions: dict[Profile, float]
    residual: float
    delta: float
    steps: int

    def total(self) -> float:
        return self.residual + sum(self.fractions.values())

    def modal_state(self) -> Profile | None:
        if not self.fractions:
            return None
        return max(self.fractions, key=self.fractions.get)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "steps": self.steps,
            "residual": self.residual,
            "fractions": {
                ",".join(map(str, k)): v for k, v in sorted(self.fractions.items())
            },
        }


def occupancy(trace: Trace, game: Game, delta: float | None = None) -> OccupancyReport:
    """Aggregate a trace's per-step neighborhood classification.

    Re-classifying at a different delta needs strategy snapshots at every
    step (run with ``snapshot_every=1``); otherwise the run's delta is used.
    """
    if delta is None or delta == trace.delta:
        occupied = trace.occupied
        delta = trace.delta
        total = trace.steps
        counts = {}
        for idx in occupied:
            idx = int(idx)
            counts[idx] = counts.get(idx, 0) + 1
    else:
        stamped = {t: xs for t, xs in trace.snapshots}
        if any(t not in stamped for t in range(1, trace.steps + 1)):
            raise ValueError(
                "re-classification needs snapshots at every step; "
                "run with snapshot_every=1"
            )
        counts = {}
        total = trace.steps
        for t in range(1, trace.steps + 1):
            vertex = _absorbed_profile_delta(stamped[t], delta)
            idx = game.encode(vertex) if vertex is not None else -1
            counts[idx] = counts.get(idx, 0) + 1
    fractions = {
        game.decode(idx): c / total for idx, c in counts.items() if idx >= 0
    }
    residual = counts.get(-1, 0) / total
    return OccupancyReport(fractions, residual, delta, total)


def _absorbed_profile_delta(strategies, delta: float):
    profile = []
    for x in strategies:
        k = int(np.argmax(x))
        if x[k] <= 1.0 - delta:
            return None
        profile.append(k)
    return tuple(profile)
