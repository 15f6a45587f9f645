"""Finite strategic-form games with strictly positive utilities.

A game is stored as a dense utility table indexed by a mixed-radix encoding of
the action profile (player 0 is the least significant digit).  All query
operations are pure and the object is immutable after construction, so a game
can be shared freely between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceLimitError

Profile = tuple[int, ...]

# Brute-force enumeration cap for nash_equilibria / is_coordination_game.
ENUMERATION_GUARD = 10**7


def _as_profile(profile) -> Profile:
    return tuple(int(a) for a in profile)


@dataclass(frozen=True)
class Game:
    """Finite strategic-form game with the positive-utility property.

    Parameters
    ----------
    actions:
        Per-player list of action labels; sizes give each |A_i| >= 1.
    table:
        Array of shape (num_profiles, n) with u_i(alpha) > 0 for every entry.
        Row order follows :meth:`encode`.
    """

    actions: tuple[tuple[str, ...], ...]
    table: np.ndarray
    name: str = "game"
    _radix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        actions = tuple(tuple(str(a) for a in acts) for acts in self.actions)
        object.__setattr__(self, "actions", actions)
        if any(len(acts) < 1 for acts in actions):
            raise ValueError("every player needs at least one action")
        sizes = np.array([len(acts) for acts in actions], dtype=np.int64)
        radix = np.ones(len(sizes), dtype=np.int64)
        for i in range(1, len(sizes)):
            radix[i] = radix[i - 1] * sizes[i - 1]
        object.__setattr__(self, "_radix", radix)
        table = np.ascontiguousarray(np.asarray(self.table, dtype=np.float64))
        expected = (int(radix[-1] * sizes[-1]), len(sizes))
        if table.shape != expected:
            raise ValueError(f"utility table shape {table.shape}, expected {expected}")
        object.__setattr__(self, "table", table)
        bad = self.check_positive_utility()
        if bad:
            player, profile = bad[0]
            raise ValueError(
                f"utility must be strictly positive; first violation at "
                f"player {player}, profile {profile}"
            )
        self.table.setflags(write=False)

    # -- structure -------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(acts) for acts in self.actions)

    @property
    def num_profiles(self) -> int:
        return self.table.shape[0]

    def encode(self, profile) -> int:
        """Mixed-radix index of a profile (player 0 least significant)."""
        profile = _as_profile(profile)
        if len(profile) != self.n:
            raise ValueError(f"profile length {len(profile)} != {self.n} players")
        idx = 0
        for i, (a, m) in enumerate(zip(profile, self.sizes)):
            if not 0 <= a < m:
                raise ValueError(f"action {a} out of range for player {i}")
            idx += int(self._radix[i]) * a
        return idx

    def decode(self, index: int) -> Profile:
        if not 0 <= index < self.num_profiles:
            raise ValueError(f"profile index {index} out of range")
        out = []
        for m in self.sizes:
            out.append(index % m)
            index //= m
        return tuple(out)

    def profiles(self):
        """Iterate over all action profiles in encoding order."""
        for idx in range(self.num_profiles):
            yield self.decode(idx)

    def utility_grid(self, player: int) -> np.ndarray:
        """Player's utilities as an n-dim array; axis of player i is n-1-i."""
        self._check_player(player)
        shape = tuple(reversed(self.sizes))
        return self.table[:, player].reshape(shape)

    def _check_player(self, player: int):
        if not 0 <= player < self.n:
            raise ValueError(f"player {player} out of range")

    # -- queries ---------------------------------------------------------

    def utility(self, profile, player: int) -> float:
        self._check_player(player)
        return float(self.table[self.encode(profile), player])

    def check_positive_utility(self) -> list[tuple[int, Profile]]:
        """All (player, profile) pairs with non-positive utility."""
        players, indices = np.nonzero(self.table.T <= 0.0)
        return [(int(i), self.decode(int(k))) for i, k in zip(players, indices)]

    def max_utility(self) -> float:
        return float(self.table.max())

    def best_response(self, profile, player: int) -> set[int]:
        """Argmax actions of ``player`` against the others' part of ``profile``.

        Utilities are authored inputs, so ties mean exact float equality.
        """
        self._check_player(player)
        profile = _as_profile(profile)
        base = self.encode(profile) - int(self._radix[player]) * profile[player]
        step = int(self._radix[player])
        values = self.table[base : base + step * self.sizes[player] : step, player]
        best = values.max()
        return {int(a) for a in np.nonzero(values == best)[0]}

    def _guard(self):
        if self.num_profiles > ENUMERATION_GUARD:
            raise ResourceLimitError(
                f"{self.num_profiles} profiles exceed the enumeration guard "
                f"of {ENUMERATION_GUARD}"
            )

    def nash_equilibria(self) -> set[Profile]:
        """All pure Nash equilibria, by exhaustive enumeration."""
        self._guard()
        shape = tuple(reversed(self.sizes))
        ok = np.ones(shape, dtype=bool)
        for i in range(self.n):
            grid = self.utility_grid(i)
            axis = self.n - 1 - i
            ok &= grid == grid.max(axis=axis, keepdims=True)
        # C-order flattening of the reversed-axis grid matches the encoding:
        # the last axis (player 0) varies fastest.
        return {self.decode(int(k)) for k in np.nonzero(ok.ravel())[0]}

    def is_coordination_game(self):
        """Check that no best response ever strictly harms another player.

        Returns ``(True, None)`` or ``(False, (profile, deviator, harmed))``
        with one witness where the deviation strictly lowers someone's payoff.
        """
        self._guard()
        grids = [self.utility_grid(j) for j in range(self.n)]
        for i in range(self.n):
            axis = self.n - 1 - i
            grid_i = grids[i]
            br = grid_i == grid_i.max(axis=axis, keepdims=True)
            for a in range(self.sizes[i]):
                # BR sets depend only on the co-profile.
                is_br = np.take(br, a, axis=axis)
                if not is_br.any():
                    continue
                for j in range(self.n):
                    dev = np.expand_dims(np.take(grids[j], a, axis=axis), axis)
                    harmed = np.expand_dims(is_br, axis) & (dev < grids[j])
                    if harmed.any():
                        flat = int(np.nonzero(harmed.ravel())[0][0])
                        return False, (self.decode(flat), i, j)
        return True, None

    def bbr(self, profile) -> tuple[int, int, Profile]:
        """Best best-response deviation at ``profile``.

        Returns ``(deviator, action, destination)`` where the deviator is the
        player whose best response earns the highest utility among all
        players.  Ties break to the lowest player index, then lowest action
        index.  At a Nash equilibrium the destination equals the input.
        """
        profile = _as_profile(profile)
        self.encode(profile)
        best_player, best_action, best_value = -1, -1, -np.inf
        for i in range(self.n):
            actions = self.best_response(profile, i)
            a = min(actions)
            value = self.utility(profile[:i] + (a,) + profile[i + 1 :], i)
            if value > best_value:
                best_player, best_action, best_value = i, a, value
        dest = profile[:best_player] + (best_action,) + profile[best_player + 1 :]
        return best_player, best_action, dest

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        utilities = {
            ",".join(map(str, self.decode(k))): [float(v) for v in self.table[k]]
            for k in range(self.num_profiles)
        }
        return {
            "players": self.n,
            "actions": [list(acts) for acts in self.actions],
            "utilities": utilities,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, data: dict, name: str = "game") -> "Game":
        actions = [tuple(acts) for acts in data["actions"]]
        if len(actions) != int(data["players"]):
            raise ValueError("actions list does not match player count")
        sizes = [len(a) for a in actions]
        num = int(np.prod(sizes))
        table = np.zeros((num, len(actions)))
        seen = np.zeros(num, dtype=bool)
        probe = cls.__new__(cls)  # encoding helper without positivity checks
        object.__setattr__(probe, "actions", tuple(actions))
        radix = np.ones(len(sizes), dtype=np.int64)
        for i in range(1, len(sizes)):
            radix[i] = radix[i - 1] * sizes[i - 1]
        object.__setattr__(probe, "_radix", radix)
        for key, values in data["utilities"].items():
            profile = tuple(int(x) for x in key.split(","))
            idx = probe.encode(profile)
            if len(values) != len(actions):
                raise ValueError(f"profile {key}: expected {len(actions)} utilities")
            table[idx] = values
            seen[idx] = True
        if not seen.all():
            missing = int(np.nonzero(~seen)[0][0])
            profile = tuple(
                (missing // int(radix[i])) % sizes[i] for i in range(len(sizes))
            )
            raise ValueError(f"missing utilities for profile {profile}")
        return cls(actions=tuple(actions), table=table, name=name)

    @classmethod
    def load(cls, path) -> "Game":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data, name=str(path))

    @classmethod
    def from_function(cls, actions, fn, name: str = "game") -> "Game":
        """Tabulate ``fn(profile, player) -> float`` into a game."""
        actions = tuple(tuple(str(a) for a in acts) for acts in actions)
        sizes = [len(a) for a in actions]
        n = len(actions)
        num = int(np.prod(sizes))
        table = np.zeros((num, n))
        for idx in range(num):
            rem, profile = idx, []
            for m in sizes:
                profile.append(rem % m)
                rem //= m
            profile = tuple(profile)
            for i in range(n):
                table[idx, i] = fn(profile, i)
        return cls(actions=actions, table=table, name=name)


def two_player_game(u1, u2, name: str = "game") -> Game:
    """Build a 2-player game from payoff matrices indexed [a1][a2]."""
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if u1.shape != u2.shape or u1.ndim != 2:
        raise ValueError("payoff matrices must be 2-d and of equal shape")
    m1, m2 = u1.shape
    actions = (tuple(str(a) for a in range(m1)), tuple(str(a) for a in range(m2)))
    table = np.zeros((m1 * m2, 2))
    for a2 in range(m2):
        for a1 in range(m1):
            table[a2 * m1 + a1] = (u1[a1, a2], u2[a1, a2])
    return Game(actions=actions, table=table, name=name)
