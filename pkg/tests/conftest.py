"""Shared generators for randomized tests.

Expected values in the suite come from three sources: hand-checkable
constructions evaluated here by independent brute-force oracles, frozen
constants computed once with those oracles, and closed-form identities.
"""

import numpy as np

from plautomata import Game

# one human-readable line per acceptance criterion, echoed after the run
acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


def random_positive_game(rng, sizes, low=0.5, high=9.5, name="random"):
    """Uniform positive payoffs; epsilon up to ~0.1 keeps the step size valid."""
    total = int(np.prod(sizes))
    table = rng.uniform(low, high, size=(total, len(sizes)))
    actions = tuple(tuple(str(a) for a in range(m)) for m in sizes)
    return Game(actions=actions, table=table, name=name)


def random_common_interest_game(rng, sizes, low=0.5, high=9.5, name="common"):
    """All players share one payoff function, which makes a coordination
    game: a best response raises the shared payoff, so it harms nobody."""
    total = int(np.prod(sizes))
    shared = rng.uniform(low, high, size=total)
    table = np.tile(shared[:, None], (1, len(sizes)))
    actions = tuple(tuple(str(a) for a in range(m)) for m in sizes)
    return Game(actions=actions, table=table, name=name)


def brute_force_nash(game):
    """Independent Nash oracle: scan deviations profile by profile."""
    result = set()
    for profile in game.profiles():
        ok = True
        for i in range(game.n):
            u = game.utility(profile, i)
            for a in range(game.sizes[i]):
                other = profile[:i] + (a,) + profile[i + 1:]
                if game.utility(other, i) > u:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            result.add(profile)
    return result
