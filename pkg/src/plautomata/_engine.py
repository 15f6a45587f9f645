"""JIT-compiled inner loops for long simulation runs.

The RNG is numba's legacy Mersenne Twister, which produces the same stream as
``numpy.random.RandomState`` for a given seed.  Every step consumes exactly
two uniforms per player (tremble Bernoulli, then action draw by cdf
inversion), so the Python-level reference step in :mod:`plautomata.dynamics`
and these loops stay draw-for-draw aligned.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def seed(value):
    np.random.seed(value)


@nb.njit(cache=True, inline="always")
def _draw_action(x, m, lam):
    u1 = np.random.random()
    u2 = np.random.random()
    if u1 < lam:
        a = int(u2 * m)
        if a >= m:
            a = m - 1
        return a
    c = 0.0
    for k in range(m - 1):
        c += x[k]
        if u2 < c:
            return k
    return m - 1


@nb.njit(cache=True, inline="always")
def _profile_index(alpha, radix, n):
    idx = 0
    for i in range(n):
        idx += radix[i] * alpha[i]
    return idx


@nb.njit(cache=True, inline="always")
def _reinforce(x, alpha, util, sizes, idx, eps, n):
    for i in range(n):
        g = eps * util[idx, i]
        for k in range(sizes[i]):
            x[i, k] -= g * x[i, k]
        x[i, alpha[i]] += g


@nb.njit(cache=True, inline="always")
def _occupied_state(x, sizes, radix, delta, n):
    # delta-neighborhood test: every player's max component above 1 - delta;
    # returns the profile index of the neighborhood's vertex, or -1.
    idx = 0
    for i in range(n):
        best = 0
        bv = x[i, 0]
        for k in range(1, sizes[i]):
            if x[i, k] > bv:
                bv = x[i, k]
                best = k
        if bv <= 1.0 - delta:
            return -1
        idx += radix[i] * best
    return idx


@nb.njit(cache=True)
def run_chunk(util, sizes, radix, eps, lam, delta, x, alpha, profiles_out, occ_out):
    """Advance the learner in place for len(profiles_out) steps.

    Records each step's realized profile index and the index of the occupied
    pure-strategy-state delta-neighborhood (-1 when outside all of them).
    """
    n = sizes.shape[0]
    for t in range(profiles_out.shape[0]):
        for i in range(n):
            alpha[i] = _draw_action(x[i], sizes[i], lam)
        idx = _profile_index(alpha, radix, n)
        profiles_out[t] = idx
        _reinforce(x, alpha, util, sizes, idx, eps, n)
        occ_out[t] = _occupied_state(x, sizes, radix, delta, n)


@nb.njit(cache=True)
def absorb(util, sizes, radix, eps, delta, cap, x, alpha):
    """Run the unperturbed process until every strategy is within delta of a
    vertex.  Returns (profile index of the absorbing state or -1 on timeout,
    steps taken)."""
    n = sizes.shape[0]
    for t in range(cap + 1):
        idx = _occupied_state(x, sizes, radix, delta, n)
        if idx >= 0:
            return idx, t
        if t == cap:
            break
        for i in range(n):
            alpha[i] = _draw_action(x[i], sizes[i], 0.0)
        pidx = _profile_index(alpha, radix, n)
        _reinforce(x, alpha, util, sizes, pidx, eps, n)
    return -1, cap
