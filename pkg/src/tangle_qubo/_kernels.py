"""numba kernels for the bit-level solvers.

All kernels use the dense form E(x) = offset + h.x + x.Q.x/2 with ``Q``
symmetric and zero on the diagonal, and the local field
f_i = h_i + sum_j Q_ij x_j, so flipping bit i changes the energy by
(1 - 2 x_i) f_i.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def local_field(h, Q, x):
    return h + Q @ x.astype(np.float64)


@njit(cache=True)
def gray_enumerate(h, Q, offset, collect, max_collect):
    """Visit all 2^n assignments in Gray-code order.

    Returns the minimum energy, the first minimiser (as an int code), and up
    to ``max_collect`` codes attaining the minimum when ``collect``.
    """
    n = h.shape[0]
    x = np.zeros(n, dtype=np.int8)
    f = h.copy()
    e = offset
    best = e
    best_code = 0
    code = 0
    found = np.empty(max_collect, dtype=np.int64)
    nfound = 0
    if collect:
        found[0] = 0
        nfound = 1
    total = 1 << n
    for step in range(1, total):
        # bit to flip: index of lowest set bit of step
        i = 0
        s = step
        while (s & 1) == 0:
            s >>= 1
            i += 1
        if x[i] == 0:
            e += f[i]
            x[i] = 1
            d = 1.0
        else:
            e -= f[i]
            x[i] = 0
            d = -1.0
        code ^= (1 << i)
        for j in range(n):
            f[j] += d * Q[i, j]
        if e < best - 1e-9:
            best = e
            best_code = code
            nfound = 0
            if collect:
                found[0] = code
                nfound = 1
        elif collect and abs(e - best) <= 1e-9:
            if nfound < max_collect:
                found[nfound] = code
            nfound += 1
    return best, best_code, found[:min(nfound, max_collect)], nfound


@njit(cache=True)
def tabu_run(h, Q, x, f, e, tabu_until, it0, n_iters, tenure, best_x, best_e,
             trace_it, trace_e, ntrace, rng_seed):
    """Advance a 1-flip tabu search by ``n_iters`` moves (state updated in place).

    Equally good moves are chosen uniformly at random.
    Returns (e, best_e, it, ntrace).
    """
    np.random.seed(rng_seed)
    n = h.shape[0]
    it = it0
    for _ in range(n_iters):
        pick = -1
        pick_d = np.inf
        ties = 0
        for i in range(n):
            d = f[i] if x[i] == 0 else -f[i]
            if tabu_until[i] > it and not (e + d < best_e - 1e-9):
                continue
            if d < pick_d - 1e-9:
                pick_d = d
                pick = i
                ties = 1
            elif d <= pick_d + 1e-9:
                ties += 1
                if np.random.randint(ties) == 0:
                    pick = i
        if pick < 0:
            it += 1
            continue
        if x[pick] == 0:
            x[pick] = 1
            s = 1.0
        else:
            x[pick] = 0
            s = -1.0
        for j in range(n):
            f[j] += s * Q[pick, j]
        e += pick_d
        tabu_until[pick] = it + tenure
        it += 1
        if e < best_e - 1e-9:
            best_e = e
            best_x[:] = x
            if ntrace < trace_it.shape[0]:
                trace_it[ntrace] = it
                trace_e[ntrace] = e
                ntrace += 1
    return e, best_e, it, ntrace


@njit(cache=True)
def anneal_run(h, Q, x, f, e, temps, order, u, best_x, best_e, trace_it, trace_e, ntrace, it0):
    """Metropolis sweeps; ``temps[s]`` is the temperature of sweep s,
    ``order`` the visiting order within sweep s and ``u`` the uniforms.

    A temperature of 0 accepts only non-increasing moves.
    """
    n = h.shape[0]
    it = it0
    for s in range(temps.shape[0]):
        T = temps[s]
        for k in range(n):
            i = order[s, k]
            d = f[i] if x[i] == 0 else -f[i]
            accept = d <= 0.0
            if not accept and T > 0.0:
                accept = u[s, k] < np.exp(-d / T)
            it += 1
            if accept:
                if x[i] == 0:
                    x[i] = 1
                    sg = 1.0
                else:
                    x[i] = 0
                    sg = -1.0
                for j in range(n):
                    f[j] += sg * Q[i, j]
                e += d
                if e < best_e - 1e-9:
                    best_e = e
                    best_x[:] = x
                    if ntrace < trace_it.shape[0]:
                        trace_it[ntrace] = it
                        trace_e[ntrace] = e
                        ntrace += 1
    return e, best_e, ntrace
