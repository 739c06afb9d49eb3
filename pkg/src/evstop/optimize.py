"""Nelder-Mead simplex search, compiled with numba.

The likelihood fits in a Monte Carlo study run millions of times, so the
simplex loop has to live next to the objective inside compiled code.
:func:`specialize` binds the search to one jitted objective
``objective(x, args)``; binding through globals rather than passing the
objective as an argument lets numba cache the compiled result on disk.
"""

import types

import numpy as np
from numba import njit

RHO = 1.0
CHI = 2.0
PSI = 0.5
SHRINK = 0.5


@njit(cache=True)
def _sort_simplex(sim, fsim):
    order = np.argsort(fsim, kind="mergesort")
    return sim[order].copy(), fsim[order].copy()


def _simplex_minimize(x0, step, args, xatol, fatol, maxfev):
    """Minimise ``OBJECTIVE(x, args)`` from ``x0``.

    The initial simplex is ``x0`` plus ``step[i]`` along each axis.
    Returns ``(x, fx, nfev, converged)``; ``converged`` is False when
    ``maxfev`` was exhausted before both tolerances were met.
    """
    n = x0.shape[0]
    sim = np.empty((n + 1, n))
    fsim = np.empty(n + 1)
    sim[0] = x0
    fsim[0] = OBJECTIVE(x0, args)
    for i in range(n):
        y = x0.copy()
        y[i] += step[i]
        sim[i + 1] = y
        fsim[i + 1] = OBJECTIVE(y, args)
    nfev = n + 1
    sim, fsim = _sort_simplex(sim, fsim)

    converged = False
    while nfev < maxfev:
        xspread = 0.0
        fspread = 0.0
        for j in range(1, n + 1):
            for i in range(n):
                d = abs(sim[j, i] - sim[0, i])
                if d > xspread:
                    xspread = d
            d = abs(fsim[j] - fsim[0])
            if not d <= fspread:
                fspread = d
        if xspread <= xatol and fspread <= fatol:
            converged = True
            break

        xbar = np.zeros(n)
        for j in range(n):
            xbar += sim[j]
        xbar /= n
        worst = sim[n]

        xr = (1.0 + RHO) * xbar - RHO * worst
        fxr = OBJECTIVE(xr, args)
        nfev += 1
        shrink = False
        if fxr < fsim[0]:
            xe = (1.0 + RHO * CHI) * xbar - RHO * CHI * worst
            fxe = OBJECTIVE(xe, args)
            nfev += 1
            if fxe < fxr:
                sim[n] = xe
                fsim[n] = fxe
            else:
                sim[n] = xr
                fsim[n] = fxr
        elif fxr < fsim[n - 1]:
            sim[n] = xr
            fsim[n] = fxr
        else:
            if fxr < fsim[n]:
                xc = (1.0 + PSI * RHO) * xbar - PSI * RHO * worst
                fxc = OBJECTIVE(xc, args)
                nfev += 1
                if fxc <= fxr:
                    sim[n] = xc
                    fsim[n] = fxc
                else:
                    shrink = True
            else:
                xcc = (1.0 - PSI) * xbar + PSI * worst
                fxcc = OBJECTIVE(xcc, args)
                nfev += 1
                if fxcc < fsim[n]:
                    sim[n] = xcc
                    fsim[n] = fxcc
                else:
                    shrink = True
            if shrink:
                for j in range(1, n + 1):
                    sim[j] = sim[0] + SHRINK * (sim[j] - sim[0])
                    fsim[j] = OBJECTIVE(sim[j], args)
                nfev += n
        sim, fsim = _sort_simplex(sim, fsim)

    return sim[0].copy(), fsim[0], nfev, converged


def _multistart_minimize(inits, step, args, xatol, fatol, maxfev, agree_tol, early_stop,
                         polish):
    """Run the simplex search from each row of ``inits``.

    Rows whose objective is not finite are skipped. With ``early_stop``
    the loop ends as soon as the two best finished starts agree within
    ``agree_tol``. Returns ``(x, fx, nfev, used, converged, n_feasible)``;
    ties within 1e-9 go to the lowest start index.
    """
    nstart, n = inits.shape
    xs = np.empty((nstart, n))
    fs = np.full(nstart, np.inf)
    oks = np.zeros(nstart, dtype=np.bool_)
    nfev = 0
    used = 0
    feasible = 0
    for r in range(nstart):
        used += 1
        f0 = OBJECTIVE(inits[r], args)
        nfev += 1
        if not np.isfinite(f0):
            xs[r] = inits[r]
            continue
        feasible += 1
        x, fx, ne, ok = SIMPLEX(inits[r], step, args, xatol, fatol, maxfev)
        nfev += ne
        if polish:
            x2, fx2, ne2, ok2 = SIMPLEX(x, step * 0.1, args, xatol, fatol, maxfev)
            nfev += ne2
            if fx2 <= fx:
                x, fx, ok = x2, fx2, ok2
        xs[r] = x
        fs[r] = fx
        oks[r] = ok
        if early_stop and feasible >= 2:
            srt = np.sort(fs[: r + 1])
            if srt[1] - srt[0] <= agree_tol:
                break

    best = 0
    fmin = np.inf
    for r in range(used):
        if fs[r] < fmin:
            fmin = fs[r]
    for r in range(used):
        if fs[r] <= fmin + 1e-9:
            best = r
            break
    srt = np.sort(fs[:used])
    if feasible >= 2:
        agree = srt[1] - srt[0] <= agree_tol
    else:
        agree = feasible == 1 and nstart == 1
    converged = np.isfinite(fmin) and agree and oks[best]
    return xs[best].copy(), fs[best], nfev, used, converged, feasible


def _rebind(fn, env, name):
    out = types.FunctionType(fn.__code__, env, name, fn.__defaults__)
    out.__qualname__ = name
    out.__doc__ = fn.__doc__
    return njit(cache=True)(out)


def specialize(objective):
    """Return ``(simplex_minimize, multistart_minimize)`` compiled for ``objective``.

    ``simplex_minimize(x0, step, args, xatol, fatol, maxfev)`` returns
    ``(x, fx, nfev, converged)``; see ``_multistart_minimize`` for the other.
    """
    env = dict(globals())
    env["OBJECTIVE"] = objective
    tag = objective.__name__
    simplex = _rebind(_simplex_minimize, env, f"simplex_minimize_{tag}")
    env["SIMPLEX"] = simplex
    multistart = _rebind(_multistart_minimize, env, f"multistart_minimize_{tag}")
    return simplex, multistart
