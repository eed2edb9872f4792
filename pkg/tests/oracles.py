"""Independent reference computations shared by the unit and acceptance tests."""

import math

import numpy as np


def maier_log_psi(L, delta):
    l1 = np.log(L)
    l2 = np.log(l1)
    l3 = np.log(l2)
    l4 = np.log(l3)
    return -delta * (np.log(l1) + np.log(l2) + np.log(l4) - 2 * np.log(l3))


def inverse_L(family, param, delta, log_y):
    """``ln(1/Psi^-1(y))`` for an array of ``ln y``.

    Closed forms where they exist; the Maier gauge is inverted by a
    vectorized bisection on ``ln L`` (``ln Psi`` falls as ``L`` grows).
    """
    log_y = np.asarray(log_y, dtype=float)
    if family == "log_power":
        return np.exp(log_y / param)
    if family == "loglog_power":
        return np.exp(np.exp(log_y / param))
    if family == "power_offset":
        return -log_y / param
    lo = np.full(log_y.shape, math.log(math.exp(math.exp(math.e))) + 1e-12)
    hi = np.full(log_y.shape, 700.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = maier_log_psi(np.exp(mid), delta) > log_y
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return np.exp(0.5 * (lo + hi))


def inner_max_grid(family, param, delta, alpha, is_prime, a, fine=2000):
    """Brute force ``sup_{1 <= x <= a/3}`` over a dense grid.

    Prime distances are integers, so every integer ``x`` is sampled both
    as a point and as a left limit (count with ``<``); a uniform grid
    and the endpoint ``a/3`` (also as a left limit) complete the grid.
    Counts come from direct summation of the membership array.
    """
    top = a / 3
    ints = np.arange(1, math.floor(top) + 1, dtype=float)
    grid = np.linspace(1.0, top, fine)
    xs = np.concatenate([ints, grid, [top]])
    left = np.concatenate([ints[1:], [top]])
    lo_i = max(0, math.ceil(a - top))
    window = np.nonzero(is_prime[lo_i : math.floor(a + top) + 1])[0] + lo_i
    dist = np.abs(window - a).astype(float)
    closed = (dist[None, :] <= xs[:, None]).sum(axis=1)
    opened = (dist[None, :] < left[:, None]).sum(axis=1)
    x_all = np.concatenate([xs, left])
    c_all = np.concatenate([closed, opened])
    ok = c_all > 0
    log_y = np.log(c_all[ok]) - delta * np.log(x_all[ok]) - math.log(alpha)
    return float(np.max(inverse_L(family, param, delta, log_y)))
