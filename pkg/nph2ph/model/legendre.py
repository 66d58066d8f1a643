"""Legendre polynomials on the unit interval, with P0 = 1 and P1(t) = t.

The polynomials are used on [0, 1] as they are; least squares does not
need them to be orthogonal there.
"""

import numpy as np

MAX_ORDER = 8


def _check_order(n):
    if n < 0:
        raise ValueError(f"Legendre order must be non-negative, got {n}")


def legendre_all(n: int, t):
    """
    Values of P0..Pn and their first two derivatives.

    Parameters
    ----------
    n : int
        Highest order.
    t : float or numpy.array
        Evaluation points.

    Returns
    -------
    p, dp, d2p : numpy.array
        Arrays of shape (n + 1, *t.shape).
    """
    _check_order(n)
    t = np.asarray(t, dtype=float)
    p = np.zeros((n + 1,) + t.shape)
    dp = np.zeros_like(p)
    d2p = np.zeros_like(p)
    p[0] = 1.0
    if n >= 1:
        p[1] = t
        dp[1] = 1.0
    for m in range(1, n):
        p[m + 1] = ((2 * m + 1) * t * p[m] - m * p[m - 1]) / (m + 1)
        dp[m + 1] = dp[m - 1] + (2 * m + 1) * p[m]
        d2p[m + 1] = d2p[m - 1] + (2 * m + 1) * dp[m]
    return p, dp, d2p


def _pick(arrays, n, t):
    out = arrays[n]
    return float(out) if np.ndim(t) == 0 else out


def legendre_eval(n: int, t):
    return _pick(legendre_all(n, t)[0], n, t)


def legendre_derivative(n: int, t):
    return _pick(legendre_all(n, t)[1], n, t)


def legendre_second_derivative(n: int, t):
    return _pick(legendre_all(n, t)[2], n, t)
