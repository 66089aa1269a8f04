"""Phonon-number distributions of the three probe families and their
derivatives with respect to the mean occupation.

Each family is parametrised by its mean phonon number ``nbar``:

* ``poisson``  -- coherent state, ``nbar = |alpha|^2``
* ``thermal``  -- geometric distribution, marginal of a two-mode squeezed state,
  ``nbar = sinh(r)^2``
* ``squeezed`` -- single-mode squeezed vacuum (even Fock states only),
  ``nbar = sinh(r)^2``
"""

import numpy as np
from scipy.special import gammaln

FAMILIES = ("poisson", "thermal", "squeezed")


def _check(nbar, n_max):
    if nbar < 0:
        raise ValueError(f"mean occupation must be >= 0, got {nbar}")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")


def poisson(nbar, n_max):
    _check(nbar, n_max)
    n = np.arange(n_max + 1)
    if nbar == 0:
        return (n == 0).astype(float)
    return np.exp(n * np.log(nbar) - nbar - gammaln(n + 1))


def thermal(nbar, n_max):
    _check(nbar, n_max)
    n = np.arange(n_max + 1)
    if nbar == 0:
        return (n == 0).astype(float)
    return np.exp(n * np.log(nbar) - (n + 1) * np.log1p(nbar))


def squeezed(nbar, n_max):
    _check(nbar, n_max)
    n = np.arange(n_max + 1)
    out = np.zeros(n_max + 1)
    if nbar == 0:
        out[0] = 1.0
        return out
    k = n[::2] // 2
    mu = nbar / (1.0 + nbar)
    log_p = (gammaln(2 * k + 1) - 2 * gammaln(k + 1) - k * np.log(4.0)
             + k * np.log(mu) - 0.5 * np.log1p(nbar))
    out[::2] = np.exp(log_p)
    return out


def populations(family, nbar, n_max):
    """P(n) for n = 0..n_max."""
    try:
        fn = {"poisson": poisson, "thermal": thermal, "squeezed": squeezed}[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}") from None
    return fn(nbar, n_max)


def populations_dnbar(family, nbar, n_max):
    """Elementwise dP(n)/d(nbar), exact including the nbar = 0 limit."""
    p = populations(family, nbar, n_max)
    n = np.arange(n_max + 1, dtype=float)
    d = np.zeros(n_max + 1)
    if nbar == 0:
        if family == "squeezed":
            d[0] = -0.5
            if n_max >= 2:
                d[2] = 0.5
        else:
            d[0] = -1.0
            if n_max >= 1:
                d[1] = 1.0
        return d
    if family == "poisson":
        return p * (n / nbar - 1.0)
    if family == "thermal":
        return p * (n / nbar - (n + 1) / (1.0 + nbar))
    k = n / 2
    return p * (k / (nbar * (1.0 + nbar)) - 0.5 / (1.0 + nbar))


def tail(family, nbar, n_max):
    """Probability carried by Fock levels above ``n_max``."""
    if nbar == 0:
        return 0.0
    if family == "thermal":
        return float((nbar / (1.0 + nbar)) ** (n_max + 1))
    # sum the far tail directly instead of 1 - cumsum to keep tiny tails accurate
    big = cutoff_hint(family, nbar, 1e-40)
    p = populations(family, nbar, max(big, n_max + 1))
    return float(p[n_max + 1:].sum())


def cutoff_hint(family, nbar, tol):
    """Generous upper index beyond which P(n) is below ``tol`` (no tail sum)."""
    if nbar == 0:
        return 1
    if family == "poisson":
        # Chernoff-style: mean + k*sqrt(mean) + log term
        k = np.sqrt(-2 * np.log(tol))
        return int(np.ceil(nbar + k * np.sqrt(nbar) + k * k + 10))
    mu = nbar / (1.0 + nbar)
    per_step = -np.log(mu)
    steps = int(np.ceil(-np.log(tol) / per_step)) + 10
    return steps if family == "thermal" else 2 * steps


def cutoff(family, nbar, tail_tol):
    """Smallest n_max whose tail probability is at most ``tail_tol``."""
    if nbar == 0:
        return 1
    if family == "thermal":
        mu = nbar / (1.0 + nbar)
        return max(1, int(np.ceil(np.log(tail_tol) / np.log(mu))) - 1)
    big = cutoff_hint(family, nbar, tail_tol * 1e-6)
    p = populations(family, nbar, big)
    rev = np.cumsum(p[::-1])[::-1]  # rev[i] = sum_{n >= i}
    above = np.append(rev[1:], 0.0)  # above[i] = sum_{n > i}
    idx = int(np.argmax(above <= tail_tol))
    return max(1, idx)
