"""Closed-form reference solutions for the bundled cases."""

from __future__ import annotations

import numpy as np


def psystem_rarefaction_exact(gamma: float, x0: float = 0.75):
    """Single 1-rarefaction of the Lagrangian gas system.

    Initial data (v, u) = (1, 0) left of ``x0`` and
    (2^(2/(gamma-1)), 1/(gamma-1)) to the right; requires the pressure
    normalization r = 1/gamma so the left fan edge moves at speed -1.
    Returns ``exact(coords, t) -> (N, 2)``.
    """
    g = float(gamma)
    vR = 2.0 ** (2.0 / (g - 1.0))
    uR = 1.0 / (g - 1.0)

    def exact(coords, t):
        x = np.asarray(coords, dtype=float).reshape(-1)
        v = np.empty_like(x)
        u = np.empty_like(x)
        if t <= 0.0:
            left = x < x0
            v[:] = np.where(left, 1.0, vR)
            u[:] = np.where(left, 0.0, uR)
            return np.stack([v, u], axis=1)
        xi = (x - x0) / t
        head = xi <= -1.0
        tail = xi >= -(2.0 ** (-(g + 1.0) / (g - 1.0)))
        fan = ~head & ~tail
        v[head] = 1.0
        u[head] = 0.0
        v[tail] = vR
        u[tail] = uR
        s = (x0 - x[fan]) / t
        v[fan] = s ** (-2.0 / (g + 1.0))
        u[fan] = 2.0 / (g - 1.0) * (1.0 - s ** ((g - 1.0) / (g + 1.0)))
        return np.stack([v, u], axis=1)

    return exact
