"""Smooth compactly supported test functions for weak-form residuals.

The standard family is a fixed 4 x 4 lattice of C-infinity bumps, L2
normalized on the grid they are sampled on.  Weak residuals quoted anywhere
in the package are maxima over this family unless stated otherwise.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid, ScalarField

BUMP_CENTERS = tuple((x, y) for x in (0.2, 0.4, 0.6, 0.8) for y in (0.2, 0.4, 0.6, 0.8))
BUMP_RADIUS = 0.12


def bump_values(X, Y, center, radius):
    """exp(1 - 1/(1 - t^2)) inside t = |x - c|/radius < 1, zero outside."""
    t2 = ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / radius**2
    out = np.zeros_like(X)
    inside = t2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
    return out


def bump_field(grid: Grid, center, radius=BUMP_RADIUS, normalize=True) -> ScalarField:
    X, Y = grid.centers()
    vals = bump_values(X, Y, center, radius)
    if normalize:
        nrm = np.sqrt(np.sum(vals * vals) * grid.h**2)
        if nrm > 0:
            vals = vals / nrm
    return ScalarField(grid, vals)


def bump_basis(grid: Grid, normalize=True):
    """The fixed 16-bump family on this grid."""
    return [bump_field(grid, c, BUMP_RADIUS, normalize) for c in BUMP_CENTERS]
