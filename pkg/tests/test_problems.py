"""Manufactured harmonic maps and the conformally invariant functional."""

import numpy as np
import pytest

from gaugelab.errors import DimensionMismatch
from gaugelab.frames import MetricData, builtin_metric
from gaugelab.grid import Grid, ScalarField, grad
from gaugelab.problems import (dirichlet_energy, el_residual,
                               gruter_functional, harmonic_map_s2,
                               problem_residual)
from gaugelab.testfuncs import bump_basis


@pytest.mark.parametrize("degree,scale", [(1, 1.0), (2, 0.7), (3, 1.3)])
def test_image_on_unit_sphere(degree, scale):
    pb = harmonic_map_s2(degree, Grid(48), scale=scale)
    norms = sum(c.data ** 2 for c in pb.u)
    assert np.max(np.abs(norms - 1.0)) <= 1e-14


def test_omega_exactly_antisymmetric():
    pb = harmonic_map_s2(2, Grid(32), scale=0.9)
    raw = pb.omega.data
    assert np.array_equal(raw, -np.swapaxes(raw, 2, 3))
    assert pb.n == 3 and pb.grid.n_cells == 32
    assert pb.metadata["generator"] == "harmonic_map_s2"
    assert pb.metadata["scale"] == 0.9


def test_generator_validation():
    with pytest.raises(ValueError, match="degree"):
        harmonic_map_s2(4, Grid(16))
    with pytest.raises(ValueError, match="scale"):
        harmonic_map_s2(1, Grid(16), scale=0.0)


@pytest.mark.parametrize("degree", [1, 2])
def test_problem_residual_second_order(degree):
    vals = [problem_residual(harmonic_map_s2(degree, Grid(N), scale=0.7))
            for N in (32, 64, 128)]
    orders = np.log2(np.array(vals[:-1]) / np.array(vals[1:]))
    assert np.all(orders >= 1.9), (vals, orders)


def test_dilation_matches_conformal_invariance():
    # u_s = u_1 composed with the dilation about the center, so its energy
    # over the square equals the energy of u_1 over the shrunken square
    g = Grid(64)
    s = 2.0
    full = dirichlet_energy(harmonic_map_s2(1, g, scale=s).u)
    u1 = harmonic_map_s2(1, g, scale=1.0).u
    X, Y = g.centers()
    m = (np.abs(X - 0.5) < 0.25) & (np.abs(Y - 0.5) < 0.25)
    sub = sum(float(np.sum(grad(c).data[m] ** 2)) for c in u1) * g.h ** 2
    assert abs(full - sub) <= 1e-3 * sub


def test_gruter_linear_map_oracle():
    # v = (x, y): Dirichlet part 2 |D|, cross term 2 b_12 |D|
    g = Grid(32)
    X, Y = g.centers()
    v = (ScalarField(g, X), ScalarField(g, Y))
    met = builtin_metric("euclidean", 2, {"b_constant": [0.3]})
    assert abs(gruter_functional(met, v) - 2.6) <= 1e-12
    met0 = builtin_metric("euclidean", 2)
    assert abs(gruter_functional(met0, v) - dirichlet_energy(v)) <= 1e-15


def test_gruter_shift_invariance():
    g = Grid(24)
    X, Y = g.centers()
    v = (ScalarField(g, np.sin(np.pi * X) * Y), ScalarField(g, X * Y * Y))
    w = (ScalarField(g, v[0].data + 3.7), ScalarField(g, v[1].data - 1.2))
    met = builtin_metric("euclidean", 2, {"b_constant": [0.5]})
    a, b = gruter_functional(met, v), gruter_functional(met, w)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_el_residual_harmonic_quadratic_is_roundoff():
    # gradients of a harmonic quadratic are linear, and the flux sums
    # telescope exactly against compactly supported bumps
    met = builtin_metric("euclidean", 2)
    for N in (32, 64):
        g = Grid(N)
        X, Y = g.centers()
        v = (ScalarField(g, (X - 0.5) ** 2 - (Y - 0.5) ** 2),
             ScalarField(g, 2.0 * (X - 0.5) * (Y - 0.5)))
        assert el_residual(met, v) <= 1e-12


def _curved_metric():
    def gfun(x):
        return np.diag([1.0 + 0.2 * x[0] ** 2, 1.2 + 0.1 * x[1]])

    def bfun(x):
        val = 0.4 * x[0] * x[1]
        return np.array([[0.0, val], [-val, 0.0]])

    return MetricData(2, gfun, bfun)    # derivatives via central differences


def test_el_residual_is_first_variation():
    # oracle: central difference of the functional along each (bump, component)
    met = _curved_metric()
    g = Grid(24)
    X, Y = g.centers()
    v = [ScalarField(g, 0.3 * np.sin(np.pi * X) * Y),
         ScalarField(g, 0.2 * X * X + 0.1 * np.cos(np.pi * Y))]
    eps = 1e-5
    fd_max = 0.0
    for phi in bump_basis(g):
        for j in range(2):
            vp, vm = list(v), list(v)
            vp[j] = ScalarField(g, v[j].data + eps * phi.data)
            vm[j] = ScalarField(g, v[j].data - eps * phi.data)
            d = (gruter_functional(met, vp) - gruter_functional(met, vm)) / (2 * eps)
            fd_max = max(fd_max, abs(d))
    R = el_residual(met, v)
    assert abs(fd_max - R) <= 1e-6 * R, (fd_max, R)


def test_el_residual_round_metric_orders():
    def gfun(x):
        return 4.0 / (1.0 + float(x @ x)) ** 2 * np.eye(2)

    def dgfun(x):
        c = -16.0 / (1.0 + float(x @ x)) ** 3
        return np.einsum("d,ij->dij", c * x, np.eye(2))

    met = MetricData(2, gfun, lambda x: np.zeros((2, 2)), dgfun,
                     lambda x: np.zeros((2, 2, 2)))
    vals = []
    for N in (32, 64):
        g = Grid(N)
        X, Y = g.centers()
        wx, wy = X - 0.5, Y - 0.5
        v = (ScalarField(g, (wx * wx - wy * wy) / 0.8),
             ScalarField(g, 2.0 * wx * wy / 0.8))
        vals.append(el_residual(met, v))
    assert np.log2(vals[0] / vals[1]) >= 1.9, vals


def test_el_residual_dimension_check():
    g = Grid(16)
    X, _ = g.centers()
    with pytest.raises(DimensionMismatch):
        el_residual(builtin_metric("euclidean", 3), (ScalarField(g, X),))
