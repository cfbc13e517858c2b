"""Frames from metrics, Christoffel symbols and the transformed system."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugelab.errors import NotPositiveDefinite
from gaugelab.grid import Grid, ScalarField
from gaugelab.lie import SkewPotential
from gaugelab.frames import (MetricData, assemble_transformed_system,
                             build_frame, builtin_metric, christoffel,
                             transformed_residual)
from gaugelab.problems import harmonic_map_s2


def _constant_metric(G, n):
    G = np.asarray(G, dtype=np.float64)
    return MetricData(n, lambda x: G.copy(), lambda x: np.zeros((n, n)),
                      lambda x: np.zeros((n, n, n)), lambda x: np.zeros((n, n, n)))


def test_frame_diag_oracle():
    met = _constant_metric(np.diag([4.0, 9.0]), 2)
    fr = build_frame(met)
    x = np.array([0.3, -1.0])
    assert np.array_equal(fr.e(x), np.diag([2.0, 3.0]))
    assert np.array_equal(fr.inverse_frame(x), np.diag([0.5, 1.0 / 3.0]))
    assert np.allclose(fr.ginv(x), np.diag([0.25, 1.0 / 9.0]), atol=1e-15)


@given(st.integers(0, 10_000), st.integers(2, 4))
@settings(max_examples=25, deadline=None)
def test_frame_factorizes_random_spd(seed, n):
    rng = np.random.default_rng(seed)
    Awork = rng.standard_normal((n, n))
    G = Awork @ Awork.T + n * np.eye(n)
    fr = build_frame(_constant_metric(G, n))
    E = fr.e(np.zeros(n))
    assert np.max(np.abs(E.T @ E - G)) <= 1e-10 * np.max(np.abs(G))
    # triangular factor with positive diagonal, upper since E = L^T
    assert np.max(np.abs(np.tril(E, -1))) == 0.0
    assert np.all(np.diag(E) > 0)


def test_frame_rejects_indefinite():
    fr = build_frame(_constant_metric(np.diag([1.0, -1.0]), 2))
    with pytest.raises(NotPositiveDefinite):
        fr.e(np.zeros(2))


def test_frame_derivative_matches_fd():
    met = builtin_metric("conformal", 3, {"phi_coeffs": [0.1, 0.3, -0.2, 0.05]})
    fr = build_frame(met)
    x = np.array([0.2, -0.4, 0.7])
    step = 1e-6
    fd = np.empty((3, 3, 3))
    for d in range(3):
        xp, xm = x.copy(), x.copy()
        xp[d] += step
        xm[d] -= step
        fd[d] = (fr.e(xp) - fr.e(xm)) / (2.0 * step)
    assert np.max(np.abs(fr.de(x) - fd)) <= 1e-8


def test_christoffel_euclidean_zero():
    met = builtin_metric("euclidean", 3)
    assert np.array_equal(christoffel(met, np.array([0.1, 0.2, 0.3])),
                          np.zeros((3, 3, 3)))


def test_christoffel_conformal_closed_form():
    # g = exp(2 phi) I with affine phi:
    # Gamma^i_kl = d_l phi delta_ik + d_k phi delta_il - d_i phi delta_kl
    coeffs = [0.1, 0.3, -0.2, 0.05]
    met = builtin_metric("conformal", 3, {"phi_coeffs": coeffs})
    gp = np.asarray(coeffs[1:])
    rng = np.random.default_rng(11)
    eye = np.eye(3)
    for _ in range(5):
        x = rng.uniform(-1.0, 1.0, 3)
        closed = (np.einsum("l,ik->ikl", gp, eye)
                  + np.einsum("k,il->ikl", gp, eye)
                  - np.einsum("i,kl->ikl", gp, eye))
        got = christoffel(met, x)
        assert np.max(np.abs(got - closed)) <= 1e-12
        assert np.array_equal(got, np.swapaxes(got, 1, 2))


def test_christoffel_fd_fallback():
    met = builtin_metric("conformal", 3, {"phi_coeffs": [0.1, 0.3, -0.2, 0.05]})
    met_fd = MetricData(3, met.g, met.b)      # no dg: central differences
    x = np.array([0.4, -0.1, 0.25])
    assert np.max(np.abs(christoffel(met, x) - christoffel(met_fd, x))) <= 1e-9


def test_builtin_metric_validation():
    with pytest.raises(ValueError, match="no parameters"):
        builtin_metric("euclidean", 2, {"phi_coeffs": [0.0, 0.0, 0.0]})
    with pytest.raises(ValueError, match="phi_coeffs"):
        builtin_metric("conformal", 2, {})
    with pytest.raises(ValueError, match="3 entries"):
        builtin_metric("conformal", 2, {"phi_coeffs": [0.0, 1.0]})
    with pytest.raises(ValueError, match="diag_coeffs"):
        builtin_metric("diagonal", 2, {})
    with pytest.raises(ValueError, match="b_constant"):
        builtin_metric("euclidean", 3, {"b_constant": [1.0]})
    with pytest.raises(ValueError, match="unknown metric"):
        builtin_metric("hyperbolic", 2)


def test_builtin_b_constant():
    met = builtin_metric("euclidean", 3, {"b_constant": [1.0, 2.0, 3.0]})
    B = met.b_at(np.zeros(3))
    expect = np.array([[0.0, 1.0, 2.0], [-1.0, 0.0, 3.0], [-2.0, -3.0, 0.0]])
    assert np.array_equal(B, expect)


def test_euclidean_collapse_is_exact():
    g = Grid(24)
    pb = harmonic_map_s2(1, g, scale=0.5)
    om_eq = SkewPotential(g, 3, -2.0 * pb.omega.data)
    sys = assemble_transformed_system(builtin_metric("euclidean", 3), om_eq, pb.u)
    assert np.array_equal(sys.A, np.broadcast_to(np.eye(3), sys.A.shape))
    assert np.array_equal(sys.omega_tilde.data, om_eq.data)
    assert not np.any(sys.omega.data)
    assert sys.inversion_residual == 0.0
    assert sys.presym_defect_omega == 0.0
    assert sys.presym_defect_omega_tilde == 0.0


def test_assemble_not_positive_definite():
    g = Grid(8)
    pb = harmonic_map_s2(1, g, scale=0.5)
    with pytest.raises(NotPositiveDefinite):
        assemble_transformed_system(_constant_metric(np.diag([1.0, 1.0, -1.0]), 3),
                                    SkewPotential.zeros(g, 3), pb.u)


def _round_metric():
    # sphere metric in the plane: g(y) = 4 / (1 + |y|^2)^2 I
    def gfun(x):
        return 4.0 / (1.0 + float(x @ x)) ** 2 * np.eye(2)

    def dgfun(x):
        c = -16.0 / (1.0 + float(x @ x)) ** 3
        return np.einsum("d,ij->dij", c * x, np.eye(2))

    z2 = lambda x: np.zeros((2, 2))
    return MetricData(2, gfun, z2, dgfun, lambda x: np.zeros((2, 2, 2)),
                      name="round")


def _holomorphic_square(grid: Grid):
    # w -> w^2 about the domain center; holomorphic, hence harmonic into
    # any conformal target metric
    X, Y = grid.centers()
    wx, wy = X - 0.5, Y - 0.5
    return (ScalarField(grid, (wx * wx - wy * wy) / 0.8),
            ScalarField(grid, 2.0 * wx * wy / 0.8))


def test_round_metric_residual_second_order():
    met = _round_metric()
    vals = []
    for N in (32, 64, 128):
        g = Grid(N)
        v = _holomorphic_square(g)
        sys = assemble_transformed_system(met, SkewPotential.zeros(g, 2), v)
        assert sys.inversion_residual <= 1e-12
        assert sys.presym_defect_omega == 0.0
        vals.append(transformed_residual(sys, v))
    orders = np.log2(np.array(vals[:-1]) / np.array(vals[1:]))
    assert np.all(orders >= 1.9), (vals, orders)


def test_euclidean_equation_residual_second_order():
    # generated pair (u, Omega) solves -div(2 grad u) = -2 Omega . grad u,
    # so the potential enters the rewrite with the factor -2
    vals = []
    for N in (32, 64):
        g = Grid(N)
        pb = harmonic_map_s2(1, g, scale=0.5)
        om_eq = SkewPotential(g, 3, -2.0 * pb.omega.data)
        sys = assemble_transformed_system(builtin_metric("euclidean", 3),
                                          om_eq, pb.u)
        vals.append(transformed_residual(sys, pb.u))
    assert np.log2(vals[0] / vals[1]) >= 1.9, vals
