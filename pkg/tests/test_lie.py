"""Skew potentials, rotation fields, exponentials and gauge transforms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from gaugelab import _kernels as K
from gaugelab.errors import DimensionMismatch
from gaugelab.grid import Grid
from gaugelab.lie import (RotationField, SkewPotential, gauge_transform,
                          identity_rotation, random_skew_potential,
                          reproject_rotation, skew_basis, skew_exp,
                          validate_rotation)


def test_skew_basis_count_and_normalization():
    for n in (2, 3, 4, 5):
        basis = skew_basis(n)
        assert len(basis) == n * (n - 1) // 2
        for B in basis:
            M = B.matrix
            np.testing.assert_array_equal(M, -M.T)
            assert np.count_nonzero(M) == 2


def test_skew_potential_rejects_symmetric_part():
    g = Grid(4)
    data = np.zeros((4, 4, 2, 2, 2))
    data[..., 0, 1, 0] = 1.0   # missing the mirrored entry
    with pytest.raises((ValueError, DimensionMismatch)):
        SkewPotential(g, 2, data)


def test_skew_potential_norms():
    g = Grid(8)
    data = np.zeros((8, 8, 2, 2, 2))
    data[..., 0, 1, :] = 3.0
    data[..., 1, 0, :] = -3.0
    om = SkewPotential(g, 2, data)
    # |Omega|^2 per cell = sum over entries and directions = 4 * 9 = 36
    np.testing.assert_allclose(om.pointwise_norm(), 6.0)
    np.testing.assert_allclose(om.l2_norm(), 6.0)     # unit square


def test_skew_exp_against_scipy():
    rng = np.random.default_rng(2)
    for n in (2, 3, 4):
        Z = rng.standard_normal((3, 3, n, n))
        Z = Z - np.swapaxes(Z, 2, 3)
        Q = skew_exp(Z, 0.9)
        for idx in np.ndindex(3, 3):
            np.testing.assert_allclose(Q[idx], expm(0.9 * Z[idx]), atol=1e-12)


def test_skew_exp_n2_closed_form():
    theta = 0.731
    Z = np.array([[[[0.0, -theta], [theta, 0.0]]]])
    Q = skew_exp(Z, 1.0)[0, 0]
    expect = np.array([[np.cos(theta), -np.sin(theta)],
                       [np.sin(theta), np.cos(theta)]])
    np.testing.assert_allclose(Q, expect, atol=1e-15)


def test_validate_and_reproject_rotation():
    g = Grid(6)
    P = identity_rotation(g, 3)
    rep = validate_rotation(P)
    assert rep.ok and rep.max_orthogonality_defect == 0.0
    bad = RotationField(g, 3, P.data + 1e-6)
    rep2 = validate_rotation(bad, tol=1e-8)
    assert not rep2.ok
    fixed = reproject_rotation(bad)
    rep3 = validate_rotation(fixed, tol=1e-12)
    assert rep3.ok
    np.testing.assert_allclose(np.linalg.det(fixed.data), 1.0, atol=1e-12)


def test_gauge_transform_matches_direct_formula():
    # Omega^P = skew(P^T dP) - P^T Omega P, assembled with the shared stencil
    g = Grid(12)
    n = 3
    Om = random_skew_potential(n, g, 0.7, 2, seed=9)
    Z = random_skew_potential(n, g, 0.4, 3, seed=10)
    P = RotationField(g, n, skew_exp(Z.data[..., 0], 1.0))
    tr = gauge_transform(P, Om)
    Pd = P.data
    for d in (0, 1):
        dP = np.stack(
            [K.diff(Pd[:, :, i, j], d, g.h) for i in range(n) for j in range(n)],
            axis=-1).reshape(12, 12, n, n)
        M = np.swapaxes(Pd, 2, 3) @ dP
        expect = 0.5 * (M - np.swapaxes(M, 2, 3)) \
            - np.swapaxes(Pd, 2, 3) @ Om.data[..., d] @ Pd
        got = tr.omega.data[..., d]
        assert np.max(np.abs(got - expect)) <= 1e-11


def test_gauge_transform_identity_is_minus_omega():
    g = Grid(10)
    Om = random_skew_potential(2, g, 0.5, 2, seed=1)
    tr = gauge_transform(identity_rotation(g, 2), Om)
    np.testing.assert_array_equal(tr.omega.data, -Om.data)
    assert tr.sym_defect == 0.0


@given(st.integers(0, 2**31 - 1), st.floats(0.01, 5.0))
@settings(max_examples=20, deadline=None)
def test_random_potential_norm_equals_amplitude(seed, amplitude):
    g = Grid(12)
    om = random_skew_potential(2, g, amplitude, 2, seed)
    assert abs(om.l2_norm() - amplitude) <= 1e-12 * amplitude


def test_random_potential_deterministic_and_skew():
    g = Grid(16)
    a = random_skew_potential(3, g, 1.0, 2, seed=42)
    b = random_skew_potential(3, g, 1.0, 2, seed=42)
    np.testing.assert_array_equal(a.data, b.data)
    np.testing.assert_array_equal(a.data, -np.swapaxes(b.data, 2, 3))
    c = random_skew_potential(3, g, 1.0, 2, seed=43)
    assert np.max(np.abs(a.data - c.data)) > 1e-3


def test_random_potential_resolution_coherent():
    # same seed on a finer grid samples the same trigonometric polynomial:
    # the L2 norms agree to quadrature error, far below field magnitude
    coarse = random_skew_potential(2, Grid(24), 1.0, 2, seed=5)
    fine = random_skew_potential(2, Grid(96), 1.0, 2, seed=5)
    assert abs(coarse.l2_norm() - fine.l2_norm()) <= 1e-12
