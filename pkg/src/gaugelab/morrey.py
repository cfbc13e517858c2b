"""Scaled local energies, their sampled suprema, the divergence-pairing
inequality probe, and the half-decay experiment.

The quantity J_p(x, rho; f) = rho^(p-m) * integral_{B_rho(x)} |f|^p and its
supremum M_p over sampled sub-balls drive the decay study: for a gauge-fixed
solution the proof machinery predicts J_p(z, gamma R) <= 1/2 M_p(z, 2R) once
the scale-invariant energy of the potential is small.  All suprema here are
sampled (stride lattice of centers, dyadic radii), never exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBall, SmallnessViolated
from .grid import (Ball, Grid, ScalarField, VecField, ball_mask, div,
                   field_magnitude, grad, lp_norm_on_ball)
from .hodge import hodge_decompose

__all__ = [
    "MorreyConfig",
    "DecayRow",
    "DecayReport",
    "morrey_J",
    "morrey_M",
    "hardy_bmo_probe",
    "HardyProbe",
    "decay_experiment",
]

M_DIM = 2  # ambient dimension; carried through exponents, fixed on this grid


@dataclass(frozen=True)
class MorreyConfig:
    p: float = 4.0 / 3.0
    gamma: float = 0.25
    epsilon: float = 1e-3
    stride: int = 4              # center-sampling stride, in cells
    min_radius_cells: int = 4    # dyadic ladder stops at this many cells
    decay_radii: tuple = (0.25, 0.1875, 0.125)
    decay_min_inner_cells: int = 3   # gamma*R must cover at least this many cells

    def __post_init__(self):
        if not (1.0 < self.p < 2.0):
            raise ValueError("p must lie in (1, 2) (that is, (1, m/(m-1)) with m = 2)")
        if not (0.0 < self.gamma < 0.5):
            raise ValueError("gamma must lie in (0, 1/2)")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.stride < 1 or self.min_radius_cells < 1:
            raise ValueError("stride and min_radius_cells must be >= 1")


def morrey_J(f, p: float, B: Ball, m: int = M_DIM) -> float:
    """rho^(p-m) * integral_{B}|f|^p by midpoint quadrature."""
    return B.radius ** (p - m) * lp_norm_on_ball(f, p, B)


def _sub_balls(grid: Grid, y, varrho: float, cfg: MorreyConfig):
    """Sampled family of balls contained in B_varrho(y).

    Centers: the stride lattice of cell centers, plus y itself.  Radii: the
    dyadic ladder varrho, varrho/2, ... down to min_radius_cells * h.
    Containment test |x - y| + rho <= varrho (+ fuzz).
    """
    xs = grid.axis_centers()
    idx = np.arange(0, grid.n_cells, cfg.stride)
    centers = [(float(xs[i]), float(xs[j])) for i in idx for j in idx]
    centers.append((float(y[0]), float(y[1])))
    radii = []
    rho = varrho
    floor = cfg.min_radius_cells * grid.h
    while rho >= floor - 1e-12:
        radii.append(rho)
        rho *= 0.5
    out = []
    for (cx, cy) in centers:
        dist = np.hypot(cx - y[0], cy - y[1])
        for rho in radii:
            if dist + rho <= varrho + 1e-12:
                out.append(Ball((cx, cy), rho))
    return out


def morrey_M(f, p: float, y, varrho: float, cfg: MorreyConfig | None = None,
             m: int = M_DIM) -> float:
    """Sampled supremum of J_p over sub-balls of B_varrho(y)."""
    if cfg is None:
        cfg = MorreyConfig(p=p) if 1.0 < p < 2.0 else MorreyConfig()
    _, grid = field_magnitude(f)
    balls = _sub_balls(grid, y, varrho, cfg)
    if not balls:
        raise EmptyBall("no sampled sub-ball fits inside the region")
    best = 0.0
    for B in balls:
        try:
            best = max(best, morrey_J(f, p, B, m))
        except EmptyBall:
            continue
    return best


@dataclass(frozen=True)
class HardyProbe:
    lhs: float
    gamma_norm: float        # ||Gamma||_L2 over the ball
    grad_c_norm: float       # ||grad c||_L2 over the ball
    morrey_factor: float     # M_p(y, 2 rho; grad a)^(1/p)
    c_hat: float
    degenerate: bool
    div_gamma_residual: float


def hardy_bmo_probe(a: ScalarField, Gamma: VecField, c: ScalarField, p: float,
                    center=(0.5, 0.5), radius: float = 0.5,
                    cfg: MorreyConfig | None = None) -> HardyProbe:
    """Measure the constant in |sum (grad a . Gamma) c| <= C ||Gamma|| ||grad c|| M_p^(1/p).

    The pairing runs over B_radius(center); the scaled-energy factor samples
    sub-balls of the doubled ball.  Degenerate (zero) products are flagged
    rather than divided by.
    """
    cfg = cfg or MorreyConfig(p=p if 1.0 < p < 2.0 else 4.0 / 3.0)
    grid = a.grid
    h2 = grid.h ** 2
    B = Ball(center, radius)
    mask = ball_mask(grid, B)
    ga = grad(a).data
    gc = grad(c).data
    integrand = (ga[..., 0] * Gamma.data[..., 0] + ga[..., 1] * Gamma.data[..., 1]) * c.data
    lhs = abs(float(np.sum(integrand[mask]) * h2))
    gnorm = float(np.sqrt(np.sum(Gamma.data[mask] ** 2) * h2))
    cnorm = float(np.sqrt(np.sum(gc[mask] ** 2) * h2))
    divg = div(Gamma).data
    div_res = float(np.sqrt(np.sum(divg[mask] ** 2) * h2))
    mfac = morrey_M(grad(a), p, center, 2.0 * radius, cfg) ** (1.0 / p)
    prod = gnorm * cnorm * mfac
    if prod == 0.0:
        return HardyProbe(lhs, gnorm, cnorm, mfac, 0.0, True, div_res)
    return HardyProbe(lhs, gnorm, cnorm, mfac, lhs / prod, False, div_res)


@dataclass(frozen=True)
class DecayRow:
    center: tuple
    R: float
    J_gammaR: float
    M_2R: float
    ratio: float
    smallness_ok: bool
    omega_mass: float            # integral of |Omega|^2 over B_2R
    hodge_terms: dict


@dataclass(frozen=True)
class DecayReport:
    rows: list
    smallness_ok: bool
    degenerate: bool
    p: float
    gamma: float
    epsilon: float

    def ratios(self):
        return np.array([r.ratio for r in self.rows])

    def to_rows(self):
        out = []
        for r in self.rows:
            out.append([r.center[0], r.center[1], r.R, r.J_gammaR, r.M_2R,
                        r.ratio, int(r.smallness_ok), r.omega_mass])
        return out


CSV_HEADER = ["center_x", "center_y", "R", "J_gammaR", "M_2R", "ratio",
              "smallness_ok", "omega_mass"]


def decay_experiment(problem, cfg: MorreyConfig,
                     raise_on_violation: bool = False) -> DecayReport:
    """Half-decay scan: J_p(z, gamma R; grad u) versus M_p(z, 2R; grad u).

    problem is the quadruple (u, omega, rotation, omega_p): the map, its
    potential, the minimizing gauge, and the gauged potential.  (z, R) pairs
    are sampled so that B_2R(z) fits in the square and gamma R covers at
    least decay_min_inner_cells cells.  The smallness check
    integral_{B_2R}|Omega|^2 <= epsilon is evaluated on the outer ball of
    each pair; containment makes that the binding case for every sampled
    sub-ball.  Rows also carry the split of P^T grad(u) into gradient,
    rotational, and harmonic contributions on the inner ball.
    """
    u, omega, rotation, omega_p = problem
    grid = u[0].grid
    gradu = [grad(ui) for ui in u]
    # rows of P^T grad u, decomposed once globally
    n = rotation.n
    gu = np.stack([g.data for g in gradu], axis=2)          # (N, N, n, 2)
    w = np.einsum("xykj,xykd->xyjd", rotation.data, gu, optimize=True)
    parts = [hodge_decompose(VecField(grid, w[:, :, j, :])) for j in range(n)]
    grad_f = [grad(pt.potential) for pt in parts]
    grad_g = [grad(pt.stream) for pt in parts]
    omega_mag2 = ScalarField(grid, omega.pointwise_norm() ** 2)
    omega_p_mag2 = ScalarField(grid, omega_p.pointwise_norm() ** 2)

    rows = []
    all_small = True
    any_mass = False
    for (z, R) in _decay_pairs(grid, cfg):
        outer = Ball(z, 2.0 * R)
        inner = Ball(z, cfg.gamma * R)
        mass = lp_norm_on_ball(omega_mag2, 1.0, outer)
        small = mass <= cfg.epsilon
        all_small = all_small and small
        J = morrey_J(gradu, cfg.p, inner)
        M = morrey_M(gradu, cfg.p, z, 2.0 * R, cfg)
        if M > 0.0:
            any_mass = True
        ratio = J / M if M > 0.0 else 0.0
        hodge_terms = {
            "harmonic_baseline": (cfg.gamma / 2.0) ** M_DIM
            * lp_norm_on_ball(gradu, cfg.p, outer),
            "grad_part": lp_norm_on_ball(grad_f, cfg.p, inner),
            "rot_part": lp_norm_on_ball(grad_g, cfg.p, inner),
            "omega_p_mass": lp_norm_on_ball(omega_p_mag2, 1.0, outer),
        }
        rows.append(DecayRow(z, R, J, M, ratio, small, mass, hodge_terms))
    report = DecayReport(rows, all_small, not any_mass, cfg.p, cfg.gamma, cfg.epsilon)
    if raise_on_violation and not all_small:
        raise SmallnessViolated(
            f"scaled energy above epsilon={cfg.epsilon} on {sum(not r.smallness_ok for r in rows)} balls")
    return report


def _decay_pairs(grid: Grid, cfg: MorreyConfig):
    """Deterministic (z, R) sampling: stride lattice plus the domain center,
    radii from cfg.decay_radii filtered for fit and inner-ball coverage."""
    xs = grid.axis_centers()
    idx = np.arange(0, grid.n_cells, cfg.stride)
    centers = [(float(xs[i]), float(xs[j])) for i in idx for j in idx]
    centers.append((0.5, 0.5))  # the stride lattice never hits the midpoint
    pairs = []
    for R in cfg.decay_radii:
        if cfg.gamma * R < cfg.decay_min_inner_cells * grid.h - 1e-12:
            continue
        for z in centers:
            if (z[0] - 2.0 * R >= -1e-12 and z[0] + 2.0 * R <= 1.0 + 1e-12
                    and z[1] - 2.0 * R >= -1e-12 and z[1] + 2.0 * R <= 1.0 + 1e-12):
                pairs.append((z, R))
    pairs.sort(key=lambda zr: (zr[0][0], zr[0][1], zr[1]))
    return pairs
