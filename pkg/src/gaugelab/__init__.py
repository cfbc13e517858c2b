"""Coulomb-type gauge construction and decay experiments on 2-D grids.

The package minimizes the rotation-gauge energy of a matrix potential,
certifies the divergence-free structure and norm bounds of the gauged
potential, and provides the surrounding machinery: Hodge splitting of plane
fields, two-radius decay scans, metric frames with their transformed
coefficients, and manufactured sphere-valued harmonic map problems.

Hot kernels run through a compiled extension when available; `BACKEND`
names the implementation actually loaded ("compiled" or "python").
"""

from ._kernels import BACKEND
from .errors import (ConfigError, DimensionMismatch, EmptyBall, GaugelabError,
                     NotPositiveDefinite, SmallnessViolated, SolverDiverged)
from .grid import Ball, Grid, ScalarField, VecField
from .lie import (RotationField, SkewPotential, gauge_transform,
                  identity_rotation, random_skew_potential, skew_exp,
                  validate_rotation)
from .gauge import (ELResidual, GaugeOptions, GaugeResult, energy,
                    euler_lagrange_residual, minimize, oracle_n2)
from .hodge import HodgeParts, harmonic_growth_check, hodge_decompose
from .morrey import (DecayReport, HardyProbe, MorreyConfig, decay_experiment,
                     hardy_bmo_probe, morrey_J, morrey_M)
from .frames import (FrameData, MetricData, TransformedSystem,
                     assemble_transformed_system, build_frame, builtin_metric,
                     christoffel, transformed_residual)
from .problems import (ProblemInstance, dirichlet_energy, el_residual,
                       gruter_functional, harmonic_map_s2, problem_residual)
from .pipeline import (PipelineReport, dilate_to_smallness, run_pipeline,
                       transformed_equation_residual)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "GaugelabError", "ConfigError", "DimensionMismatch", "EmptyBall",
    "NotPositiveDefinite", "SmallnessViolated", "SolverDiverged",
    "Grid", "Ball", "ScalarField", "VecField",
    "RotationField", "SkewPotential", "identity_rotation", "skew_exp",
    "gauge_transform", "validate_rotation", "random_skew_potential",
    "GaugeOptions", "GaugeResult", "ELResidual", "energy",
    "euler_lagrange_residual", "minimize", "oracle_n2",
    "HodgeParts", "hodge_decompose", "harmonic_growth_check",
    "MorreyConfig", "DecayReport", "HardyProbe", "morrey_J", "morrey_M",
    "hardy_bmo_probe", "decay_experiment",
    "MetricData", "FrameData", "TransformedSystem", "build_frame",
    "builtin_metric", "christoffel", "assemble_transformed_system",
    "transformed_residual",
    "ProblemInstance", "harmonic_map_s2", "problem_residual",
    "dirichlet_energy", "gruter_functional", "el_residual",
    "PipelineReport", "run_pipeline", "transformed_equation_residual",
    "dilate_to_smallness",
]
