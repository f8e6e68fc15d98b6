# Copyright (C) 2025-2026 The ksflow developers
#
# This file is part of ksflow
#
# It is subject to the license terms in the LICENSE file found in the top-level
# directory of this distribution.
#
# No part of ksflow, including this file, may be copied, modified,
# propagated, or distributed except according to the terms contained in the
# LICENSE file.

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ksflow.grid import Grid, GridFunction
from ksflow.operators import FiniteRankOperator, compress, sqrt_nonneg, trace

logger = logging.getLogger(__name__)

DEFAULT_WIDTHS = (1.0, 1.5)
DEFAULT_VELOCITY_MAX = 2.0
DEFAULT_CENTER_FRACTION = 0.125


@dataclass(frozen=True)
class GaussianOrbital:
    """Moving Gaussian exp(-|x-c|^2 / 2w^2 + i v.x), unit L^2 norm on R^d.

    Recipes are grid independent, so the same orbital can be sampled on
    a grid and on its refinement.
    """

    center: Tuple[float, ...]
    width: float
    velocity: Tuple[float, ...]
    amplitude: complex = 1.0

    def sample(self, grid: Grid) -> GridFunction:
        if len(self.center) != grid.d or len(self.velocity) != grid.d:
            raise ValueError("orbital dimension does not match the grid")
        exponent = np.zeros(grid.shape, dtype=complex)
        for axis in range(grid.d):
            x = grid.coordinate(axis)
            exponent = exponent - (x - self.center[axis]) ** 2 / (2.0 * self.width**2)
            exponent = exponent + 1j * self.velocity[axis] * x
        norm = (np.pi * self.width**2) ** (-grid.d / 4.0)
        return GridFunction(grid, self.amplitude * norm * np.exp(exponent))


def random_gaussian_orbitals(
    rng: np.random.Generator,
    d: int,
    L: float,
    count: int,
    widths: Sequence[float] = DEFAULT_WIDTHS,
    velocity_max: float = DEFAULT_VELOCITY_MAX,
    center_fraction: float = DEFAULT_CENTER_FRACTION,
    complex_amplitude: bool = False,
) -> List[GaussianOrbital]:
    """Gaussians with centers in [-fL, fL]^d and |v| <= velocity_max."""
    orbitals = []
    for _ in range(count):
        center = rng.uniform(-center_fraction * L, center_fraction * L, size=d)
        width = rng.uniform(*widths)
        direction = rng.normal(size=d)
        direction = direction / max(np.linalg.norm(direction), 1e-300)
        velocity = rng.uniform(0.0, velocity_max) * direction
        amplitude = 1.0
        if complex_amplitude:
            amplitude = complex(rng.normal(), rng.normal())
        orbitals.append(
            GaussianOrbital(tuple(center), float(width), tuple(velocity), amplitude)
        )
    return orbitals


@dataclass(frozen=True)
class OperatorRecipe:
    """Grid independent description of sum_i c_i |l_i><r_i|."""

    coeffs: Tuple[complex, ...]
    left: Tuple[GaussianOrbital, ...]
    right: Tuple[GaussianOrbital, ...]
    self_adjoint: bool = False

    def sample(self, grid: Grid) -> FiniteRankOperator:
        terms = [
            (c, l.sample(grid), r.sample(grid))
            for c, l, r in zip(self.coeffs, self.left, self.right)
        ]
        return FiniteRankOperator.from_terms(grid, terms, self_adjoint=self.self_adjoint)


def random_operator_recipe(
    rng: np.random.Generator,
    d: int,
    L: float,
    rank: int,
    self_adjoint: bool = False,
    **orbital_options,
) -> OperatorRecipe:
    """Random finite-rank operator built from moving Gaussians.

    Self-adjoint recipes use l = r with real coefficients.
    """
    if rank < 1:
        raise ValueError("rank must be positive")
    left = random_gaussian_orbitals(rng, d, L, rank, **orbital_options)
    if self_adjoint:
        coeffs = rng.uniform(-1.0, 1.0, size=rank).astype(complex)
        right = left
    else:
        coeffs = rng.normal(size=rank) + 1j * rng.normal(size=rank)
        right = random_gaussian_orbitals(rng, d, L, rank, **orbital_options)
    return OperatorRecipe(tuple(coeffs), tuple(left), tuple(right), self_adjoint)


def random_operator(grid: Grid, rng: np.random.Generator, rank: int = 3, **options):
    return random_operator_recipe(rng, grid.d, grid.L, rank, **options).sample(grid)


def gaussian_mixture(grid: Grid, orbitals: Sequence[GaussianOrbital], weights) -> FiniteRankOperator:
    """gamma = sum_i w_i |phi_i><phi_i| rescaled to trace one."""
    gamma = FiniteRankOperator.from_orbitals(weights, [phi.sample(grid) for phi in orbitals])
    total = trace(gamma).real
    if not total > 0:
        raise ValueError("mixture has no mass")
    return compress(gamma * (1.0 / total), tol=0.0)


def mixture_state(
    grid: Grid,
    rank: int,
    seed: int,
    widths: Sequence[float] = DEFAULT_WIDTHS,
    velocity_max: float = DEFAULT_VELOCITY_MAX,
    center_fraction: float = DEFAULT_CENTER_FRACTION,
) -> Tuple[FiniteRankOperator, FiniteRankOperator]:
    """Seeded Gaussian mixture gamma_0 and its square root kappa_0."""
    rng = np.random.default_rng(seed)
    orbitals = random_gaussian_orbitals(
        rng, grid.d, grid.L, rank, widths, velocity_max, center_fraction
    )
    weights = rng.uniform(0.5, 1.0, size=rank)
    gamma = gaussian_mixture(grid, orbitals, weights)
    kappa = sqrt_nonneg(gamma)
    logger.info("initial state: rank %d, seed %d, trace %.6f", kappa.rank, seed, trace(gamma).real)
    return gamma, kappa


def gaussian_state(grid: Grid, center=None, width: float = 1.0, velocity=None) -> FiniteRankOperator:
    """Rank-one kappa = |phi><phi| of a single normalised Gaussian."""
    center = tuple(center) if center is not None else (0.0,) * grid.d
    velocity = tuple(velocity) if velocity is not None else (0.0,) * grid.d
    phi = GaussianOrbital(center, width, velocity).sample(grid)
    return FiniteRankOperator.rank_one(phi)
