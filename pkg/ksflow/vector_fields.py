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

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ksflow.grid import Grid, GridFunction
from ksflow.operators import (
    FiniteRankOperator,
    compress,
    hs_norm,
    schatten_norm,
)

logger = logging.getLogger(__name__)

MAX_ORDER = 2


@dataclass(frozen=True)
class VectorFieldContext:
    """Time and multi-index of a vector-field application, |alpha| <= 2."""

    t: float
    alpha: Tuple[int, ...]

    def __post_init__(self):
        alpha = tuple(int(a) for a in self.alpha)
        if any(a < 0 for a in alpha):
            raise ValueError("multi-index entries must be non-negative")
        if sum(alpha) > MAX_ORDER:
            raise ValueError(f"multi-index order above {MAX_ORDER}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "t", float(self.t))

    @property
    def order(self) -> int:
        return sum(self.alpha)


def multi_indices(d: int, s: int) -> List[Tuple[int, ...]]:
    """All alpha in N^d with |alpha| <= s, ordered by |alpha|."""
    indices = [a for a in itertools.product(range(s + 1), repeat=d) if sum(a) <= s]
    return sorted(indices, key=lambda a: (sum(a), tuple(-x for x in a)))


def j_values(grid: Grid, values: np.ndarray, t: float, axis: int) -> np.ndarray:
    """(x_l - 2 t p_l) applied to a stack of orbitals, p = -i grad."""
    momentum = grid.apply_symbol(values, grid.wavenumber(axis))
    return grid.coordinate(axis) * values - 2.0 * t * momentum


def j_apply(phi: GridFunction, t: float, axis: int) -> GridFunction:
    """j_l phi for one orbital."""
    if not 0 <= axis < phi.grid.d:
        raise ValueError(f"axis {axis} outside a {phi.grid.d}-dimensional grid")
    return GridFunction(phi.grid, j_values(phi.grid, phi.values, t, axis))


def derivative_values(grid: Grid, values: np.ndarray, axis: int) -> np.ndarray:
    return grid.apply_symbol(values, 1j * grid.wavenumber(axis))


def J_commutator(kappa: FiniteRankOperator, t: float, axis: int, compress_tol=None):
    """[j_l, kappa] with j_l = x_l - 2 t p_l."""
    grid = kappa.grid
    result = FiniteRankOperator(
        grid,
        np.concatenate([kappa.coeffs, -kappa.coeffs]),
        np.concatenate([j_values(grid, kappa.left, t, axis), kappa.left]),
        np.concatenate([kappa.right, j_values(grid, kappa.right, t, axis)]),
    )
    return compress(result, tol=compress_tol, rank_max=2 * max(kappa.rank, 1))


def D_commutator(kappa: FiniteRankOperator, axis: int, compress_tol=None):
    """Kernel derivative (d_{x_l} + d_{y_l}) kappa(x, y), i.e. [d_l, kappa]."""
    grid = kappa.grid
    result = FiniteRankOperator(
        grid,
        np.concatenate([kappa.coeffs, kappa.coeffs]),
        np.concatenate([derivative_values(grid, kappa.left, axis), kappa.left]),
        np.concatenate([kappa.right, derivative_values(grid, kappa.right, axis)]),
    )
    return compress(result, tol=compress_tol, rank_max=2 * max(kappa.rank, 1))


def apply_multi_index(kappa: FiniteRankOperator, context: VectorFieldContext, field: str = "J"):
    """J^alpha kappa (field 'J') or D^alpha kappa (field 'D')."""
    if len(context.alpha) != kappa.grid.d:
        raise ValueError("multi-index length must equal the dimension")
    result = kappa
    for axis, power in enumerate(context.alpha):
        for _ in range(power):
            if field == "J":
                result = J_commutator(result, context.t, axis)
            elif field == "D":
                result = D_commutator(result, axis)
            else:
                raise ValueError(f"unknown vector field {field!r}")
    return result


def derived_family(
    kappa: FiniteRankOperator, s: int, t: Optional[float] = None
) -> Dict[Tuple[int, ...], FiniteRankOperator]:
    """J^alpha kappa (or D^alpha kappa when t is None) for all |alpha| <= s.

    Each operator is obtained from a lower one by a single application.
    """
    d = kappa.grid.d
    family = {(0,) * d: kappa}
    for alpha in multi_indices(d, s):
        if alpha in family:
            continue
        axis = next(k for k, a in enumerate(alpha) if a > 0)
        lower = list(alpha)
        lower[axis] -= 1
        parent = family[tuple(lower)]
        if t is None:
            family[alpha] = D_commutator(parent, axis)
        else:
            family[alpha] = J_commutator(parent, t, axis)
    return family


def weighted_norm_W(kappa: FiniteRankOperator, s: int, t: float) -> float:
    """sum over |alpha| <= s of ||J_t^alpha kappa||_{I^2}."""
    return float(sum(hs_norm(op) for op in derived_family(kappa, s, t).values()))


def weighted_norm_V(kappa: FiniteRankOperator, s: int) -> float:
    """sum over |alpha| <= s of ||D^alpha kappa||_{I^2}."""
    return float(sum(hs_norm(op) for op in derived_family(kappa, s).values()))


def homogeneous_norm(kappa: FiniteRankOperator, b: int, t: Optional[float] = None) -> float:
    """sum over |alpha| = b of ||J^alpha kappa|| (or D^alpha when t is None)."""
    family = derived_family(kappa, b, t)
    return float(sum(hs_norm(op) for alpha, op in family.items() if sum(alpha) == b))


def gauge_phase(grid: Grid, t: float) -> np.ndarray:
    if t == 0:
        raise ValueError("the gauge transform is undefined at t = 0")
    return np.exp(-1j * grid.radius_squared() / (4.0 * t))


def gauge_conjugate(kappa: FiniteRankOperator, t: float) -> FiniteRankOperator:
    """U_t kappa U_t* with U_t = multiplication by e^{-i|x|^2/4t}.

    Its inverse is gauge_conjugate(., -t).
    """
    phase = gauge_phase(kappa.grid, t)
    return kappa.map_orbitals(lambda values: phase * values)


def boost(kappa: FiniteRankOperator, v: Sequence[float], t: float) -> FiniteRankOperator:
    """Galilean boost: orbitals phi -> e^{i v.x} phi(x - 2 v t).

    The phase is periodic on the box only for v on the wavenumber lattice.
    """
    grid = kappa.grid
    v = np.broadcast_to(np.asarray(v, dtype=float), (grid.d,))
    lattice = v / (np.pi / grid.L)
    if not np.allclose(lattice, np.round(lattice), atol=1e-12):
        logger.warning("boost velocity %s is off the wavenumber lattice", v)
    phase = np.ones(grid.shape, dtype=complex)
    for axis in range(grid.d):
        phase = phase * np.exp(1j * v[axis] * grid.coordinate(axis))
    shift = grid.shift_symbol(2.0 * v * t)
    return kappa.map_orbitals(lambda values: phase * grid.apply_symbol(values, shift))


def japanese_bracket(grid: Grid, b: float) -> np.ndarray:
    """<x>^b = (1 + |x|^2)^(b/2)."""
    return (1.0 + grid.radius_squared()) ** (b / 2.0)


def weight_x_norm(kappa: FiniteRankOperator, b: float) -> float:
    """||<x>^b kappa||_{I^2}."""
    return hs_norm(kappa.left_multiply(japanese_bracket(kappa.grid, b)))


def weight_grad_norm(kappa: FiniteRankOperator, b: float) -> float:
    """||<grad>^b kappa||_{I^2}."""
    grid = kappa.grid
    symbol = (1.0 + grid.ksq) ** (b / 2.0)
    weighted = FiniteRankOperator(
        grid, kappa.coeffs, grid.apply_symbol(kappa.left, symbol), kappa.right
    )
    return hs_norm(weighted)


def gamma_weight_trace_norm(gamma: FiniteRankOperator, b: float) -> float:
    """||<x>^b gamma <x>^b||_{I^1}."""
    weight = japanese_bracket(gamma.grid, b)
    return schatten_norm(gamma.left_multiply(weight).right_multiply(weight), 1)
