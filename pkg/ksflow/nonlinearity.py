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
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from sympy import Rational

from ksflow.constants import (
    CRITICAL,
    DENSITY_NEGATIVE_TOL,
    LONG_RANGE,
    RANGE_ORDER,
    REG_FLOOR,
    SHORT_RANGE,
)
from ksflow.errors import NegativeDensityError
from ksflow.grid import Grid, GridFunction, PotentialSpec, convolve_values
from ksflow.utils import parse_rational

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelfInteraction:
    """g(rho) = lambda1 v * rho + lambda2 rho^beta.

    Attributes
    ----------
    lambda1 : float
        Hartree coupling
    potential : PotentialSpec
        pair potential v of the Hartree term
    lambda2 : float
        local coupling
    beta : Rational or None
        exponent of the local term, exact rational with denominator <= 8
    reg_floor : float
        floor of rho in derivative factors rho^(beta - k) with beta < k
    """

    lambda1: float = 0.0
    potential: PotentialSpec = field(default_factory=PotentialSpec.none)
    lambda2: float = 0.0
    beta: Optional[Rational] = None
    reg_floor: float = REG_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        if self.beta is not None:
            object.__setattr__(self, "beta", parse_rational(self.beta, "beta"))
            if not self.beta > 0:
                raise ValueError("beta must be positive")
        if self.lambda2 != 0 and self.beta is None:
            raise ValueError("a local coupling needs an exponent beta")
        if self.lambda1 != 0 and self.potential.kind == "none":
            raise ValueError("a Hartree coupling needs a potential")
        if self.reg_floor <= 0:
            raise ValueError("regularisation floor must be positive")

    @classmethod
    def free(cls) -> "SelfInteraction":
        return cls()

    @property
    def has_hartree(self) -> bool:
        return self.lambda1 != 0 and self.potential.kind != "none"

    @property
    def has_power(self) -> bool:
        return self.lambda2 != 0

    @property
    def is_free(self) -> bool:
        return not (self.has_hartree or self.has_power)

    @property
    def beta_value(self) -> float:
        return float(self.beta) if self.beta is not None else 0.0

    def __str__(self) -> str:
        return str(
            {
                "lambda1": self.lambda1,
                "potential": str(self.potential),
                "lambda2": self.lambda2,
                "beta": None if self.beta is None else str(self.beta),
            }
        )


def clean_density(values: np.ndarray) -> np.ndarray:
    """Real part of a density with round-off negatives clamped to 0.

    Raises
    ------
    NegativeDensityError
        if a value lies below -DENSITY_NEGATIVE_TOL
    """
    values = np.real(values)
    if values.size and np.min(values) < -DENSITY_NEGATIVE_TOL:
        raise NegativeDensityError(f"density reaches {np.min(values):.3e}")
    return np.clip(values, 0.0, None)


def _power(values: np.ndarray, exponent: float, floor: Optional[float]) -> np.ndarray:
    if exponent < 0 and floor is not None:
        values = np.maximum(values, floor)
    return np.power(values, exponent)


def g_values(spec: SelfInteraction, grid: Grid, rho: np.ndarray) -> np.ndarray:
    """Array form of evaluate_g."""
    rho = clean_density(rho)
    result = np.zeros(grid.shape)
    if spec.has_hartree:
        result = result + spec.lambda1 * convolve_values(grid, rho, spec.potential)
    if spec.has_power:
        result = result + spec.lambda2 * np.power(rho, spec.beta_value)
    return result


def evaluate_g(spec: SelfInteraction, rho: GridFunction) -> GridFunction:
    return GridFunction(rho.grid, g_values(spec, rho.grid, rho.values))


def dg_values(spec: SelfInteraction, grid: Grid, rho: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """dg(rho) xi; xi may be complex."""
    rho = clean_density(rho)
    xi = np.asarray(xi)
    result = np.zeros(grid.shape, dtype=np.result_type(xi, float))
    if spec.has_hartree:
        result = result + spec.lambda1 * convolve_values(grid, xi, spec.potential)
    if spec.has_power:
        beta = spec.beta_value
        factor = _power(rho, beta - 1.0, spec.reg_floor)
        result = result + spec.lambda2 * beta * factor * xi
    return result


def dg(spec: SelfInteraction, rho: GridFunction, xi: GridFunction) -> GridFunction:
    return GridFunction(rho.grid, dg_values(spec, rho.grid, rho.values, xi.values))


def d2g(spec: SelfInteraction, rho: GridFunction, xi: GridFunction, eta: GridFunction):
    """Second derivative; the Hartree part is linear and drops out."""
    values = clean_density(rho.values)
    dtype = np.result_type(xi.values, eta.values, float)
    result = np.zeros(rho.grid.shape, dtype=dtype)
    if spec.has_power:
        beta = spec.beta_value
        factor = _power(values, beta - 2.0, spec.reg_floor)
        result = result + spec.lambda2 * beta * (beta - 1.0) * factor * xi.values * eta.values
    return GridFunction(rho.grid, result)


def interaction_energy(spec: SelfInteraction, rho: GridFunction) -> float:
    """G(rho) = lambda1/2 int rho v*rho + lambda2/(beta+1) int rho^(beta+1)."""
    grid = rho.grid
    values = clean_density(rho.values)
    energy = 0.0
    if spec.has_hartree:
        potential = convolve_values(grid, values, spec.potential)
        energy += 0.5 * spec.lambda1 * grid.cell_volume * np.sum(values * potential)
    if spec.has_power:
        beta = spec.beta_value
        energy += spec.lambda2 / (beta + 1.0) * grid.cell_volume * np.sum(values ** (beta + 1.0))
    return float(energy)


def _compare(value: Rational, threshold: Rational) -> str:
    if value > threshold:
        return SHORT_RANGE
    if value == threshold:
        return CRITICAL
    return LONG_RANGE


def classify_range(spec: SelfInteraction, d: int) -> str:
    """Scaling class of the interaction; the worst component wins.

    A negative local coupling is long-range whatever its exponent.
    """
    classes = []
    if spec.has_hartree:
        if spec.potential.kind == "riesz":
            classes.append(_compare(spec.potential.a, Rational(1)))
        else:
            # a delta scales like |x|^-d
            classes.append(_compare(Rational(d), Rational(1)))
    if spec.has_power:
        classes.append(LONG_RANGE if spec.lambda2 < 0 else _compare(spec.beta, Rational(1, d)))
    if not classes:
        return SHORT_RANGE
    return max(classes, key=lambda label: RANGE_ORDER[label])


@dataclass
class AdmissibilityReport:
    """Which sufficient conditions of the global theory hold for a spec.

    Attributes
    ----------
    d : int
        dimension
    si2 : bool
        the main structural condition holds
    g_cond_beta : bool
        the wider exponent ledger holds
    pq_cond : Optional[bool]
        witness exponents satisfy 1 + 1/p - 1/q > 1/d (None without Hartree)
    witness : dict
        exponents p, q, q', q0 as exact rationals
    reasons : list
        conditions that fail
    warnings : list
        admissible only under the wider ledger, or sign caveats
    """

    d: int
    si2: bool
    g_cond_beta: bool
    pq_cond: Optional[bool]
    witness: Dict[str, Rational] = field(default_factory=dict)
    reasons: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return self.si2 or self.g_cond_beta

    def to_rows(self) -> List[str]:
        rows = [
            f"admissible={self.admissible}",
            f"si2={self.si2}",
            f"g_cond_beta={self.g_cond_beta}",
            f"pq_cond={self.pq_cond}",
        ]
        rows.extend(f"witness_{key}={value}" for key, value in sorted(self.witness.items()))
        rows.extend(f"reason={reason}" for reason in self.reasons)
        rows.extend(f"warning={warning}" for warning in self.warnings)
        return rows

    def __str__(self) -> str:
        return "\n".join(self.to_rows())


def _beta_ledger(beta: Rational, d: int) -> bool:
    if d >= 3:
        return beta >= Rational(1, 2)
    if d == 2:
        return beta > Rational(1, 2)
    return beta > 1


def check_admissibility(spec: SelfInteraction, d: int) -> AdmissibilityReport:
    """Checks the structural conditions with exact rational arithmetic."""
    reasons, warnings, witness = [], [], {}
    hartree_ok = True
    pq_cond = None

    if spec.has_hartree:
        if d == 1:
            hartree_ok = False
            reasons.append("d=1 admits no convolution term")
        elif spec.potential.kind == "riesz":
            a = spec.potential.a
            if not 1 < a < d:
                hartree_ok = False
                reasons.append(f"riesz exponent {a} outside (1, {d})")
            else:
                p, q = Rational(d), Rational(d) / (d - a + 1)
                witness.update({"p": p, "q": q, "q_prime": Rational(2), "q0": Rational(d) / (d - a)})
                pq_cond = bool(1 + 1 / p - 1 / q > Rational(1, d))
                hartree_ok = hartree_ok and pq_cond
        else:
            p = Rational(2) if d == 2 else Rational(d)
            witness.update({"p": p, "q": p})
            pq_cond = bool(1 + 1 / p - 1 / p > Rational(1, d))
            hartree_ok = hartree_ok and pq_cond

    si2 = hartree_ok
    g_cond_beta = hartree_ok
    if spec.has_power:
        beta = spec.beta
        if not beta > Rational(1, min(d, 2)):
            si2 = False
            reasons.append(f"beta={beta} not above 1/{min(d, 2)}")
        if not _beta_ledger(beta, d):
            g_cond_beta = False
            reasons.append(f"beta={beta} fails the wider exponent ledger in d={d}")
        if spec.lambda2 < 0:
            warnings.append("negative local coupling: excluded from scattering acceptance")

    if g_cond_beta and not si2:
        warnings.append("admissible only under the wider exponent ledger")
    report = AdmissibilityReport(d, si2, g_cond_beta, pq_cond, witness, reasons, warnings)
    for warning in warnings:
        logger.warning(warning)
    return report
