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
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ksflow.constants import (
    FIT_CONFIDENCE,
    FIT_MIN_SAMPLES,
    INEQUALITY_SLACK,
    POINTWISE_RHO_CONSTANT,
    POINTWISE_SLACK,
    STATED_POINTWISE_RHO_CONSTANT,
    ZERO_SCALE,
)
from ksflow.dynamics import Trajectory, free_conjugation, profile
from ksflow.grid import GridFunction, lp_norm
from ksflow.nonlinearity import SelfInteraction, g_values
from ksflow.operators import (
    FiniteRankOperator,
    adjoint,
    commutator,
    compose,
    den,
    den_values,
    density_values_of_square,
    gamma_local_norm,
    hs_norm,
    local_norm_rc,
    mixed_norm_xy,
    multiplication_commutator,
    scale,
    schatten_norm,
    square,
    to_rc,
)
from ksflow.utils import format_float
from ksflow.vector_fields import (
    D_commutator,
    J_commutator,
    gauge_conjugate,
    homogeneous_norm,
    weighted_norm_W,
)

logger = logging.getLogger(__name__)


@dataclass
class InequalityEntry:
    """One evaluation lhs <= rhs of an inequality."""

    name: str
    lhs: float
    rhs: float
    params: Dict[str, object] = field(default_factory=dict)
    exact: bool = False
    slack: float = INEQUALITY_SLACK
    extra: Dict[str, float] = field(default_factory=dict)
    flagged: bool = False

    @property
    def skipped(self) -> bool:
        # both sides vanish
        return self.lhs == 0 and self.rhs == 0

    @property
    def ratio(self) -> float:
        if self.skipped:
            return 0.0
        if self.rhs == 0:
            return np.inf
        return self.lhs / self.rhs

    @property
    def violated(self) -> bool:
        if self.flagged:
            return True
        return self.exact and not self.skipped and self.ratio > 1.0 + self.slack

    def to_row(self) -> Dict[str, str]:
        row = {
            "name": self.name,
            "lhs": format_float(self.lhs),
            "rhs": format_float(self.rhs),
            "ratio": format_float(self.ratio),
            "violated": str(self.violated),
        }
        row.update({k: str(v) for k, v in self.params.items()})
        row.update({k: format_float(v) for k, v in self.extra.items()})
        return row


@dataclass
class InequalityReport:
    """Entries of one inequality over a sample family.

    refinement_factor is max_ratio on the refined grid over max_ratio on the
    base grid, when a refinement was run.
    """

    name: str
    exact: bool = False
    entries: List[InequalityEntry] = field(default_factory=list)
    refined: List[InequalityEntry] = field(default_factory=list)

    def add(self, entry: InequalityEntry, refined: bool = False) -> None:
        (self.refined if refined else self.entries).append(entry)

    @property
    def samples(self) -> int:
        return len(self.entries)

    @staticmethod
    def _max_ratio(entries) -> float:
        ratios = [e.ratio for e in entries if not e.skipped]
        return max(ratios) if ratios else 0.0

    @property
    def max_ratio(self) -> float:
        return self._max_ratio(self.entries)

    @property
    def refinement_factor(self) -> Optional[float]:
        if not self.refined or self.max_ratio == 0:
            return None
        return self._max_ratio(self.refined) / self.max_ratio

    @property
    def violations(self) -> List[InequalityEntry]:
        return [e for e in self.entries + self.refined if e.violated]

    @property
    def refinement_stable(self) -> bool:
        factor = self.refinement_factor
        return factor is None or 0.5 <= factor <= 2.0

    def to_rows(self) -> List[str]:
        factor = self.refinement_factor
        return [
            f"inequality={self.name} exact={self.exact} samples={self.samples} "
            f"max_ratio={format_float(self.max_ratio)} violations={len(self.violations)} "
            f"refinement_factor={'' if factor is None else format_float(factor)}"
        ]


def _check_conjugate(a: float, b: float, target: float, what: str) -> None:
    inverse = lambda x: 0.0 if x == np.inf else 1.0 / x
    if abs(inverse(a) + inverse(b) - target) > 1e-12:
        raise ValueError(f"exponents of {what} do not satisfy the Hoelder relation")


def gnk_alpha(d: int, s: float, b: int) -> float:
    """alpha with alpha b = d (1/2 - 1/s), checked against the admissible range."""
    if b < 1:
        raise ValueError("b must be at least 1")
    inverse_s = 0.0 if s == np.inf else 1.0 / s
    if inverse_s > 0.5:
        raise ValueError("s must be at least 2")
    alpha = d * (0.5 - inverse_s) / b
    if alpha > 1 or (d % 2 == 0 and alpha >= 1):
        raise ValueError(f"alpha={alpha} outside the admissible range for d={d}")
    return alpha


def verify_gnk(kappa: FiniteRankOperator, t: float, s: float, b: int, variant: str = "W"):
    """||kappa||_{L^2_r L^s_c} against |t|^(-alpha b) N^alpha ||kappa||^(1-alpha).

    N is ||kappa||_{W^b} (variant 'W'), sum_{|a|=b} ||J^a kappa|| (variant
    'J') or sum_{|a|=b} ||D^a kappa|| without the time factor (variant 'V').
    """
    d = kappa.grid.d
    alpha = gnk_alpha(d, s, b)
    lhs = local_norm_rc(kappa, 2, s)
    base = hs_norm(kappa)
    if variant == "V":
        rhs = homogeneous_norm(kappa, b) ** alpha * base ** (1 - alpha)
    else:
        if t == 0 and alpha > 0:
            raise ValueError("the time-weighted variants need t != 0")
        if variant == "W":
            top = weighted_norm_W(kappa, b, t)
        elif variant == "J":
            top = homogeneous_norm(kappa, b, t)
        else:
            raise ValueError(f"unknown variant {variant!r}")
        rhs = abs(t) ** (-alpha * b) * top**alpha * base ** (1 - alpha) if alpha > 0 else base
    return InequalityEntry("gnk", lhs, rhs, {"d": d, "s": s, "b": b, "t": t, "variant": variant})


def verify_density_estimate(kappa, kappa_prime, q: float, w: float, w_prime: float):
    """||rho(kappa kappa')||_q against ||kappa||_{L^2_r L^w_c} ||kappa'||_{L^2_r L^w'_c}."""
    _check_conjugate(w, w_prime, 1.0 / q, "the density estimate")
    lhs = lp_norm(den(compose(kappa, kappa_prime)), q)
    rhs = local_norm_rc(kappa, 2, w) * local_norm_rc(kappa_prime, 2, w_prime)
    return InequalityEntry("density", lhs, rhs, {"q": q, "w": w, "w_prime": w_prime})


def verify_product_estimate(f: GridFunction, kappa: FiniteRankOperator, p: float, s: float):
    """||f kappa||_{I^2} <= ||f||_p ||kappa||_{L^2_r L^s_c}, 1/p + 1/s = 1/2."""
    _check_conjugate(p, s, 0.5, "the product estimate")
    lhs = hs_norm(kappa.left_multiply(f.values))
    rhs = lp_norm(f, p) * local_norm_rc(kappa, 2, s)
    return InequalityEntry("product", lhs, rhs, {"p": p, "s": s}, exact=True)


def verify_pointwise_rho_bound(kappa: FiniteRankOperator, t: float):
    """|rho_{J(k*k)}|^2 <= 4 rho_{Jk* Jk} rho_{k*k} on every node and axis.

    Points where the right side vanishes to 1e-12 of its maximum are only
    checked for lhs <= slack * max(rhs). The ratio against the constant 2
    is carried as the extra column stated_ratio.
    """
    grid = kappa.grid
    gamma = square(kappa)
    rho = density_values_of_square(kappa)
    worst_lhs, worst_rhs, worst_ratio, stated = 0.0, 0.0, 0.0, 0.0
    violated = False
    for axis in range(grid.d):
        rho_j = den_values(J_commutator(gamma, t, axis))
        lhs = np.abs(rho_j) ** 2
        product = density_values_of_square(J_commutator(kappa, t, axis)) * rho
        rhs = POINTWISE_RHO_CONSTANT * product
        scale_max = float(np.max(rhs)) if rhs.size else 0.0
        if scale_max == 0:
            if np.max(lhs) > 0:
                violated = True
            continue
        if np.any(lhs > rhs + POINTWISE_SLACK * scale_max):
            violated = True
        resolved = rhs > POINTWISE_SLACK * scale_max
        if np.any(resolved):
            ratios = lhs[resolved] / rhs[resolved]
            k = int(np.argmax(ratios))
            if ratios[k] > worst_ratio:
                worst_ratio = float(ratios[k])
                worst_lhs = float(lhs[resolved][k])
                worst_rhs = float(rhs[resolved][k])
            stated = max(
                stated,
                float(np.max(lhs[resolved] / (STATED_POINTWISE_RHO_CONSTANT * product[resolved]))),
            )
    return InequalityEntry(
        "pointwise_rho",
        worst_lhs,
        worst_rhs,
        {"t": t},
        exact=True,
        slack=POINTWISE_SLACK,
        extra={"stated_ratio": stated},
        flagged=violated,
    )


def verify_xyrc(kappa: FiniteRankOperator, s: float):
    """||kappa||_{L^s_x L^2_y} <= ||kappa||_{L^2_r L^s_c}, s >= 2."""
    lhs = mixed_norm_xy(kappa, s)
    rhs = local_norm_rc(kappa, 2, s)
    return InequalityEntry("xyrc", lhs, rhs, {"s": s}, exact=True)


def verify_gamma_domination(kappa: FiniteRankOperator, s: float):
    """||kappa* kappa||_(s) <= ||kappa*||^2_{L^s_x L^2_y}."""
    lhs = gamma_local_norm(square(kappa), s)
    rhs = mixed_norm_xy(adjoint(kappa), s) ** 2
    return InequalityEntry("gamma_domination", lhs, rhs, {"s": s}, exact=True)


def _relative(difference: float, *scales: float) -> float:
    scale_max = max(scales) if scales else 0.0
    if scale_max < ZERO_SCALE:
        return difference
    return difference / scale_max


def jacobi_residual(a: FiniteRankOperator, b: FiniteRankOperator, t: float, axis: int) -> float:
    """J[a, b] against [Ja, b] + [a, Jb]."""
    lhs = J_commutator(commutator(a, b), t, axis, compress_tol=0.0)
    rhs = commutator(J_commutator(a, t, axis, 0.0), b) + commutator(a, J_commutator(b, t, axis, 0.0))
    return _relative(hs_norm(lhs - rhs), hs_norm(lhs), hs_norm(rhs))


def jd_residual(kappa: FiniteRankOperator, t: float, axis: int) -> float:
    """J_t kappa against 2 i t U_t* D(U_t kappa U_t*) U_t."""
    lhs = J_commutator(kappa, t, axis, compress_tol=0.0)
    inner = D_commutator(gauge_conjugate(kappa, t), axis, compress_tol=0.0)
    rhs = scale(gauge_conjugate(inner, -t), 2j * t)
    return _relative(hs_norm(lhs - rhs), hs_norm(lhs))


def d_dc_residual(kappa: FiniteRankOperator, axis: int) -> float:
    """(r, c) kernel of D kappa against the c-derivative of the kernel of kappa."""
    derived = to_rc(D_commutator(kappa, axis, compress_tol=0.0))
    reference = to_rc(kappa).derivative_c(axis)
    difference = (derived - reference).mixed_norm(2, 2)
    return _relative(difference, derived.mixed_norm(2, 2))


def free_commutation_residual(kappa0: FiniteRankOperator, t: float, axis: int) -> float:
    """J_t alpha_t(kappa0) against alpha_t([x, kappa0])."""
    lhs = J_commutator(free_conjugation(kappa0, t), t, axis, compress_tol=0.0)
    rhs = free_conjugation(J_commutator(kappa0, 0.0, axis, compress_tol=0.0), t)
    return _relative(hs_norm(lhs - rhs), hs_norm(lhs))


def l2_rc_identity_residual(kappa: FiniteRankOperator) -> float:
    """|L^2_r L^2_c norm - Hilbert-Schmidt norm|, relative."""
    hs = hs_norm(kappa)
    return _relative(abs(local_norm_rc(kappa, 2, 2) - hs), hs)


@dataclass
class DecayFit:
    """Power-law fit value ~ C t^(-nu) on [t0, t1].

    band is the 95% confidence interval of nu.
    """

    t0: float
    t1: float
    nu: float
    band: Tuple[float, float]
    r_squared: float
    intercept: float
    samples: int

    def to_row(self) -> str:
        return (
            f"t0={format_float(self.t0)} t1={format_float(self.t1)} nu={format_float(self.nu)} "
            f"band_lo={format_float(self.band[0])} band_hi={format_float(self.band[1])} "
            f"r2={format_float(self.r_squared)} samples={self.samples}"
        )


def fit_decay(times: Sequence[float], values: Sequence[float], t0: float = 5.0, t1: float = 40.0) -> DecayFit:
    """Least-squares slope of log value against log t over [t0, t1].

    Raises
    ------
    ValueError
        on fewer than FIT_MIN_SAMPLES samples in the window, non-positive
        samples or a window not satisfying t1 > t0 >= 1
    """
    if not (t1 > t0 >= 1.0):
        raise ValueError("fit window must satisfy t1 > t0 >= 1")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    window = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
    n = int(np.sum(window))
    if n < FIT_MIN_SAMPLES:
        raise ValueError(f"{n} samples in [{t0}, {t1}], at least {FIT_MIN_SAMPLES} needed")
    if np.any(values[window] <= 0):
        raise ValueError("decay fits need positive samples")
    result = stats.linregress(np.log(times[window]), np.log(values[window]))
    nu = -result.slope
    half_width = result.stderr * stats.t.ppf(0.5 + FIT_CONFIDENCE / 2.0, n - 2)
    return DecayFit(
        float(t0),
        float(t1),
        float(nu),
        (float(nu - half_width), float(nu + half_width)),
        float(result.rvalue**2),
        float(result.intercept),
        n,
    )


@dataclass
class ScatteringResult:
    """Interaction-picture limit and its convergence diagnostics.

    Attributes
    ----------
    kappa_inf : FiniteRankOperator
        profile at the last snapshot time
    times : list
        snapshot times
    cauchy : list
        (t, ||k~(t_next) - k~(t)||) for consecutive snapshots
    residuals : list
        (t, ||kappa(t) - alpha_t(kappa_inf)||_{I^2})
    gamma_residuals : list
        (t, ||gamma(t) - alpha_t(gamma_inf)||_{I^1})
    integrand_norms : list
        (t, ||[g(rho), kappa(t)]||_{I^2}), empty without an interaction
    tail_decreasing : bool
        Cauchy differences decrease strictly
    """

    kappa_inf: FiniteRankOperator
    times: List[float]
    cauchy: List[Tuple[float, float]]
    residuals: List[Tuple[float, float]]
    gamma_residuals: List[Tuple[float, float]]
    integrand_norms: List[Tuple[float, float]]
    tail_decreasing: bool

    @property
    def relative_final_residual(self) -> float:
        scale_inf = hs_norm(self.kappa_inf)
        return self.residuals[-1][1] / scale_inf if scale_inf else 0.0

    def to_rows(self) -> List[str]:
        rows = [f"cauchy t={format_float(t)} diff={format_float(v)}" for t, v in self.cauchy]
        rows += [f"residual t={format_float(t)} value={format_float(v)}" for t, v in self.residuals]
        rows += [f"gamma_residual t={format_float(t)} value={format_float(v)}" for t, v in self.gamma_residuals]
        rows += [f"integrand t={format_float(t)} value={format_float(v)}" for t, v in self.integrand_norms]
        rows.append(f"tail_decreasing={self.tail_decreasing}")
        return rows


def scattering_extract(
    trajectory: Union[Trajectory, Mapping[float, FiniteRankOperator]],
    spec: Optional[SelfInteraction] = None,
) -> ScatteringResult:
    """Profiles alpha_{-t}(kappa(t)) at the snapshot times and their limit."""
    if isinstance(trajectory, Trajectory):
        snapshots = trajectory.snapshots
        spec = trajectory.spec if spec is None else spec
    else:
        snapshots = trajectory
    times = sorted(snapshots)
    if len(times) < 2:
        raise ValueError("scattering extraction needs at least two snapshots")

    profiles = {t: profile(snapshots[t], t) for t in times}
    cauchy = [(t, hs_norm(profiles[u] - profiles[t])) for t, u in zip(times, times[1:])]
    kappa_inf = profiles[times[-1]]
    gamma_inf = square(kappa_inf)
    residuals, gamma_residuals, integrand_norms = [], [], []
    for t in times:
        kappa = snapshots[t]
        residuals.append((t, hs_norm(kappa - free_conjugation(kappa_inf, t))))
        gamma_residuals.append((t, schatten_norm(square(kappa) - free_conjugation(gamma_inf, t), 1)))
        if spec is not None and not spec.is_free:
            potential = g_values(spec, kappa.grid, density_values_of_square(kappa))
            integrand_norms.append((t, hs_norm(multiplication_commutator(potential, kappa))))

    diffs = [v for _, v in cauchy]
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:]))
    if not decreasing:
        logger.warning("Cauchy differences of the profile do not decrease: %s", diffs)
    return ScatteringResult(
        kappa_inf, times, cauchy, residuals, gamma_residuals, integrand_norms, decreasing
    )
