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

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from ksflow.analysis import (
    InequalityReport,
    d_dc_residual,
    free_commutation_residual,
    jacobi_residual,
    jd_residual,
    l2_rc_identity_residual,
    verify_density_estimate,
    verify_gamma_domination,
    verify_gnk,
    verify_pointwise_rho_bound,
    verify_product_estimate,
    verify_xyrc,
)
from ksflow.constants import (
    CRITICAL,
    D_DC_TOL,
    FREE_COMMUTATION_TOL,
    JACOBI_TOL,
    JD_TOL,
    LONG_RANGE,
    PICARD_MIN_NODES,
    SHORT_RANGE,
)
from ksflow.dynamics import (
    EvolutionState,
    Schedule,
    evolve,
    free_conjugation,
    picard_duhamel,
    split_step_nls,
    step_strang,
)
from ksflow.grid import Grid, GridFunction, PotentialSpec, free_propagator_symbol
from ksflow.initial_data import (
    GaussianOrbital,
    gaussian_state,
    mixture_state,
    random_gaussian_orbitals,
    random_operator_recipe,
)
from ksflow.nonlinearity import SelfInteraction, classify_range
from ksflow.operators import FiniteRankOperator, hs_norm, square
from ksflow.setup import get_threads
from ksflow.utils import format_float
from ksflow.vector_fields import boost

logger = logging.getLogger(__name__)

# grids of the verification suites
IDENTITY_GRID = (1, 1024, 32.0)
IDENTITY_GRID_2D = (2, 32, 8.0)
INEQUALITY_GRID = (1, 256, 16.0)
REFINEMENT_GRIDS_1D = ((1, 128, 16.0), (1, 256, 16.0))
REFINEMENT_GRIDS_2D = ((2, 32, 10.0), (2, 64, 10.0))

JACOBI_TIMES = (0.0, 1.0, 3.0)
JD_TIMES = (0.5, 1.0, 2.0)
FREE_COMMUTATION_TIMES = (0.5, 1.0)
POINTWISE_TIMES = (0.0, 1.0, 2.0)

# (d, spec) -> expected class
CLASSIFICATION_TABLE = (
    (3, SelfInteraction(lambda1=1.0, potential=PotentialSpec.riesz(1)), CRITICAL),
    (1, SelfInteraction(lambda2=1.0, beta=1), CRITICAL),
    (2, SelfInteraction(lambda2=1.0, beta="1/2"), CRITICAL),
    (3, SelfInteraction(lambda2=1.0, beta="1/3"), CRITICAL),
    (1, SelfInteraction(lambda2=1.0, beta=2), SHORT_RANGE),
    (2, SelfInteraction(lambda1=1.0, potential=PotentialSpec.riesz("3/2")), SHORT_RANGE),
    (1, SelfInteraction(lambda2=-1.0, beta=2), LONG_RANGE),
)


@dataclass
class SuiteResult:
    """Rows and failures of one verify suite."""

    name: str
    rows: List[Dict[str, str]] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    reports: List[InequalityReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary_rows(self) -> List[str]:
        rows = [f"suite={self.name} rows={len(self.rows)} failures={len(self.failures)}"]
        for report in self.reports:
            rows.extend(report.to_rows())
        rows.extend(f"failure={failure}" for failure in self.failures)
        return rows

    def write(self, out_dir: str) -> List[str]:
        """Writes <suite>_rows.csv and <suite>_summary.txt into out_dir."""
        os.makedirs(out_dir, exist_ok=True)
        rows_path = os.path.join(out_dir, f"{self.name}_rows.csv")
        fieldnames = sorted({key for row in self.rows for key in row})
        with open(rows_path, "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=fieldnames, restval="")
            writer.writeheader()
            writer.writerows(self.rows)
        summary_path = os.path.join(out_dir, f"{self.name}_summary.txt")
        with open(summary_path, "w") as handle:
            handle.write("\n".join(self.summary_rows()) + "\n")
        return [rows_path, summary_path]


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def _map_samples(function: Callable[[int], object], samples: int) -> list:
    threads = get_threads()
    if threads == 1:
        return [function(i) for i in range(samples)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(function, range(samples)))


def _random_pair(grid: Grid, rng: np.random.Generator):
    a = random_operator_recipe(rng, grid.d, grid.L, int(rng.integers(1, 5))).sample(grid)
    b = random_operator_recipe(rng, grid.d, grid.L, int(rng.integers(1, 5))).sample(grid)
    return a, b


def _identity_sample(index: int, seed: int, extra: List[FiniteRankOperator]) -> List[Dict[str, str]]:
    rng = _sample_rng(seed, index)
    grid = Grid(*IDENTITY_GRID)
    a, b = _random_pair(grid, rng)
    if extra:
        a = extra[index % len(extra)]
        grid = a.grid
        b = random_operator_recipe(rng, grid.d, grid.L, 2).sample(grid)
    rows = []

    def row(name, value, tol, **params):
        rows.append(
            {
                "sample": str(index),
                "identity": name,
                "residual": format_float(value),
                "tolerance": format_float(tol),
                "passed": str(value <= tol),
                **{k: str(v) for k, v in params.items()},
            }
        )

    for t in JACOBI_TIMES:
        row("jacobi", jacobi_residual(a, b, t, 0), JACOBI_TOL, t=t, d=grid.d)
    for t in JD_TIMES:
        row("j_d", jd_residual(a, t, 0), JD_TOL, t=t)
    row("d_dc", d_dc_residual(a, 0), D_DC_TOL)
    for t in FREE_COMMUTATION_TIMES:
        row("free_commutation", free_commutation_residual(a, t, 0), FREE_COMMUTATION_TOL, t=t)
    row("l2_rc", l2_rc_identity_residual(a), D_DC_TOL)
    xyrc = verify_xyrc(a, np.inf)
    row("xyrc", max(xyrc.ratio - 1.0, 0.0), xyrc.slack, s="inf")

    grid2 = Grid(*IDENTITY_GRID_2D)
    a2, b2 = _random_pair(grid2, rng)
    for axis in range(2):
        row("jacobi", jacobi_residual(a2, b2, 1.0, axis), JACOBI_TOL, t=1.0, d=2, axis=axis)
    return rows


def run_identity_suite(seed: int, samples: int, extra=None) -> SuiteResult:
    """Operator identities on seeded random operators.

    extra operators (for example a snapshot) replace the first factor in
    turn when given.
    """
    extra = list(extra or [])
    result = SuiteResult("identities")
    for rows in _map_samples(lambda i: _identity_sample(i, seed, extra), samples):
        result.rows.extend(rows)
    for r in result.rows:
        if r["passed"] != "True":
            result.failures.append(f"{r['identity']} sample={r['sample']} residual={r['residual']}")
    logger.info("identity suite: %d rows, %d failures", len(result.rows), len(result.failures))
    return result


def _random_profile(grid: Grid, rng: np.random.Generator) -> GridFunction:
    orbitals = random_gaussian_orbitals(rng, grid.d, grid.L, 2, complex_amplitude=True)
    return GridFunction(grid, sum(phi.sample(grid).values for phi in orbitals))


def _exact_sample(index: int, seed: int, extra: List[FiniteRankOperator]):
    rng = _sample_rng(seed, index)
    grid = Grid(*INEQUALITY_GRID)
    kappa = random_operator_recipe(rng, grid.d, grid.L, int(rng.integers(1, 5))).sample(grid)
    if extra:
        kappa = extra[index % len(extra)]
        grid = kappa.grid
    entries = [verify_xyrc(kappa, s) for s in (4.0, np.inf)]
    entries += [verify_gamma_domination(kappa, s) for s in (4.0, np.inf)]
    entries += [verify_pointwise_rho_bound(kappa, t) for t in POINTWISE_TIMES]
    f = _random_profile(grid, rng)
    entries += [verify_product_estimate(f, kappa, p, s) for p, s in ((np.inf, 2.0), (4.0, 4.0))]
    return entries


def _refinement_sample(index: int, seed: int):
    rng = _sample_rng(seed, 10**6 + index)
    entries = []
    for grids, s, b in ((REFINEMENT_GRIDS_1D, np.inf, 1), (REFINEMENT_GRIDS_2D, 4.0, 1)):
        d, _, L = grids[0]
        recipe = random_operator_recipe(rng, d, L, int(rng.integers(1, 5)))
        partner = random_operator_recipe(rng, d, L, int(rng.integers(1, 5)))
        for refined, spec in enumerate(grids):
            grid = Grid(*spec)
            kappa, other = recipe.sample(grid), partner.sample(grid)
            density = verify_density_estimate(kappa, other, 2.0, 4.0, 4.0)
            density.params["d"] = d
            entries.append((refined, verify_gnk(kappa, 2.0, s, b)))
            entries.append((refined, density))
    return entries


def run_inequality_suite(seed: int, samples: int, extra=None) -> SuiteResult:
    """Exact inequalities plus refinement stability of the up-to-constant ones."""
    extra = list(extra or [])
    result = SuiteResult("inequalities")
    reports: Dict[str, InequalityReport] = {}

    def report_for(entry):
        key = entry.name
        if not entry.exact:
            key = f"{entry.name}_d{entry.params.get('d', '')}"
        if key not in reports:
            reports[key] = InequalityReport(key, exact=entry.exact)
        return reports[key]

    for entries in _map_samples(lambda i: _exact_sample(i, seed, extra), samples):
        for entry in entries:
            report_for(entry).add(entry)
            result.rows.append(entry.to_row())
    for entries in _map_samples(lambda i: _refinement_sample(i, seed), samples):
        for refined, entry in entries:
            entry.params["refined"] = bool(refined)
            report_for(entry).add(entry, refined=bool(refined))
            result.rows.append(entry.to_row())

    result.reports = list(reports.values())
    for report in result.reports:
        for entry in report.violations:
            result.failures.append(f"{report.name} violated: ratio={format_float(entry.ratio)} {entry.params}")
        if not report.exact and not report.refinement_stable:
            logger.warning("%s drifts by %.3f under refinement", report.name, report.refinement_factor)
    logger.info("inequality suite: %d rows, %d failures", len(result.rows), len(result.failures))
    return result


ORACLE_TOL = 1e-6
PICARD_TOL = 1e-6
NLS_TOL_PER_UNIT_TIME = 1e-9
SYMMETRY_TOL = 1e-8
STRANG_ORDER_BAND = (1.8, 2.2)

FREE_GAUSSIAN_GRID = (1, 1024, 128.0)
FREE_GAUSSIAN_SCHEDULE = Schedule(t_final=8.0, dt=0.5, record_every=2)
DYNAMICS_GRID = (1, 256, 16.0)
QUARTIC = SelfInteraction(lambda2=1.0, beta=2)
WEAK_QUARTIC = SelfInteraction(lambda2=0.05, beta=2)


def free_gaussian_closed_form(t: float) -> Dict[str, float]:
    """gamma_inf and L2r_Linf_c of the freely evolving unit Gaussian of width 1."""
    spread = 1.0 + 4.0 * t**2
    amplitude_sq = np.pi**-0.5 * spread**-0.5
    re_z = 1.0 / (2.0 * spread)
    return {"gamma_inf": amplitude_sq, "L2r_Linf_c": amplitude_sq * (np.pi / re_z) ** 0.25}


def _oracle_row(name: str, value: float, tol: float, passed: bool = None, **params) -> Dict[str, str]:
    row = {
        "oracle": name,
        "value": format_float(value),
        "tolerance": format_float(tol),
        "passed": str(value <= tol if passed is None else passed),
    }
    row.update({k: str(v) for k, v in params.items()})
    return row


def _relative_hs(a: FiniteRankOperator, b: FiniteRankOperator) -> float:
    scale_ab = max(hs_norm(a), hs_norm(b))
    return hs_norm(a - b) / scale_ab if scale_ab else 0.0


def _strang(kappa: FiniteRankOperator, spec: SelfInteraction, dt: float, steps: int):
    state = EvolutionState(kappa, 0.0, dt)
    for _ in range(steps):
        state = step_strang(state, spec)
    return state.kappa


def free_gaussian_oracle() -> List[Dict[str, str]]:
    """Free evolution of a centred Gaussian against its closed form."""
    grid = Grid(*FREE_GAUSSIAN_GRID)
    trajectory = evolve(gaussian_state(grid), SelfInteraction.free(), FREE_GAUSSIAN_SCHEDULE)
    rows = []
    for record in trajectory.series.rows:
        exact = free_gaussian_closed_form(record["t"])
        for column, expected in exact.items():
            error = abs(record[column] - expected) / expected
            rows.append(_oracle_row("free_gaussian", error, ORACLE_TOL, column=column, t=record["t"]))
    return rows


def nls_oracle(dt: float = 1e-2, steps: int = 100) -> List[Dict[str, str]]:
    """Rank one kappa = |psi><psi| follows the scalar equation for psi."""
    grid = Grid(*DYNAMICS_GRID)
    psi0 = GaussianOrbital((0.0,), 1.0, (1.0,)).sample(grid)
    kappa = _strang(FiniteRankOperator.rank_one(psi0), QUARTIC, dt, steps)
    psi = split_step_nls(psi0, QUARTIC, dt, steps)
    error = _relative_hs(kappa, FiniteRankOperator.rank_one(psi))
    T = dt * steps
    return [_oracle_row("nls", error, NLS_TOL_PER_UNIT_TIME * T, t=T)]


def picard_oracle(
    T: float = 0.05, n_iter: int = 6, dt: float = 1e-4, n_nodes: int = PICARD_MIN_NODES
) -> List[Dict[str, str]]:
    """Duhamel iterates against the Strang scheme for small data."""
    grid = Grid(*DYNAMICS_GRID)
    kappa0 = gaussian_state(grid, velocity=(0.5,))
    picard = picard_duhamel(kappa0, WEAK_QUARTIC, T, n_iter, n_nodes)
    strang = _strang(kappa0, WEAK_QUARTIC, dt, int(round(T / dt)))
    return [_oracle_row("picard_strang", _relative_hs(picard, strang), PICARD_TOL, T=T, n_iter=n_iter)]


def richardson_oracle(T: float = 0.5, dt: float = 0.02) -> List[Dict[str, str]]:
    """Observed order of the Strang scheme from three halvings of dt."""
    grid = Grid(*DYNAMICS_GRID)
    kappa0 = gaussian_state(grid, velocity=(1.0,))
    runs = [_strang(kappa0, QUARTIC, dt / 2**k, int(round(T * 2**k / dt))) for k in range(3)]
    coarse = hs_norm(runs[0] - runs[1])
    fine = hs_norm(runs[1] - runs[2])
    order = float(np.log2(coarse / fine))
    lo, hi = STRANG_ORDER_BAND
    return [_oracle_row("strang_order", order, hi, passed=lo <= order <= hi, T=T, dt=dt)]


def classification_oracle() -> List[Dict[str, str]]:
    rows = []
    for d, spec, expected in CLASSIFICATION_TABLE:
        label = classify_range(spec, d)
        rows.append(
            _oracle_row(
                "classify_range",
                0.0 if label == expected else 1.0,
                0.0,
                d=d,
                interaction=spec,
                expected=expected,
                got=label,
            )
        )
    return rows


def _boost_sample(index: int, seed: int) -> List[Dict[str, str]]:
    # alpha_t commutes with the Galilean boost
    rng = _sample_rng(seed, index)
    grid = Grid(*IDENTITY_GRID)
    kappa = random_operator_recipe(rng, 1, grid.L, 2).sample(grid)
    v = (8.0 * np.pi / grid.L,)
    rows = []
    for t in (0.5, 1.0):
        lhs = free_conjugation(boost(kappa, v, 0.0), t)
        rhs = boost(free_conjugation(kappa, t), v, t)
        rows.append(_oracle_row("galilean_boost", _relative_hs(lhs, rhs), SYMMETRY_TOL, sample=index, t=t))
    return rows


def nonlinear_boost_oracle(index: int, seed: int, steps: int = 20, dt: float = 1e-2) -> List[Dict[str, str]]:
    """Boost then evolve against evolve then boost under the quartic flow."""
    rng = _sample_rng(seed, index)
    grid = Grid(*DYNAMICS_GRID)
    _, kappa = mixture_state(grid, 2, int(rng.integers(2**31)))
    v = (4.0 * np.pi / grid.L,)
    T = dt * steps
    lhs = _strang(boost(kappa, v, 0.0), QUARTIC, dt, steps)
    rhs = boost(_strang(kappa, QUARTIC, dt, steps), v, T)
    return [_oracle_row("galilean_boost_nonlinear", _relative_hs(lhs, rhs), ORACLE_TOL, sample=index, t=T)]


def _root_gauge_sample(index: int, seed: int, steps: int = 20, dt: float = 1e-2) -> List[Dict[str, str]]:
    # kappa and U kappa share gamma, and so do their evolutions
    rng = _sample_rng(seed, index)
    grid = Grid(*DYNAMICS_GRID)
    _, kappa = mixture_state(grid, 2, int(rng.integers(2**31)))
    unitary = grid.apply_symbol(kappa.left, free_propagator_symbol(grid, 0.3))
    rotated = FiniteRankOperator(grid, kappa.coeffs, unitary, kappa.right)
    rows = [
        _oracle_row(
            "root_gauge", _relative_hs(square(kappa), square(rotated)), SYMMETRY_TOL, sample=index, t=0.0
        )
    ]
    gamma = square(_strang(kappa, QUARTIC, dt, steps))
    gamma_rotated = square(_strang(rotated, QUARTIC, dt, steps))
    rows.append(
        _oracle_row(
            "root_gauge", _relative_hs(gamma, gamma_rotated), SYMMETRY_TOL, sample=index, t=dt * steps
        )
    )
    return rows


def run_oracle_suite(seed: int, samples: int, extra=None) -> SuiteResult:
    """Closed-form and cross-scheme checks of the dynamics."""
    result = SuiteResult("dynamics-oracles")
    result.rows.extend(free_gaussian_oracle())
    result.rows.extend(nls_oracle())
    result.rows.extend(picard_oracle())
    result.rows.extend(richardson_oracle())
    result.rows.extend(classification_oracle())

    def sample(i):
        return _boost_sample(i, seed) + nonlinear_boost_oracle(i, seed) + _root_gauge_sample(i, seed)

    for rows in _map_samples(sample, samples):
        result.rows.extend(rows)
    for kappa in extra or []:
        # snapshot operators: boost covariance on their own grid
        v = (8.0 * np.pi / kappa.grid.L,) * kappa.grid.d
        error = _relative_hs(free_conjugation(boost(kappa, v, 0.0), 1.0), boost(free_conjugation(kappa, 1.0), v, 1.0))
        result.rows.append(_oracle_row("galilean_boost", error, SYMMETRY_TOL, sample="snapshot", t=1.0))
    for r in result.rows:
        if r["passed"] != "True":
            result.failures.append(f"{r['oracle']} value={r['value']} tolerance={r['tolerance']}")
    logger.info("oracle suite: %d rows, %d failures", len(result.rows), len(result.failures))
    return result


SUITE_RUNNERS = {
    "identities": run_identity_suite,
    "inequalities": run_inequality_suite,
    "dynamics-oracles": run_oracle_suite,
}


def run_suite(name: str, seed: int, samples: int, extra=None) -> SuiteResult:
    try:
        runner = SUITE_RUNNERS[name]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}, expected one of {sorted(SUITE_RUNNERS)}") from None
    return runner(seed, samples, extra)
