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
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import lagrange

from ksflow.constants import (
    APRIORI_MIN_REFERENCE_TIME,
    APRIORI_RATIO_BOUND,
    BOUNDARY_MASS_LIMIT,
    DIVERGENCE_FACTOR,
    NORM_SERIES_COLUMNS,
    PICARD_MIN_NODES,
    ZERO_SCALE,
)
from ksflow.errors import DivergenceError, MonitorAlarm, NumericalFailure
from ksflow.grid import Grid, GridFunction, boundary_mass, free_propagator_symbol
from ksflow.nonlinearity import SelfInteraction, dg_values, g_values, interaction_energy
from ksflow.operators import (
    FiniteRankOperator,
    add_all,
    compress,
    den_values,
    density_values_of_square,
    gamma_local_norm,
    gram,
    hs_inner,
    hs_norm,
    local_norm_rc,
    multiplication_commutator,
    scale,
    singular_values,
    square,
)
from ksflow.utils import dyadic_times, ensure_finite, format_float, relative_difference
from ksflow.vector_fields import J_commutator, derivative_values, derived_family

logger = logging.getLogger(__name__)

SPECTRUM_SIZE = 3


class NormSeries:
    """Monitored norms at record times, one row per time.

    Rows are dictionaries keyed by NORM_SERIES_COLUMNS; times increase
    strictly and every entry is finite.
    """

    columns = NORM_SERIES_COLUMNS

    def __init__(self, rows: Optional[List[Dict[str, float]]] = None) -> None:
        self.rows: List[Dict[str, float]] = []
        for row in rows or []:
            self.append(row)

    def append(self, row: Dict[str, float]) -> None:
        missing = set(self.columns) - set(row)
        if missing:
            raise ValueError(f"row misses columns {sorted(missing)}")
        values = {name: float(row[name]) for name in self.columns}
        if not all(np.isfinite(v) for v in values.values()):
            raise NumericalFailure(f"non-finite monitor value at t={values['t']}")
        if self.rows and not values["t"] > self.rows[-1]["t"]:
            raise ValueError("record times must increase strictly")
        self.rows.append(values)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"unknown column {name!r}")
        return np.array([row[name] for row in self.rows])

    def last(self) -> Dict[str, float]:
        return self.rows[-1]

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([format_float(row[name]) for name in self.columns])

    @classmethod
    def from_csv(cls, path: str) -> "NormSeries":
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            return cls([{k: float(v) for k, v in row.items()} for row in reader])

    def __str__(self) -> str:
        return str({"rows": len(self.rows), "columns": list(self.columns)})


@dataclass
class Schedule:
    """Time stepping plan.

    record_every counts steps; dyadic snapshots are taken at
    dyadic_start * 2^k up to t_final.
    """

    t_final: float
    dt: float = 1e-3
    record_every: int = 100
    dyadic_snapshots: bool = False
    dyadic_start: float = 1.25

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")

    def n_steps(self, t0: float = 0.0) -> int:
        steps = int(round((self.t_final - t0) / self.dt))
        if steps < 0:
            raise ValueError("start time lies after t_final")
        return steps

    def snapshot_steps(self, t0: float = 0.0) -> Dict[int, float]:
        """Step index -> snapshot time for the dyadic schedule."""
        if not self.dyadic_snapshots:
            return {}
        steps = {}
        for t in dyadic_times(self.dyadic_start, self.t_final):
            step = int(round((t - t0) / self.dt))
            if step > 0:
                steps[step] = t
        return steps


@dataclass
class EvolutionState:
    kappa: FiniteRankOperator
    t: float
    dt: float
    monitors: NormSeries = field(default_factory=NormSeries)


@dataclass
class Trajectory:
    """Result of evolve.

    Attributes
    ----------
    series : NormSeries
        monitors at record times
    final : EvolutionState
        state at t_final
    snapshots : dict
        time -> kappa at the dyadic snapshot times
    spectra : list
        (t, leading eigenvalues of gamma) at record times
    spec : SelfInteraction
        the interaction the run used
    """

    series: NormSeries
    final: EvolutionState
    snapshots: Dict[float, FiniteRankOperator]
    spectra: List[Tuple[float, np.ndarray]]
    spec: SelfInteraction


def free_conjugation(kappa: FiniteRankOperator, t: float) -> FiniteRankOperator:
    """alpha_t(kappa) = e^{i t Delta} kappa e^{-i t Delta}."""
    if t == 0:
        return kappa
    grid = kappa.grid
    symbol = free_propagator_symbol(grid, t)
    return kappa.map_orbitals(lambda values: grid.apply_symbol(values, symbol))


def profile(kappa: FiniteRankOperator, t: float) -> FiniteRankOperator:
    """Interaction picture alpha_{-t}(kappa(t))."""
    return free_conjugation(kappa, -t)


def kinetic_energy(kappa: FiniteRankOperator) -> float:
    """Tr(-Delta kappa* kappa)."""
    grid = kappa.grid
    if kappa.rank == 0:
        return 0.0
    core = np.conj(kappa.coeffs)[:, None] * gram(kappa.left, kappa.left, grid) * kappa.coeffs[None, :]
    gradient = np.zeros_like(core)
    for axis in range(grid.d):
        derived = derivative_values(grid, kappa.right, axis)
        gradient = gradient + gram(derived, derived, grid)
    return float(np.real(np.sum(core * gradient.T)))


def energy(kappa: FiniteRankOperator, spec: SelfInteraction) -> float:
    """E = Tr(-Delta gamma) + G(rho_gamma) with gamma = kappa* kappa."""
    rho = GridFunction(kappa.grid, density_values_of_square(kappa))
    return kinetic_energy(kappa) + interaction_energy(spec, rho)


def _propagate(values: np.ndarray, grid: Grid, symbol: np.ndarray) -> np.ndarray:
    return grid.apply_symbol(values, symbol)


def step_strang(state: EvolutionState, spec: SelfInteraction, dt: Optional[float] = None):
    """One Strang step: half free step, potential phase, half free step.

    The potential phase e^{-i g(rho) dt} uses rho_{kappa* kappa} after the
    first half step and multiplies both orbital families, which keeps the
    step a unitary conjugation.
    """
    dt = state.dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be positive")
    kappa = state.kappa
    grid = kappa.grid
    half = free_propagator_symbol(grid, 0.5 * dt)
    symmetric = kappa.has_symmetric_terms()

    left = _propagate(kappa.left, grid, half)
    right = left if symmetric else _propagate(kappa.right, grid, half)
    if not spec.is_free:
        midpoint = FiniteRankOperator(grid, kappa.coeffs, left, right)
        potential = g_values(spec, grid, density_values_of_square(midpoint))
        phase = np.exp(-1j * dt * potential)
        left = phase * left
        right = left if symmetric else phase * right
    left = _propagate(left, grid, half)
    right = left if symmetric else _propagate(right, grid, half)

    try:
        ensure_finite(left, "left orbitals")
        ensure_finite(right, "right orbitals")
    except NumericalFailure:
        logger.error("non-finite orbitals at t=%.6g", state.t + dt)
        raise
    advanced = FiniteRankOperator(
        grid,
        kappa.coeffs,
        left,
        right,
        self_adjoint=kappa.self_adjoint,
        nonneg=kappa.nonneg,
    )
    return EvolutionState(advanced, state.t + dt, dt, state.monitors)


def split_step_nls(psi: GridFunction, spec: SelfInteraction, dt: float, steps: int) -> GridFunction:
    """Scalar Strang scheme for i d_t psi = -Delta psi + g(|psi|^2) psi."""
    grid = psi.grid
    half = free_propagator_symbol(grid, 0.5 * dt)
    values = psi.values.astype(complex)
    for _ in range(steps):
        values = grid.apply_symbol(values, half)
        values = np.exp(-1j * dt * g_values(spec, grid, np.abs(values) ** 2)) * values
        values = grid.apply_symbol(values, half)
    return GridFunction(grid, values)


def _j_energy(kappa: FiniteRankOperator, t: float) -> float:
    return 0.5 * sum(hs_norm(J_commutator(kappa, t, axis)) ** 2 for axis in range(kappa.grid.d))


def _commutation_rate(kappa: FiniteRankOperator, t: float, spec: SelfInteraction) -> float:
    # sum_l Im <J_l kappa, [dg(rho) rho_{J_l gamma}, kappa]>
    if spec.is_free:
        return 0.0
    grid = kappa.grid
    gamma = square(kappa)
    rho = density_values_of_square(kappa)
    rate = 0.0
    for axis in range(grid.d):
        rho_j = den_values(J_commutator(gamma, t, axis))
        force = dg_values(spec, grid, rho, rho_j)
        rate += hs_inner(J_commutator(kappa, t, axis), multiplication_commutator(force, kappa)).imag
    return float(rate)


def commutation_residual(previous: EvolutionState, state: EvolutionState, spec: SelfInteraction) -> float:
    """Mismatch of d/dt (1/2) sum_l ||J_l kappa||^2 and its predicted rate.

    The derivative is a difference quotient between the two states, the
    rate a trapezoidal average of both ends. Normalised by the larger side,
    absolute when both sides vanish. Without interaction the rate is zero
    and the residual is the absolute derivative.
    """
    if not state.t > previous.t:
        raise ValueError("states must be ordered in time")
    lhs = (_j_energy(state.kappa, state.t) - _j_energy(previous.kappa, previous.t)) / (
        state.t - previous.t
    )
    if spec.is_free:
        return abs(lhs)
    rhs = 0.5 * (
        _commutation_rate(previous.kappa, previous.t, spec)
        + _commutation_rate(state.kappa, state.t, spec)
    )
    return relative_difference(lhs, rhs, ZERO_SCALE)


def _monitor_row(state, spec, previous, previous_profile):
    kappa, t = state.kappa, state.t
    grid = kappa.grid
    rho = density_values_of_square(kappa)
    family = derived_family(kappa, 2, t)
    norms = {alpha: hs_norm(op) for alpha, op in family.items()}
    current_profile = profile(kappa, t)
    row = {
        "t": t,
        "trace": grid.cell_volume * float(np.sum(rho)),
        "energy": energy(kappa, spec),
        "hs_norm": norms[(0,) * grid.d],
        "W1": sum(v for a, v in norms.items() if sum(a) <= 1),
        "W2": sum(norms.values()),
        "L2r_Linf_c": local_norm_rc(kappa, 2, np.inf),
        "gamma_inf": gamma_local_norm(square(kappa), np.inf),
        "boundary_mass": boundary_mass(GridFunction(grid, rho)),
        "scat_residual": 0.0,
        "commut_residual": 0.0,
    }
    if previous is not None:
        row["scat_residual"] = hs_norm(current_profile - previous_profile)
        row["commut_residual"] = commutation_residual(previous, state, spec)
    return row, current_profile


def evolve(
    kappa0: FiniteRankOperator,
    spec: SelfInteraction,
    schedule: Schedule,
    t0: float = 0.0,
    on_snapshot: Optional[Callable[[float, FiniteRankOperator], None]] = None,
    boundary_limit: Optional[float] = BOUNDARY_MASS_LIMIT,
) -> Trajectory:
    """Runs the Strang scheme and evaluates all monitors at record times.

    Raises
    ------
    MonitorAlarm
        if the boundary mass exceeds boundary_limit
    NumericalFailure
        on non-finite values
    """
    state = EvolutionState(kappa0, float(t0), schedule.dt)
    n_steps = schedule.n_steps(t0)
    snapshot_steps = schedule.snapshot_steps(t0)
    snapshots: Dict[float, FiniteRankOperator] = {}
    spectra: List[Tuple[float, np.ndarray]] = []
    progress_every = max(n_steps // 10, 1)

    def record(previous, previous_profile):
        row, current_profile = _monitor_row(state, spec, previous, previous_profile)
        if boundary_limit is not None and row["boundary_mass"] > boundary_limit:
            logger.warning("boundary mass %.3e at t=%.6g", row["boundary_mass"], state.t)
            raise MonitorAlarm(
                f"boundary mass {row['boundary_mass']:.3e} above {boundary_limit:.1e} at t={state.t:.6g}"
            )
        state.monitors.append(row)
        eigenvalues = singular_values(state.kappa)[:SPECTRUM_SIZE] ** 2
        spectra.append((state.t, eigenvalues))
        return state, current_profile

    logger.info("evolving %d steps of dt=%g from t=%g", n_steps, schedule.dt, t0)
    last_recorded, last_profile = record(None, None)
    for step in range(1, n_steps + 1):
        state = step_strang(state, spec)
        state.t = t0 + step * schedule.dt
        if step % schedule.record_every == 0 or step == n_steps:
            last_recorded, last_profile = record(last_recorded, last_profile)
        if step in snapshot_steps:
            snapshots[snapshot_steps[step]] = state.kappa
            if on_snapshot is not None:
                on_snapshot(state.t, state.kappa)
        if step % progress_every == 0:
            logger.info("t=%.4g (%d%%)", state.t, 100 * step // n_steps)

    return Trajectory(state.monitors, state, snapshots, spectra, spec)


def _integration_matrix(n_nodes: int, T: float) -> Tuple[np.ndarray, np.ndarray]:
    # rows: integral from 0 to each node and to T of the Lagrange basis
    reference, _ = leggauss(n_nodes)
    ends = np.append(reference, 1.0)
    matrix = np.empty((n_nodes + 1, n_nodes))
    for j in range(n_nodes):
        unit = np.zeros(n_nodes)
        unit[j] = 1.0
        antiderivative = lagrange(reference, unit).integ()
        matrix[:, j] = antiderivative(ends) - antiderivative(-1.0)
    return 0.5 * T * (reference + 1.0), 0.5 * T * matrix


def _duhamel_integrand(profile_op: FiniteRankOperator, s: float, spec: SelfInteraction):
    # alpha_{-s}(-i [g(rho(s)), kappa(s)]) with kappa(s) = alpha_s(profile)
    kappa = free_conjugation(profile_op, s)
    potential = g_values(spec, kappa.grid, density_values_of_square(kappa))
    return free_conjugation(multiplication_commutator(potential, kappa, factor=-1j), -s)


def picard_iterates(
    kappa0: FiniteRankOperator, spec: SelfInteraction, T: float, n_nodes: int = PICARD_MIN_NODES
) -> Iterator[FiniteRankOperator]:
    """Successive interaction-picture Duhamel iterates at time T.

    The time integral uses Gauss-Legendre collocation on [0, T]; every
    iterate is compressed.

    Raises
    ------
    DivergenceError
        if an iterate grows beyond DIVERGENCE_FACTOR times ||kappa0||
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if n_nodes < PICARD_MIN_NODES:
        raise ValueError(f"at least {PICARD_MIN_NODES} quadrature nodes are required")
    nodes, weights = _integration_matrix(n_nodes, T)
    bound = DIVERGENCE_FACTOR * hs_norm(kappa0)
    profiles = [kappa0] * n_nodes
    while True:
        if spec.is_free:
            yield kappa0
            continue
        integrands = [_duhamel_integrand(p, s, spec) for p, s in zip(profiles, nodes)]
        updated = []
        for row in weights:
            terms = [kappa0] + [scale(F, w) for F, w in zip(integrands, row)]
            updated.append(compress(add_all(terms)))
        final = updated[-1]
        if hs_norm(final) > bound:
            raise DivergenceError(f"Picard iterate left the ball of radius {bound:.3e}")
        profiles = updated[:-1]
        yield final


def picard_duhamel(
    kappa0: FiniteRankOperator, spec: SelfInteraction, T: float, n_iter: int, n_nodes: int = PICARD_MIN_NODES
) -> FiniteRankOperator:
    """The n_iter-th iterate of the Duhamel map, returned at time T."""
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    iterates = picard_iterates(kappa0, spec, T, n_nodes)
    for k, current in enumerate(iterates, start=1):
        if k == n_iter:
            return free_conjugation(current, T)


@dataclass
class AprioriReport:
    b: int
    s_ref: float
    reference: float
    sup_ratio: float
    bounded: bool
    smallness: Optional[float]
    samples: int

    def to_rows(self) -> List[str]:
        return [
            f"apriori_b={self.b}",
            f"apriori_s_ref={format_float(self.s_ref)}",
            f"apriori_reference={format_float(self.reference)}",
            f"apriori_sup_ratio={format_float(self.sup_ratio)}",
            f"apriori_bounded={self.bounded}",
            f"apriori_smallness={'' if self.smallness is None else format_float(self.smallness)}",
            f"apriori_samples={self.samples}",
        ]


def apriori_monitor(
    series: NormSeries, b: int = 1, s_ref: float = APRIORI_MIN_REFERENCE_TIME, spec: SelfInteraction = None
) -> AprioriReport:
    """sup_{t >= s_ref} W^b(t) / W^b(s_ref) and the smallness surrogate.

    The surrogate |lambda1| W^2 + |lambda2| W^(2 beta) at s_ref is reported,
    not compared against a threshold.
    """
    if b not in (1, 2):
        raise ValueError("only W1 and W2 are monitored")
    if s_ref < APRIORI_MIN_REFERENCE_TIME:
        raise ValueError(f"reference time must be at least {APRIORI_MIN_REFERENCE_TIME}")
    times = series.column("t")
    values = series.column(f"W{b}")
    window = times >= s_ref - 1e-9
    if not np.any(window):
        raise ValueError(f"series ends before t={s_ref}")
    reference = values[window][0]
    ratio = float(np.max(values[window]) / reference)
    smallness = None
    if spec is not None:
        smallness = abs(spec.lambda1) * reference**2
        if spec.has_power:
            smallness += abs(spec.lambda2) * reference ** (2 * spec.beta_value)
    bounded = ratio <= APRIORI_RATIO_BOUND
    if not bounded:
        logger.warning("W%d grew by %.3f since t=%g", b, ratio, s_ref)
    return AprioriReport(b, float(times[window][0]), float(reference), ratio, bounded, smallness, int(np.sum(window)))
