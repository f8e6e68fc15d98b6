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


import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from ksflow.constants import NORM_SERIES_COLUMNS
from ksflow.dynamics import (
    EvolutionState,
    NormSeries,
    Schedule,
    apriori_monitor,
    commutation_residual,
    energy,
    evolve,
    free_conjugation,
    kinetic_energy,
    picard_duhamel,
    profile,
    split_step_nls,
    step_strang,
)
from ksflow.errors import MonitorAlarm, NumericalFailure
from ksflow.grid import Grid, PotentialSpec, riesz_symbol
from ksflow.initial_data import GaussianOrbital, gaussian_state, mixture_state
from ksflow.nonlinearity import SelfInteraction, evaluate_g
from ksflow.operators import FiniteRankOperator, den, hs_norm


def series_row(t, **values):
    row = {name: 0.0 for name in NORM_SERIES_COLUMNS}
    row["t"] = t
    row.update(values)
    return row


class TestFreeFlow(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 256, 32.0)
        self.kappa = gaussian_state(self.grid)
        self.free = SelfInteraction.free()

    def test_free_step_is_exact(self):
        state = EvolutionState(self.kappa, 0.0, 0.1)
        for _ in range(5):
            state = step_strang(state, self.free)
        self.assertAlmostEqual(state.t, 0.5)
        exact = free_conjugation(self.kappa, 0.5)
        self.assertLess(hs_norm(state.kappa - exact), 1e-12)
        self.assertLess(hs_norm(profile(state.kappa, 0.5) - self.kappa), 1e-12)

    def test_invalid_step(self):
        state = EvolutionState(self.kappa, 0.0, 0.1)
        self.assertRaises(ValueError, step_strang, state, self.free, -0.1)

    def test_gaussian_sup_decay(self):
        trajectory = evolve(self.kappa, self.free, Schedule(1.0, dt=0.25, record_every=1))
        series = trajectory.series
        self.assertEqual(len(series), 5)
        self.assertTrue(np.allclose(series.column("t"), [0.0, 0.25, 0.5, 0.75, 1.0]))
        expected = 1.0 / np.sqrt(np.pi * (1.0 + 4.0 * series.column("t") ** 2))
        self.assertTrue(np.allclose(series.column("gamma_inf"), expected, rtol=1e-10))
        self.assertTrue(np.allclose(series.column("trace"), 1.0, atol=1e-12))
        self.assertLess(np.max(series.column("scat_residual")), 1e-12)
        self.assertEqual(len(trajectory.spectra), 5)

    def test_kinetic_energy(self):
        moving = gaussian_state(self.grid, velocity=(1.5,))
        self.assertAlmostEqual(kinetic_energy(moving), 0.5 + 1.5**2, places=10)
        self.assertAlmostEqual(energy(moving, self.free), kinetic_energy(moving))


class TestNonlinearFlow(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 128, 16.0)
        self.spec = SelfInteraction(lambda2=1.0, beta=2)

    def test_conservation(self):
        _, kappa = mixture_state(self.grid, rank=2, seed=1, velocity_max=1.0)
        trajectory = evolve(kappa, self.spec, Schedule(0.2, dt=0.01, record_every=5))
        series = trajectory.series
        trace = series.column("trace")
        self.assertTrue(np.allclose(trace, trace[0], rtol=1e-10))
        hs = series.column("hs_norm")
        self.assertTrue(np.allclose(hs, hs[0], rtol=1e-10))
        energies = series.column("energy")
        self.assertLess(np.max(np.abs(energies - energies[0])), 1e-3 * abs(energies[0]))
        self.assertTrue(trajectory.final.kappa.nonneg)

    def test_energy_drift_is_second_order(self):
        _, kappa = mixture_state(self.grid, rank=2, seed=1, velocity_max=1.0)
        initial = energy(kappa, self.spec)
        T = 0.4
        drifts = []
        for dt in (0.02, 0.01, 0.005):
            state = EvolutionState(kappa, 0.0, dt)
            for _ in range(int(round(T / dt))):
                state = step_strang(state, self.spec)
            drifts.append(abs(energy(state.kappa, self.spec) - initial))
        for coarse, fine in zip(drifts, drifts[1:]):
            self.assertAlmostEqual(coarse / fine, 4.0, delta=0.5)

    def test_zero_mode_shift_leaves_flow_invariant(self):
        def shifted_zero_mode(grid, a):
            symbol = riesz_symbol(grid, a).copy()
            symbol.flat[0] *= 3.0
            return symbol

        grid = Grid(2, 32, 8.0)
        spec = SelfInteraction(lambda1=1.0, potential=PotentialSpec.riesz("3/2"))
        kappa = gaussian_state(grid, velocity=(0.5, -0.25))
        potential = evaluate_g(spec, den(kappa)).values
        reference = EvolutionState(kappa, 0.0, 0.05)
        for _ in range(10):
            reference = step_strang(reference, spec)
        with mock.patch("ksflow.grid.riesz_symbol", shifted_zero_mode):
            shifted_potential = evaluate_g(spec, den(kappa)).values
            shifted = EvolutionState(kappa, 0.0, 0.05)
            for _ in range(10):
                shifted = step_strang(shifted, spec)
        offset = shifted_potential - potential
        self.assertGreater(abs(np.mean(offset)), 1e-3)
        self.assertLess(np.ptp(offset), 1e-12)
        self.assertLess(hs_norm(shifted.kappa - reference.kappa), 1e-10 * hs_norm(reference.kappa))

    def test_rank_one_reduces_to_scalar_equation(self):
        phi = GaussianOrbital((0.5,), 1.0, (0.3,)).sample(self.grid)
        state = EvolutionState(FiniteRankOperator.rank_one(phi), 0.0, 0.01)
        for _ in range(50):
            state = step_strang(state, self.spec)
        psi = split_step_nls(phi, self.spec, 0.01, 50)
        difference = hs_norm(state.kappa - FiniteRankOperator.rank_one(psi))
        self.assertLess(difference, 1e-9)

    def test_boundary_alarm(self):
        phi = GaussianOrbital((12.0,), 1.0, (0.0,)).sample(self.grid)
        kappa = FiniteRankOperator.rank_one(phi)
        self.assertRaises(MonitorAlarm, evolve, kappa, self.spec, Schedule(0.1, dt=0.05))

    def test_snapshots(self):
        kappa = gaussian_state(self.grid)
        seen = []
        schedule = Schedule(0.5, dt=0.0625, record_every=4, dyadic_snapshots=True, dyadic_start=0.125)
        trajectory = evolve(kappa, self.spec, schedule, on_snapshot=lambda t, k: seen.append(t))
        self.assertEqual(sorted(trajectory.snapshots), [0.125, 0.25, 0.5])
        self.assertEqual(len(seen), 3)


class TestCommutationResidual(unittest.TestCase):
    def advance(self, kappa, spec, dt=1e-3, warmup=50):
        state = EvolutionState(kappa, 0.0, dt)
        for _ in range(warmup):
            state = step_strang(state, spec)
        return state, step_strang(state, spec)

    def test_free_flow(self):
        kappa = gaussian_state(Grid(1, 128, 16.0), velocity=(0.5,))
        free = SelfInteraction.free()
        previous, state = self.advance(kappa, free)
        self.assertLess(commutation_residual(previous, state, free), 1e-10)

    def test_power_interaction(self):
        _, kappa = mixture_state(Grid(1, 128, 16.0), rank=2, seed=1, velocity_max=1.0)
        spec = SelfInteraction(lambda2=1.0, beta=2)
        previous, state = self.advance(kappa, spec)
        self.assertLess(commutation_residual(previous, state, spec), 1e-4)

    def test_hartree_interaction(self):
        _, kappa = mixture_state(Grid(2, 32, 8.0), rank=2, seed=2, velocity_max=0.5)
        spec = SelfInteraction(lambda1=1.0, potential=PotentialSpec.riesz("3/2"))
        previous, state = self.advance(kappa, spec)
        self.assertLess(commutation_residual(previous, state, spec), 1e-4)

    def test_ordering(self):
        kappa = gaussian_state(Grid(1, 64, 8.0))
        spec = SelfInteraction(lambda2=1.0, beta=2)
        previous, state = self.advance(kappa, spec, warmup=0)
        self.assertRaises(ValueError, commutation_residual, state, previous, spec)
        self.assertRaises(ValueError, commutation_residual, state, state, spec)


class TestPicard(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 128, 16.0)
        self.kappa = gaussian_state(self.grid)

    def test_free_iterate_is_free_flow(self):
        result = picard_duhamel(self.kappa, SelfInteraction.free(), 0.5, 3)
        self.assertLess(hs_norm(result - free_conjugation(self.kappa, 0.5)), 1e-12)

    def test_weak_coupling_matches_strang(self):
        spec = SelfInteraction(lambda2=0.05, beta=2)
        picard = picard_duhamel(self.kappa, spec, 0.05, 6)
        state = EvolutionState(self.kappa, 0.0, 1e-4)
        for _ in range(500):
            state = step_strang(state, spec)
        self.assertLess(hs_norm(picard - state.kappa), 1e-6)

    def test_arguments(self):
        free = SelfInteraction.free()
        self.assertRaises(ValueError, picard_duhamel, self.kappa, free, 0.5, 0)
        self.assertRaises(ValueError, picard_duhamel, self.kappa, free, 0.5, 1, 4)
        self.assertRaises(ValueError, picard_duhamel, self.kappa, free, 0.0, 1)


class TestSchedule(unittest.TestCase):
    def test_steps(self):
        schedule = Schedule(2.0, dt=0.01)
        self.assertEqual(schedule.n_steps(), 200)
        self.assertEqual(schedule.n_steps(1.0), 100)
        self.assertRaises(ValueError, schedule.n_steps, 3.0)
        self.assertEqual(schedule.snapshot_steps(), {})

    def test_dyadic(self):
        schedule = Schedule(10.0, dt=0.25, dyadic_snapshots=True)
        self.assertEqual(schedule.snapshot_steps(), {5: 1.25, 10: 2.5, 20: 5.0, 40: 10.0})

    def test_invalid(self):
        self.assertRaises(ValueError, Schedule, 1.0, 0.0)
        self.assertRaises(ValueError, Schedule, 0.0)
        self.assertRaises(ValueError, Schedule, 1.0, 0.1, 0)


class TestNormSeries(unittest.TestCase):
    def setUp(self):
        self.series = NormSeries([series_row(0.0, W1=2.0), series_row(0.5, W1=2.5)])

    def test_validation(self):
        self.assertRaises(ValueError, self.series.append, series_row(0.5))
        self.assertRaises(ValueError, self.series.append, {"t": 1.0})
        self.assertRaises(NumericalFailure, self.series.append, series_row(1.0, W2=np.nan))
        self.assertRaises(KeyError, self.series.column, "W3")
        self.assertEqual(len(self.series), 2)

    def test_csv(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "series.csv")
            self.series.to_csv(path)
            with open(path) as handle:
                self.assertEqual(handle.readline().strip(), ",".join(NORM_SERIES_COLUMNS))
            loaded = NormSeries.from_csv(path)
        self.assertEqual(loaded.rows, self.series.rows)


class TestApriori(unittest.TestCase):
    def setUp(self):
        rows = [series_row(t, W1=3.0, W2=4.0 + 0.1 * t) for t in np.arange(0.0, 21.0, 1.0)]
        self.series = NormSeries(rows)

    def test_bounded(self):
        report = apriori_monitor(self.series, 1, 10.0)
        self.assertEqual(report.sup_ratio, 1.0)
        self.assertTrue(report.bounded)
        self.assertEqual(report.samples, 11)
        self.assertIsNone(report.smallness)

    def test_smallness(self):
        spec = SelfInteraction(lambda2=0.5, beta=2)
        report = apriori_monitor(self.series, 2, 10.0, spec)
        self.assertAlmostEqual(report.reference, 5.0)
        self.assertAlmostEqual(report.smallness, 0.5 * 5.0**4)
        self.assertAlmostEqual(report.sup_ratio, 6.0 / 5.0)

    def test_reference_time(self):
        self.assertRaises(ValueError, apriori_monitor, self.series, 1, 5.0)
        self.assertRaises(ValueError, apriori_monitor, self.series, 3, 10.0)
        self.assertRaises(ValueError, apriori_monitor, self.series, 1, 30.0)


if __name__ == "__main__":
    unittest.main()
