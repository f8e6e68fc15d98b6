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


import unittest

import numpy as np

from ksflow.analysis import (
    InequalityEntry,
    InequalityReport,
    d_dc_residual,
    fit_decay,
    free_commutation_residual,
    gnk_alpha,
    jacobi_residual,
    jd_residual,
    l2_rc_identity_residual,
    scattering_extract,
    verify_density_estimate,
    verify_gnk,
    verify_pointwise_rho_bound,
    verify_product_estimate,
)
from ksflow.constants import D_DC_TOL, FREE_COMMUTATION_TOL, JACOBI_TOL, JD_TOL
from ksflow.dynamics import free_conjugation
from ksflow.grid import Grid
from ksflow.initial_data import gaussian_state, random_operator
from ksflow.nonlinearity import SelfInteraction
from ksflow.operators import hs_norm


class TestDecayFit(unittest.TestCase):
    def setUp(self):
        self.times = np.arange(1.0, 41.0, 1.0)

    def test_exact_power_law(self):
        fit = fit_decay(self.times, 3.0 * self.times**-1.5, 5.0, 40.0)
        self.assertAlmostEqual(fit.nu, 1.5, places=10)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=10)
        self.assertEqual(fit.samples, 36)
        self.assertLessEqual(fit.band[0], fit.nu)
        self.assertGreaterEqual(fit.band[1], fit.nu)
        self.assertIn("nu=", fit.to_row())

    def test_free_gaussian_sup(self):
        values = 1.0 / np.sqrt(np.pi * (1.0 + 4.0 * self.times**2))
        fit = fit_decay(self.times, values)
        self.assertGreater(fit.nu, 0.99)
        self.assertLess(fit.nu, 1.0)

    def test_rejected_inputs(self):
        values = self.times**-1.0
        self.assertRaises(ValueError, fit_decay, self.times, values, 5.0, 12.0)
        self.assertRaises(ValueError, fit_decay, self.times, values, 0.5, 40.0)
        self.assertRaises(ValueError, fit_decay, self.times, values, 20.0, 10.0)
        self.assertRaises(ValueError, fit_decay, self.times, values - 0.5, 5.0, 40.0)


class TestInequalityEntries(unittest.TestCase):
    def test_entry(self):
        entry = InequalityEntry("xyrc", 1.0, 2.0, {"s": 4}, exact=True)
        self.assertEqual(entry.ratio, 0.5)
        self.assertFalse(entry.violated)
        row = entry.to_row()
        self.assertEqual(row["name"], "xyrc")
        self.assertEqual(row["s"], "4")
        self.assertEqual(row["violated"], "False")

    def test_degenerate_entries(self):
        self.assertTrue(InequalityEntry("x", 0.0, 0.0, exact=True).skipped)
        self.assertFalse(InequalityEntry("x", 0.0, 0.0, exact=True).violated)
        self.assertEqual(InequalityEntry("x", 1.0, 0.0).ratio, np.inf)
        self.assertTrue(InequalityEntry("x", 1.0 + 1e-6, 1.0, exact=True).violated)
        self.assertFalse(InequalityEntry("x", 3.0, 1.0).violated)
        self.assertTrue(InequalityEntry("x", 0.1, 1.0, flagged=True).violated)

    def test_report(self):
        report = InequalityReport("gnk")
        for ratio in (0.2, 0.4):
            report.add(InequalityEntry("gnk", ratio, 1.0))
        report.add(InequalityEntry("gnk", 0.6, 1.0), refined=True)
        self.assertEqual(report.samples, 2)
        self.assertAlmostEqual(report.max_ratio, 0.4)
        self.assertAlmostEqual(report.refinement_factor, 1.5)
        self.assertTrue(report.refinement_stable)
        self.assertEqual(report.violations, [])
        self.assertIn("max_ratio=0.40000000000000002", report.to_rows()[0])

    def test_report_without_refinement(self):
        report = InequalityReport("product", exact=True)
        report.add(InequalityEntry("product", 2.0, 1.0, exact=True))
        self.assertIsNone(report.refinement_factor)
        self.assertEqual(len(report.violations), 1)


class TestVerifiers(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 128, 16.0)
        self.rng = np.random.default_rng(21)

    def test_gnk_alpha(self):
        self.assertEqual(gnk_alpha(1, np.inf, 1), 0.5)
        self.assertEqual(gnk_alpha(3, 4, 1), 0.75)
        self.assertEqual(gnk_alpha(2, np.inf, 2), 0.5)
        self.assertRaises(ValueError, gnk_alpha, 2, np.inf, 1)
        self.assertRaises(ValueError, gnk_alpha, 1, 1.5, 1)
        self.assertRaises(ValueError, gnk_alpha, 1, 4, 0)

    def test_gnk(self):
        kappa = free_conjugation(gaussian_state(self.grid), 2.0)
        for variant in ("W", "J", "V"):
            entry = verify_gnk(kappa, 2.0, np.inf, 1, variant)
            self.assertTrue(np.isfinite(entry.ratio))
            self.assertGreater(entry.ratio, 0.0)
            self.assertFalse(entry.violated)
        self.assertRaises(ValueError, verify_gnk, kappa, 0.0, np.inf, 1)
        self.assertRaises(ValueError, verify_gnk, kappa, 1.0, np.inf, 1, "Q")

    def test_product_estimate(self):
        f = self.grid.sample(lambda x: np.exp(-(x**2) / 3.0))
        for _ in range(3):
            kappa = random_operator(self.grid, self.rng, rank=2)
            for p, s in ((np.inf, 2), (4, 4)):
                self.assertFalse(verify_product_estimate(f, kappa, p, s).violated)
        self.assertRaises(ValueError, verify_product_estimate, f, kappa, 2, 2)

    def test_density_estimate(self):
        a = random_operator(self.grid, self.rng, rank=2)
        b = random_operator(self.grid, self.rng, rank=2)
        entry = verify_density_estimate(a, b, 2, 4, 4)
        self.assertGreater(entry.rhs, 0.0)
        self.assertFalse(entry.exact)
        self.assertRaises(ValueError, verify_density_estimate, a, b, 1, 4, 4)

    def test_pointwise_bound(self):
        for t in (0.0, 1.0, 2.0):
            kappa = random_operator(self.grid, self.rng, rank=3)
            entry = verify_pointwise_rho_bound(kappa, t)
            self.assertFalse(entry.violated, msg=f"t={t}")
            self.assertAlmostEqual(entry.extra["stated_ratio"], 2.0 * entry.ratio)


class TestIdentityResiduals(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 1024, 32.0)
        self.rng = np.random.default_rng(8)

    def test_jacobi(self):
        a = random_operator(self.grid, self.rng, rank=2)
        b = random_operator(self.grid, self.rng, rank=2)
        for t in (0.0, 1.0):
            self.assertLess(jacobi_residual(a, b, t, 0), JACOBI_TOL)

    def test_gauge_identity(self):
        kappa = random_operator(self.grid, self.rng, rank=2)
        for t in (0.5, 1.0):
            self.assertLess(jd_residual(kappa, t, 0), JD_TOL, msg=f"t={t}")

    def test_free_commutation(self):
        kappa = random_operator(self.grid, self.rng, rank=2)
        self.assertLess(free_commutation_residual(kappa, 1.0, 0), FREE_COMMUTATION_TOL)

    def test_kernel_identities(self):
        grid = Grid(1, 128, 16.0)
        kappa = random_operator(grid, self.rng, rank=2)
        self.assertLess(d_dc_residual(kappa, 0), D_DC_TOL)
        self.assertLess(l2_rc_identity_residual(kappa), 1e-10)


class TestScattering(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 256, 32.0)
        self.kappa = gaussian_state(self.grid, velocity=(0.5,))

    def test_free_profiles_are_constant(self):
        snapshots = {t: free_conjugation(self.kappa, t) for t in (1.0, 2.0, 4.0)}
        result = scattering_extract(snapshots, SelfInteraction.free())
        self.assertEqual(result.times, [1.0, 2.0, 4.0])
        self.assertLess(hs_norm(result.kappa_inf - self.kappa), 1e-12)
        self.assertLess(max(v for _, v in result.cauchy), 1e-12)
        self.assertLess(max(v for _, v in result.gamma_residuals), 1e-10)
        self.assertLess(result.relative_final_residual, 1e-12)
        self.assertEqual(result.integrand_norms, [])

    def test_integrand_norms(self):
        snapshots = {t: free_conjugation(self.kappa, t) for t in (1.0, 2.0)}
        result = scattering_extract(snapshots, SelfInteraction(lambda2=1.0, beta=2))
        self.assertEqual(len(result.integrand_norms), 2)
        self.assertGreater(result.integrand_norms[0][1], result.integrand_norms[1][1])

    def test_needs_two_snapshots(self):
        self.assertRaises(ValueError, scattering_extract, {1.0: self.kappa})


if __name__ == "__main__":
    unittest.main()
