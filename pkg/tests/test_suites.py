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

import numpy as np

from ksflow.grid import Grid
from ksflow.initial_data import gaussian_state
from ksflow.operators import gamma_local_norm, local_norm_rc, square
from ksflow.suites import (
    classification_oracle,
    free_gaussian_closed_form,
    free_gaussian_oracle,
    nls_oracle,
    nonlinear_boost_oracle,
    picard_oracle,
    richardson_oracle,
    run_suite,
)


def failed(rows):
    return [row for row in rows if row["passed"] != "True"]


class TestOracles(unittest.TestCase):
    def test_closed_form_at_zero(self):
        grid = Grid(1, 256, 16.0)
        kappa = gaussian_state(grid)
        exact = free_gaussian_closed_form(0.0)
        self.assertAlmostEqual(exact["gamma_inf"], np.pi**-0.5)
        self.assertAlmostEqual(gamma_local_norm(square(kappa), np.inf), exact["gamma_inf"], places=12)
        self.assertAlmostEqual(local_norm_rc(kappa, 2, np.inf), exact["L2r_Linf_c"], places=10)

    def test_free_gaussian(self):
        rows = free_gaussian_oracle()
        self.assertEqual(len(rows), 2 * 9)
        self.assertEqual(failed(rows), [])

    def test_scalar_reduction(self):
        self.assertEqual(failed(nls_oracle()), [])

    def test_picard(self):
        self.assertEqual(failed(picard_oracle()), [])

    def test_strang_order(self):
        rows = richardson_oracle()
        self.assertEqual(failed(rows), [])
        self.assertAlmostEqual(float(rows[0]["value"]), 2.0, delta=0.2)

    def test_classification(self):
        self.assertEqual(failed(classification_oracle()), [])

    def test_nonlinear_boost_covariance(self):
        rows = nonlinear_boost_oracle(0, 0)
        self.assertEqual([row["oracle"] for row in rows], ["galilean_boost_nonlinear"])
        self.assertEqual(failed(rows), [])


class TestSuites(unittest.TestCase):
    def test_identity_suite(self):
        result = run_suite("identities", 3, 1)
        self.assertTrue(result.passed, msg=result.failures)
        with tempfile.TemporaryDirectory() as directory:
            paths = result.write(directory)
            self.assertEqual([os.path.basename(p) for p in paths], ["identities_rows.csv", "identities_summary.txt"])
            with open(paths[1]) as handle:
                self.assertTrue(handle.readline().startswith("suite=identities rows="))

    def test_inequality_suite(self):
        result = run_suite("inequalities", 0, 1)
        self.assertTrue(result.passed, msg=result.failures)
        names = {report.name for report in result.reports}
        self.assertIn("xyrc", names)
        self.assertIn("gnk_d1", names)
        self.assertIn("density_d2", names)
        self.assertTrue(any(row.startswith("inequality=xyrc") for row in result.summary_rows()))

    def test_snapshot_operator_joins_identity_suite(self):
        kappa = gaussian_state(Grid(1, 256, 16.0), velocity=(0.5,))
        result = run_suite("identities", 0, 1, [kappa])
        self.assertTrue(result.passed, msg=result.failures)

    def test_unknown_suite(self):
        self.assertRaises(ValueError, run_suite, "everything", 0, 1)


if __name__ == "__main__":
    unittest.main()
