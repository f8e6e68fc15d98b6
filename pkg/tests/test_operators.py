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

from ksflow.errors import GridMismatchError, RankBudgetExceeded
from ksflow.grid import Grid
from ksflow.initial_data import GaussianOrbital, random_operator
from ksflow.operators import (
    FiniteRankOperator,
    adjoint,
    compose,
    compress,
    den,
    density_values_of_square,
    eigen_decomposition,
    gamma_local_norm,
    hs_inner,
    hs_norm,
    local_norm_rc,
    mixed_norm_xy,
    schatten_norm,
    singular_values,
    sqrt_nonneg,
    square,
    to_rc,
    trace,
)


def unit_gaussian(grid, center=0.0, width=1.0, velocity=0.0):
    return GaussianOrbital((center,), width, (velocity,)).sample(grid)


def plane_wave(grid, m):
    # orthonormal on [-L, L)
    k = m * np.pi / grid.L
    return grid.sample(lambda x: np.exp(1j * k * x) / np.sqrt(2.0 * grid.L))


class TestAlgebra(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 64, 8.0)
        self.rng = np.random.default_rng(7)
        self.a = random_operator(self.grid, self.rng, rank=2)
        self.b = random_operator(self.grid, self.rng, rank=2)

    def test_projection_idempotence(self):
        phi = unit_gaussian(self.grid)
        projector = FiniteRankOperator.rank_one(phi)
        self.assertTrue(projector.nonneg)
        self.assertLess(hs_norm(compose(projector, projector) - projector), 1e-12)

    def test_adjoint_involution(self):
        twice = adjoint(adjoint(self.a))
        self.assertTrue(np.array_equal(twice.coeffs, self.a.coeffs))
        self.assertTrue(np.array_equal(twice.left, self.a.left))

    def test_compose_dense(self):
        h = self.grid.h
        dense = self.a.dense_kernel() @ self.b.dense_kernel() * h
        product = compose(self.a, self.b).dense_kernel()
        difference = np.sqrt(np.sum(np.abs(product - dense) ** 2)) * h
        self.assertLess(difference, 1e-8)
        self.assertLessEqual(compose(self.a, self.b).rank, 4)

    def test_adjoint_dense(self):
        self.assertTrue(
            np.allclose(adjoint(self.a).dense_kernel(), np.conj(self.a.dense_kernel().T))
        )

    def test_grid_mismatch(self):
        other = random_operator(Grid(1, 32, 8.0), self.rng, rank=1)
        self.assertRaises(GridMismatchError, compose, self.a, other)
        self.assertRaises(GridMismatchError, hs_inner, self.a, other)

    def test_square_is_nonneg(self):
        gamma = square(self.a)
        self.assertTrue(gamma.nonneg)
        dense = np.conj(self.a.dense_kernel().T) @ self.a.dense_kernel() * self.grid.h
        self.assertTrue(np.allclose(gamma.dense_kernel(), dense, atol=1e-10))
        self.assertTrue(np.all(np.linalg.eigvalsh(dense * self.grid.h) >= -1e-12))


class TestDensities(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 128, 16.0)

    def test_rank_one_density(self):
        phi = unit_gaussian(self.grid, 1.0, 1.2, 0.5)
        rho = den(FiniteRankOperator.rank_one(phi))
        self.assertTrue(np.allclose(rho.values, np.abs(phi.values) ** 2))
        self.assertAlmostEqual(rho.integral().real, 1.0, places=12)

    def test_zero_density(self):
        zero = FiniteRankOperator.zero(self.grid)
        self.assertEqual(np.max(np.abs(den(zero).values)), 0.0)
        self.assertEqual(hs_norm(zero), 0.0)
        self.assertEqual(local_norm_rc(zero, 2, np.inf), 0.0)

    def test_trace_identity(self):
        orbitals = [unit_gaussian(self.grid, c, 1.0) for c in (-2.0, 0.0, 3.0)]
        weights = [0.2, 0.5, 0.3]
        gamma = FiniteRankOperator.from_orbitals(weights, orbitals)
        rho = den(gamma)
        self.assertGreaterEqual(np.min(rho.values.real), -1e-12)
        self.assertAlmostEqual(rho.integral().real, sum(weights), places=10)
        self.assertAlmostEqual(trace(gamma).real, sum(weights), places=10)

    def test_density_of_square(self):
        kappa = random_operator(self.grid, np.random.default_rng(3), rank=3)
        direct = den(square(kappa)).values.real
        self.assertTrue(np.allclose(density_values_of_square(kappa), direct, atol=1e-10))
        expected = hs_norm(kappa) ** 2
        self.assertAlmostEqual(trace(square(kappa)).real, expected, delta=1e-10 * expected)


class TestNorms(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 64, 8.0)
        self.rng = np.random.default_rng(11)

    def test_hs_norm(self):
        phi = unit_gaussian(self.grid)
        self.assertAlmostEqual(hs_norm(FiniteRankOperator.rank_one(phi)), 1.0, places=12)
        a = random_operator(self.grid, self.rng, rank=3)
        dense = np.sum(np.abs(a.dense_kernel()) ** 2) * self.grid.h**2
        self.assertAlmostEqual(hs_norm(a) ** 2, dense, delta=1e-8 * dense)
        self.assertAlmostEqual(hs_inner(a, a).real, hs_norm(a) ** 2, delta=1e-10 * dense)

    def test_orthogonal_terms(self):
        p, q = plane_wave(self.grid, 1), plane_wave(self.grid, 2)
        self.assertAlmostEqual(
            abs(hs_inner(FiniteRankOperator.rank_one(p), FiniteRankOperator.rank_one(q))), 0.0
        )

    def test_schatten(self):
        phi = unit_gaussian(self.grid)
        single = FiniteRankOperator.rank_one(phi, coefficient=2.0)
        for r in (1, 2, 3, np.inf):
            self.assertAlmostEqual(schatten_norm(single, r), 2.0, places=12)
        p, q = plane_wave(self.grid, 1), plane_wave(self.grid, 3)
        pair = FiniteRankOperator.from_terms(self.grid, [(1.0, p, p), (1.0, q, q)])
        self.assertAlmostEqual(schatten_norm(pair, 1), 2.0, places=12)
        self.assertAlmostEqual(schatten_norm(pair, 2), np.sqrt(2.0), places=12)
        self.assertRaises(ValueError, schatten_norm, pair, 0.5)

    def test_schatten_monotone(self):
        a = random_operator(self.grid, self.rng, rank=4)
        values = [schatten_norm(a, r) for r in (1, 1.5, 2, 4, np.inf)]
        for larger, smaller in zip(values, values[1:]):
            self.assertGreaterEqual(larger, smaller * (1 - 1e-12))
        self.assertAlmostEqual(values[2], hs_norm(a), delta=1e-10 * values[2])

    def test_singular_values_of_square(self):
        kappa = random_operator(self.grid, self.rng, rank=3)
        s = singular_values(kappa)
        eigenvalues, _ = eigen_decomposition(square(kappa))
        k = min(s.size, eigenvalues.size)
        self.assertTrue(np.allclose(eigenvalues[:k], s[:k] ** 2, rtol=1e-8, atol=1e-12))


class TestCompression(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 64, 8.0)
        self.rng = np.random.default_rng(5)

    def test_tolerance_zero(self):
        a = random_operator(self.grid, self.rng, rank=4)
        self.assertLess(hs_norm(compress(a, tol=0.0) - a), 1e-9 * hs_norm(a))

    def test_degenerate_rank(self):
        phi = unit_gaussian(self.grid)
        doubled = FiniteRankOperator.from_terms(self.grid, [(1.0, phi, phi), (2.0, phi, phi)])
        compressed = compress(doubled, tol=0.0)
        self.assertEqual(compressed.rank, 1)
        self.assertAlmostEqual(compressed.coeffs[0].real, 3.0, places=12)

    def test_truncation_bound(self):
        a = random_operator(self.grid, self.rng, rank=8)
        compressed = compress(a, tol=1e-3)
        self.assertLessEqual(hs_norm(a - compressed), 1e-3 * hs_norm(a) * (1 + 1e-9))
        self.assertLessEqual(compressed.rank, 8)

    def test_flags_preserved(self):
        orbitals = [unit_gaussian(self.grid, c) for c in (-1.0, 1.0)]
        gamma = FiniteRankOperator.from_orbitals([0.5, 0.5], orbitals)
        compressed = compress(gamma)
        self.assertTrue(compressed.nonneg)
        self.assertTrue(compressed.has_symmetric_terms())
        self.assertTrue(np.all(compressed.coeffs.real >= 0))

    def test_rank_budget(self):
        a = random_operator(self.grid, self.rng, rank=6)
        self.assertRaises(RankBudgetExceeded, compress, a, 0.0, 2)

    def test_square_root(self):
        orbitals = [unit_gaussian(self.grid, c) for c in (-1.5, 0.5)]
        gamma = FiniteRankOperator.from_orbitals([0.7, 0.3], orbitals)
        root = sqrt_nonneg(gamma)
        self.assertLess(hs_norm(square(root) - gamma), 1e-12)
        self.assertRaises(ValueError, sqrt_nonneg, random_operator(self.grid, self.rng))


class TestLocalNorms(unittest.TestCase):
    def setUp(self):
        self.grid = Grid(1, 128, 16.0)
        self.rng = np.random.default_rng(13)
        self.phi = unit_gaussian(self.grid, 0.5, 1.0, 0.7)
        self.kappa = FiniteRankOperator.rank_one(self.phi)

    def test_rc_kernel_pointwise(self):
        kernel = to_rc(self.kappa)
        x = self.grid.axis_points
        for m in (-5, 0, 4, 7):
            r = m * self.grid.h
            expected = self._gaussian(x - r / 2) * np.conj(self._gaussian(x + r / 2))
            row = kernel.values[m + self.grid.n // 2]
            self.assertTrue(np.allclose(row, expected, atol=1e-10), msg=f"r={r}")
        self.assertAlmostEqual(kernel.r_points[self.grid.n // 2], 0.0)

    def _gaussian(self, x):
        return np.pi**-0.25 * np.exp(-((x - 0.5) ** 2) / 2.0 + 0.7j * x)

    def test_l2_identity(self):
        a = random_operator(self.grid, self.rng, rank=3)
        self.assertAlmostEqual(local_norm_rc(a, 2, 2), hs_norm(a), delta=1e-10 * hs_norm(a))
        self.assertAlmostEqual(to_rc(a).mixed_norm(2, 2), hs_norm(a), delta=1e-10 * hs_norm(a))

    def test_mixed_norms_at_two(self):
        a = random_operator(self.grid, self.rng, rank=2)
        gamma = square(a)
        self.assertAlmostEqual(mixed_norm_xy(a, 2), hs_norm(a), delta=1e-10 * hs_norm(a))
        self.assertAlmostEqual(gamma_local_norm(gamma, 2), hs_norm(gamma))

    def test_gaussian_sup(self):
        centred = FiniteRankOperator.rank_one(unit_gaussian(self.grid))
        self.assertAlmostEqual(gamma_local_norm(square(centred), np.inf), np.pi**-0.5, places=12)

    def test_xyrc_lemma(self):
        for _ in range(5):
            a = random_operator(self.grid, self.rng, rank=3)
            for s in (2, 3, 4, 6, np.inf):
                lhs, rhs = mixed_norm_xy(a, s), local_norm_rc(a, 2, s)
                self.assertLessEqual(lhs, rhs * (1 + 1e-10), msg=f"s={s}")
                lhs_star = mixed_norm_xy(adjoint(a), s)
                self.assertLessEqual(lhs_star, local_norm_rc(adjoint(a), 2, s) * (1 + 1e-10))

    def test_gamma_domination(self):
        for _ in range(5):
            a = random_operator(self.grid, self.rng, rank=3)
            for s in (2, 4, np.inf):
                lhs = gamma_local_norm(square(a), s)
                self.assertLessEqual(lhs, mixed_norm_xy(adjoint(a), s) ** 2 * (1 + 1e-10))


if __name__ == "__main__":
    unittest.main()
