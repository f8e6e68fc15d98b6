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
from typing import Iterable, Iterator, Optional, Tuple

import numpy as np
import scipy.linalg

from ksflow.constants import SINGULAR_DROP_TOL
from ksflow.errors import GridMismatchError, RankBudgetExceeded
from ksflow.grid import Grid, GridFunction, lp_values_norm
from ksflow.setup import get_compress_tol, get_rank_max
from ksflow.utils import ensure_finite

logger = logging.getLogger(__name__)

# largest dense (r, c) kernel to_rc will materialise
RC_MAX_ELEMENTS = 2**26
# rows of the dense x-kernel handled at once by gamma_local_norm
KERNEL_BLOCK_ROWS = 256


def _orbital_values(grid: Grid, orbital) -> np.ndarray:
    if isinstance(orbital, GridFunction):
        grid.check_same(orbital.grid)
        orbital = orbital.values
    orbital = np.asarray(orbital, dtype=complex)
    if orbital.shape != grid.shape:
        raise ValueError(f"orbital of shape {orbital.shape} does not fit grid {grid.shape}")
    return orbital


class FiniteRankOperator:
    """Operator A = sum_i c_i |l_i><r_i| with orbitals sampled on a Grid.

    The kernel is A(x, y) = sum_i c_i l_i(x) conj(r_i(y)). Instances are
    immutable; every operation returns a new operator.

    Attributes
    ----------
    grid : Grid
        the grid of all orbitals
    coeffs : np.ndarray
        complex coefficients, shape (R,)
    left, right : np.ndarray
        orbital stacks, shape (R,) + grid.shape
    self_adjoint : bool
        the operator equals its adjoint (the terms may still differ)
    nonneg : bool
        the operator is self-adjoint and non-negative

    Methods
    -------
    from_terms(grid, terms)
        builds an operator from (c, l, r) triples
    from_orbitals(weights, orbitals)
        builds sum_i w_i |phi_i><phi_i|
    apply(f)
        the operator applied to a GridFunction
    map_orbitals(function)
        conjugation by a linear map applied to both orbital families
    left_multiply(values)
        the product m A for a multiplication operator m
    """

    def __init__(
        self,
        grid: Grid,
        coeffs: np.ndarray,
        left: np.ndarray,
        right: np.ndarray,
        self_adjoint: bool = False,
        nonneg: bool = False,
    ) -> None:
        coeffs = np.array(coeffs, dtype=complex).reshape(-1)
        rank = coeffs.shape[0]
        left = np.array(left, dtype=complex).reshape((rank,) + grid.shape)
        right = np.array(right, dtype=complex).reshape((rank,) + grid.shape)
        ensure_finite(coeffs, "operator coefficients")
        ensure_finite(left, "left orbitals")
        ensure_finite(right, "right orbitals")
        for array in (coeffs, left, right):
            array.setflags(write=False)

        self.grid = grid
        self.coeffs = coeffs
        self.left = left
        self.right = right
        self.nonneg = bool(nonneg)
        self.self_adjoint = bool(self_adjoint) or self.nonneg

    @property
    def rank(self) -> int:
        """Number of stored terms (an upper bound of the true rank)."""
        return self.coeffs.shape[0]

    @classmethod
    def zero(cls, grid: Grid) -> "FiniteRankOperator":
        empty = np.zeros((0,) + grid.shape, dtype=complex)
        return cls(grid, np.zeros(0), empty, empty, self_adjoint=True, nonneg=True)

    @classmethod
    def from_terms(cls, grid: Grid, terms: Iterable[Tuple[complex, object, object]], **flags):
        coeffs, left, right = [], [], []
        for c, l, r in terms:
            coeffs.append(complex(c))
            left.append(_orbital_values(grid, l))
            right.append(_orbital_values(grid, r))
        if not coeffs:
            return cls.zero(grid)
        return cls(grid, coeffs, np.stack(left), np.stack(right), **flags)

    @classmethod
    def rank_one(cls, left: GridFunction, right: Optional[GridFunction] = None, coefficient=1.0):
        """|left><right|, or the projector-like |left><left| when right is omitted."""
        symmetric = right is None
        right = left if symmetric else right
        real_coefficient = np.isreal(coefficient)
        return cls.from_terms(
            left.grid,
            [(coefficient, left, right)],
            self_adjoint=symmetric and real_coefficient,
            nonneg=symmetric and real_coefficient and np.real(coefficient) >= 0,
        )

    @classmethod
    def from_orbitals(cls, weights, orbitals) -> "FiniteRankOperator":
        """sum_i w_i |phi_i><phi_i| for real weights."""
        orbitals = list(orbitals)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if len(orbitals) != weights.shape[0]:
            raise ValueError("one weight per orbital is required")
        if not orbitals:
            raise ValueError("at least one orbital is required")
        grid = orbitals[0].grid
        return cls.from_terms(
            grid,
            [(w, phi, phi) for w, phi in zip(weights, orbitals)],
            self_adjoint=True,
            nonneg=bool(np.all(weights >= 0)),
        )

    def terms(self) -> Iterator[Tuple[complex, GridFunction, GridFunction]]:
        for i in range(self.rank):
            yield (
                self.coeffs[i],
                GridFunction(self.grid, self.left[i]),
                GridFunction(self.grid, self.right[i]),
            )

    def has_symmetric_terms(self) -> bool:
        """True when every term has identical left and right orbitals."""
        return np.array_equal(self.left, self.right)

    def apply(self, f: GridFunction) -> GridFunction:
        self.grid.check_same(f.grid)
        weights = self.coeffs * self.grid.inner(self.right, f.values[None])
        return GridFunction(self.grid, np.tensordot(weights, self.left, axes=1))

    def map_orbitals(self, function) -> "FiniteRankOperator":
        """Applies function to both orbital stacks.

        For a unitary U acting as function this is U A U*; flags are kept.
        """
        return FiniteRankOperator(
            self.grid,
            self.coeffs,
            function(self.left),
            function(self.right),
            self_adjoint=self.self_adjoint,
            nonneg=self.nonneg,
        )

    def left_multiply(self, values: np.ndarray) -> "FiniteRankOperator":
        return FiniteRankOperator(self.grid, self.coeffs, values * self.left, self.right)

    def right_multiply(self, values: np.ndarray) -> "FiniteRankOperator":
        """The product A m; the right orbitals pick up conj(m)."""
        return FiniteRankOperator(self.grid, self.coeffs, self.left, np.conj(values) * self.right)

    def dense_kernel(self) -> np.ndarray:
        """Kernel matrix K[x, y] over flattened grid points.

        Only for small grids (tests and oracles).
        """
        size = int(np.prod(self.grid.shape))
        if size > 4096:
            raise ValueError("dense kernels are limited to 4096 grid points")
        left = self.left.reshape(self.rank, -1)
        right = self.right.reshape(self.rank, -1)
        return (self.coeffs[:, None] * left).T @ np.conj(right)

    def _check_same_grid(self, other: "FiniteRankOperator") -> None:
        if self.grid != other.grid:
            raise GridMismatchError("operators live on different grids")

    def __add__(self, other: "FiniteRankOperator") -> "FiniteRankOperator":
        return add(self, other)

    def __sub__(self, other: "FiniteRankOperator") -> "FiniteRankOperator":
        return add(self, scale(other, -1.0))

    def __neg__(self) -> "FiniteRankOperator":
        return scale(self, -1.0)

    def __mul__(self, z) -> "FiniteRankOperator":
        return scale(self, z)

    __rmul__ = __mul__

    def __matmul__(self, other: "FiniteRankOperator") -> "FiniteRankOperator":
        return compose(self, other)

    def __str__(self) -> str:
        return str(
            {
                "grid": str(self.grid),
                "rank": self.rank,
                "self_adjoint": self.self_adjoint,
                "nonneg": self.nonneg,
            }
        )

    def __repr__(self) -> str:
        return self.__str__()


def _flat(values: np.ndarray) -> np.ndarray:
    return values.reshape(values.shape[0], -1)


def gram(X: np.ndarray, Y: np.ndarray, grid: Grid) -> np.ndarray:
    """G[i, j] = <x_i, y_j> = h^d sum conj(x_i) y_j."""
    return grid.cell_volume * (np.conj(_flat(X)) @ _flat(Y).T)


def scale(A: FiniteRankOperator, z) -> FiniteRankOperator:
    z = complex(z)
    real = z.imag == 0
    return FiniteRankOperator(
        A.grid,
        z * A.coeffs,
        A.left,
        A.right,
        self_adjoint=A.self_adjoint and real,
        nonneg=A.nonneg and real and z.real >= 0,
    )


def add(A: FiniteRankOperator, B: FiniteRankOperator) -> FiniteRankOperator:
    """Concatenates the terms; compress() removes redundancy."""
    A._check_same_grid(B)
    return FiniteRankOperator(
        A.grid,
        np.concatenate([A.coeffs, B.coeffs]),
        np.concatenate([A.left, B.left]),
        np.concatenate([A.right, B.right]),
        self_adjoint=A.self_adjoint and B.self_adjoint,
        nonneg=A.nonneg and B.nonneg,
    )


def add_all(operators) -> FiniteRankOperator:
    operators = list(operators)
    if not operators:
        raise ValueError("nothing to add")
    total = operators[0]
    for operator in operators[1:]:
        total = add(total, operator)
    return total


def adjoint(A: FiniteRankOperator) -> FiniteRankOperator:
    return FiniteRankOperator(
        A.grid,
        np.conj(A.coeffs),
        A.right,
        A.left,
        self_adjoint=A.self_adjoint,
        nonneg=A.nonneg,
    )


def _from_core(grid: Grid, core: np.ndarray, X: np.ndarray, Y: np.ndarray, **flags):
    # sum_ij core[i, j] |x_i><y_j| as at most min(R_X, R_Y) terms
    if core.size == 0:
        return FiniteRankOperator.zero(grid)
    U, s, Vh = scipy.linalg.svd(core, full_matrices=False)
    keep = s > 0
    left = np.tensordot(U[:, keep].T, X, axes=1)
    right = np.tensordot(np.conj(Vh[keep]), Y, axes=1)
    return FiniteRankOperator(grid, s[keep], left, right, **flags)


def _from_hermitian_core(grid: Grid, core: np.ndarray, X: np.ndarray, nonneg: bool):
    # sum_ij core[i, j] |x_i><x_j| with core Hermitian, kept in l = r form
    if core.size == 0:
        return FiniteRankOperator.zero(grid)
    core = 0.5 * (core + np.conj(core.T))
    eigenvalues, V = scipy.linalg.eigh(core)
    if nonneg:
        eigenvalues = np.clip(eigenvalues, 0.0, None)
    keep = eigenvalues != 0
    orbitals = np.tensordot(V[:, keep].T, X, axes=1)
    return FiniteRankOperator(
        grid, eigenvalues[keep], orbitals, orbitals, self_adjoint=True, nonneg=nonneg
    )


def compose(A: FiniteRankOperator, B: FiniteRankOperator) -> FiniteRankOperator:
    """A B = sum_ij a_i b_j <r^A_i, l^B_j> |l^A_i><r^B_j|."""
    A._check_same_grid(B)
    core = A.coeffs[:, None] * gram(A.right, B.left, A.grid) * B.coeffs[None, :]
    return _from_core(A.grid, core, A.left, B.right)


def square(A: FiniteRankOperator) -> FiniteRankOperator:
    """A* A as a non-negative operator."""
    core = np.conj(A.coeffs)[:, None] * gram(A.left, A.left, A.grid) * A.coeffs[None, :]
    return _from_hermitian_core(A.grid, core, A.right, nonneg=True)


def commutator(A: FiniteRankOperator, B: FiniteRankOperator) -> FiniteRankOperator:
    return add(compose(A, B), scale(compose(B, A), -1.0))


def multiplication_commutator(values: np.ndarray, A: FiniteRankOperator, factor=1.0):
    """factor [m, A] for the multiplication operator m(x).

    For self-adjoint A, real m and imaginary factor the result is
    self-adjoint.
    """
    values = np.asarray(values)
    factor = complex(factor)
    hermitian = A.self_adjoint and np.isrealobj(values) and factor.real == 0
    return FiniteRankOperator(
        A.grid,
        factor * np.concatenate([A.coeffs, -A.coeffs]),
        np.concatenate([values * A.left, A.left]),
        np.concatenate([A.right, np.conj(values) * A.right]),
        self_adjoint=hermitian,
    )


def den_values(A: FiniteRankOperator) -> np.ndarray:
    return np.einsum("i,i...,i...->...", A.coeffs, A.left, np.conj(A.right))


def den(A: FiniteRankOperator) -> GridFunction:
    """Diagonal A(x, x) = sum_i c_i l_i(x) conj(r_i(x))."""
    return GridFunction(A.grid, den_values(A))


def density_values_of_square(A: FiniteRankOperator) -> np.ndarray:
    """rho_{A*A}(x) = int |A(z, x)|^2 dz without forming A*A."""
    if A.rank == 0:
        return np.zeros(A.grid.shape)
    core = np.conj(A.coeffs)[:, None] * gram(A.left, A.left, A.grid) * A.coeffs[None, :]
    right = _flat(A.right)
    values = np.sum(right * (core @ np.conj(right)), axis=0).real
    return np.clip(values, 0.0, None).reshape(A.grid.shape)


def density_of_square(A: FiniteRankOperator) -> GridFunction:
    return GridFunction(A.grid, density_values_of_square(A))


def trace(A: FiniteRankOperator) -> complex:
    return complex(np.sum(A.coeffs * A.grid.inner(A.right, A.left)))


def hs_inner(A: FiniteRankOperator, B: FiniteRankOperator) -> complex:
    """Tr(A* B) = sum_ij conj(a_i) b_j <l^A_i, l^B_j> <r^B_j, r^A_i>."""
    A._check_same_grid(B)
    GL = gram(A.left, B.left, A.grid)
    GR = gram(B.right, A.right, A.grid)
    return complex(np.sum(np.conj(A.coeffs)[:, None] * B.coeffs[None, :] * GL * GR.T))


def _orthonormal_factor(X: np.ndarray, grid: Grid):
    # X = Q T with Q orthonormal in L^2; T is the triangular Gram factor
    columns = np.sqrt(grid.cell_volume) * _flat(X).T
    Q, R, perm = scipy.linalg.qr(columns, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(R))
    if diagonal.size == 0 or diagonal[0] == 0:
        return Q[:, :0], R[:0, :]
    keep = int(np.sum(diagonal > SINGULAR_DROP_TOL * diagonal[0]))
    T = np.empty_like(R)
    T[:, perm] = R
    return Q[:, :keep], T[:keep]


def _basis_to_orbitals(Q: np.ndarray, coefficients: np.ndarray, grid: Grid) -> np.ndarray:
    values = (Q @ coefficients).T / np.sqrt(grid.cell_volume)
    return values.reshape((coefficients.shape[1],) + grid.shape)


def _core(A: FiniteRankOperator):
    QL, TL = _orthonormal_factor(A.left, A.grid)
    QR, TR = _orthonormal_factor(A.right, A.grid)
    M = (TL * A.coeffs[None, :]) @ np.conj(TR.T)
    return QL, QR, M


def hs_norm(A: FiniteRankOperator) -> float:
    """Hilbert-Schmidt norm from the Gram factors of both orbital families."""
    if A.rank == 0:
        return 0.0
    _, _, M = _core(A)
    return float(np.linalg.norm(M))


def singular_values(A: FiniteRankOperator) -> np.ndarray:
    """Singular values in decreasing order."""
    if A.rank == 0:
        return np.zeros(0)
    _, _, M = _core(A)
    if M.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(M)


def schatten_norm(A: FiniteRankOperator, p: float) -> float:
    s = singular_values(A)
    if s.size == 0:
        return 0.0
    if p == np.inf:
        return float(s[0])
    if p < 1:
        raise ValueError("Schatten exponent must be at least 1")
    return float(np.sum(s**p) ** (1.0 / p))


def _truncation_rank(magnitudes: np.ndarray, tol: float) -> int:
    # magnitudes sorted decreasingly; smallest k with tail <= tol * total
    if magnitudes.size == 0 or magnitudes[0] == 0:
        return 0
    significant = int(np.sum(magnitudes > SINGULAR_DROP_TOL * magnitudes[0]))
    energy = magnitudes[:significant] ** 2
    total = np.sum(energy)
    tails = np.concatenate([np.cumsum(energy[::-1])[::-1], [0.0]])
    for k in range(significant + 1):
        if tails[k] <= (tol**2) * total:
            return k
    return significant


def compress(A: FiniteRankOperator, tol: Optional[float] = None, rank_max: Optional[int] = None):
    """Re-orthonormalises the orbital families and drops the smallest terms.

    The discarded singular values carry at most tol of the Hilbert-Schmidt
    norm. Self-adjoint operators come back in l = r form with real
    coefficients; non-negative ones additionally lose negative round-off
    eigenvalues.

    Raises
    ------
    RankBudgetExceeded
        if more than rank_max terms survive
    """
    tol = get_compress_tol() if tol is None else float(tol)
    rank_max = get_rank_max() if rank_max is None else int(rank_max)
    if tol < 0:
        raise ValueError("compression tolerance must be non-negative")
    grid = A.grid
    if A.rank == 0:
        return FiniteRankOperator.zero(grid)

    if A.self_adjoint:
        Q, T = _orthonormal_factor(np.concatenate([A.left, A.right]), grid)
        TL, TR = T[:, : A.rank], T[:, A.rank :]
        M = (TL * A.coeffs[None, :]) @ np.conj(TR.T)
        M = 0.5 * (M + np.conj(M.T))
        eigenvalues, U = scipy.linalg.eigh(M)
        if A.nonneg:
            eigenvalues = np.clip(eigenvalues, 0.0, None)
        order = np.argsort(-np.abs(eigenvalues))
        eigenvalues, U = eigenvalues[order], U[:, order]
        k = _truncation_rank(np.abs(eigenvalues), tol)
        orbitals = _basis_to_orbitals(Q, U[:, :k], grid)
        result = FiniteRankOperator(
            grid, eigenvalues[:k], orbitals, orbitals, self_adjoint=True, nonneg=A.nonneg
        )
    else:
        QL, QR, M = _core(A)
        if M.size == 0:
            return FiniteRankOperator.zero(grid)
        U, s, Vh = scipy.linalg.svd(M, full_matrices=False)
        k = _truncation_rank(s, tol)
        result = FiniteRankOperator(
            grid,
            s[:k],
            _basis_to_orbitals(QL, U[:, :k], grid),
            _basis_to_orbitals(QR, np.conj(Vh[:k].T), grid),
        )

    if result.rank > rank_max:
        raise RankBudgetExceeded(f"rank {result.rank} exceeds the budget {rank_max}")
    logger.debug("compressed rank %d -> %d", A.rank, result.rank)
    return result


def eigen_decomposition(A: FiniteRankOperator, tol: float = 0.0):
    """Eigenvalues (decreasing) and eigen-orbitals of a self-adjoint operator."""
    if not A.self_adjoint:
        raise ValueError("eigen decomposition needs a self-adjoint operator")
    compressed = compress(A, tol=tol, rank_max=max(A.rank, 1) * 2)
    order = np.argsort(-compressed.coeffs.real)
    return compressed.coeffs.real[order], compressed.left[order]


def sqrt_nonneg(gamma: FiniteRankOperator) -> FiniteRankOperator:
    """Self-adjoint non-negative square root of a non-negative operator."""
    if not gamma.nonneg:
        raise ValueError("square root needs an operator flagged non-negative")
    compressed = compress(gamma, tol=0.0, rank_max=max(gamma.rank, 1) * 2)
    return FiniteRankOperator(
        gamma.grid,
        np.sqrt(np.clip(compressed.coeffs.real, 0.0, None)),
        compressed.left,
        compressed.right,
        self_adjoint=True,
        nonneg=True,
    )


class RCKernel:
    """Kernel in center/relative coordinates, K~(r, c) = K(c - r/2, c + r/2).

    values has shape (n,)*d + (n,)*d: first the r axes (r = m h with
    m = -n/2 .. n/2 - 1), then the c axes (the grid points).
    """

    def __init__(self, grid: Grid, values: np.ndarray) -> None:
        if values.shape != grid.shape + grid.shape:
            raise ValueError("rc kernel values do not match the grid")
        self.grid = grid
        self.values = values

    @property
    def r_points(self) -> np.ndarray:
        return rc_offsets(self.grid) * self.grid.h

    def c_norms(self, p: float) -> np.ndarray:
        """||K~(r, .)||_{L^p_c} for every r."""
        return _c_norms(self.grid, self.values, p)

    def mixed_norm(self, q: float, p: float) -> float:
        """||K~||_{L^q_r L^p_c}."""
        return lp_values_norm(self.grid, self.c_norms(p), q)

    def derivative_c(self, axis: int) -> "RCKernel":
        """Spectral derivative in the c_axis variable."""
        grid = self.grid
        symbol = 1j * grid.wavenumber(axis)
        return RCKernel(grid, grid.apply_symbol(self.values, symbol))

    def __sub__(self, other: "RCKernel") -> "RCKernel":
        self.grid.check_same(other.grid)
        return RCKernel(self.grid, self.values - other.values)


def rc_offsets(grid: Grid) -> np.ndarray:
    return np.arange(-grid.n // 2, grid.n // 2)


def _c_norms(grid: Grid, values: np.ndarray, p: float) -> np.ndarray:
    axes = tuple(range(-grid.d, 0))
    magnitudes = np.abs(values)
    if p == np.inf:
        return np.max(magnitudes, axis=axes)
    return (grid.cell_volume * np.sum(magnitudes**p, axis=axes)) ** (1.0 / p)


def _half_step_variants(A: FiniteRankOperator):
    # l(x - p h/2) and r(x + p h/2) for every parity vector p in {0, 1}^d
    grid = A.grid
    lefts, rights = {}, {}
    for parity in itertools.product((0, 1), repeat=grid.d):
        if not any(parity):
            lefts[parity], rights[parity] = A.left, A.right
            continue
        shift = 0.5 * grid.h * np.asarray(parity, dtype=float)
        lefts[parity] = grid.apply_symbol(A.left, grid.shift_symbol(shift))
        rights[parity] = grid.apply_symbol(A.right, grid.shift_symbol(-shift))
    return lefts, rights


def _rc_value(A, lefts, rights, offsets) -> np.ndarray:
    # K~(m h, c) on the c grid for one offset vector m
    halves = [m // 2 for m in offsets]
    parity = tuple(m - 2 * j for m, j in zip(offsets, halves))
    axes = tuple(range(1, A.grid.d + 1))
    left = np.roll(lefts[parity], shift=halves, axis=axes)
    right = np.roll(rights[parity], shift=[-j for j in halves], axis=axes)
    return np.einsum("i,i...,i...->...", A.coeffs, left, np.conj(right))


def iter_rc_rows(A: FiniteRankOperator) -> Iterator[Tuple[float, np.ndarray]]:
    """Streams K~ one r_0 row at a time.

    Yields (r_0, slab) with slab of shape (n,)*(d-1) + (n,)*d holding the
    remaining r axes followed by the c axes.
    """
    grid = A.grid
    lefts, rights = _half_step_variants(A)
    offsets = rc_offsets(grid)
    for m0 in offsets:
        slab = np.empty((grid.n,) * (grid.d - 1) + grid.shape, dtype=complex)
        for rest in itertools.product(range(grid.n), repeat=grid.d - 1):
            full = (int(m0),) + tuple(int(offsets[k]) for k in rest)
            slab[rest] = _rc_value(A, lefts, rights, full)
        yield m0 * grid.h, slab


def to_rc(A: FiniteRankOperator) -> RCKernel:
    """Dense (r, c) kernel; for d = 1 or small d = 2 grids."""
    grid = A.grid
    if grid.n ** (2 * grid.d) > RC_MAX_ELEMENTS:
        raise ValueError("grid too large for a dense rc kernel, stream with iter_rc_rows")
    rows = [slab for _, slab in iter_rc_rows(A)]
    return RCKernel(grid, np.stack(rows))


def local_norm_rc(A: FiniteRankOperator, q: float, p: float) -> float:
    """||K~||_{L^q_r L^p_c}, streamed over r rows."""
    grid = A.grid
    if A.rank == 0:
        return 0.0
    norms = [_c_norms(grid, slab, p) for _, slab in iter_rc_rows(A)]
    return lp_values_norm(grid, np.stack(norms), q)


def mixed_norm_xy(A: FiniteRankOperator, s: float) -> float:
    """||A||_{L^s_x L^2_y} = ||den(A A*)^{1/2}||_{L^s}."""
    values = np.sqrt(density_values_of_square(adjoint(A)))
    return lp_values_norm(A.grid, values, s)


def gamma_local_norm(A: FiniteRankOperator, s: float) -> float:
    """||A(x, y)||_{L^s_{x,y}} streamed in blocks of x rows."""
    grid = A.grid
    if A.rank == 0:
        return 0.0
    if s == 2:
        return hs_norm(A)
    left = (A.coeffs[:, None] * _flat(A.left)).T
    right = np.conj(_flat(A.right))
    result = 0.0
    for start in range(0, left.shape[0], KERNEL_BLOCK_ROWS):
        block = np.abs(left[start : start + KERNEL_BLOCK_ROWS] @ right)
        if s == np.inf:
            result = max(result, float(np.max(block)))
        else:
            result += float(np.sum(block**s))
    if s == np.inf:
        return result
    return (grid.cell_volume**2 * result) ** (1.0 / s)
