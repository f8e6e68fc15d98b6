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
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.fft
from scipy.special import gamma as gamma_function
from sympy import Rational

from ksflow.constants import (
    BOUNDARY_FRACTION,
    MIN_POINTS_PER_AXIS,
    POTENTIAL_KINDS,
    SUPPORTED_DIMENSIONS,
)
from ksflow.errors import GridMismatchError
from ksflow.setup import get_threads
from ksflow.utils import parse_rational

logger = logging.getLogger(__name__)


class Grid:
    """Uniform periodic grid on the box [-L, L)^d.

    Attributes
    ----------
    d : int
        spatial dimension (1, 2 or 3)
    n : int
        points per axis (even power of two, at least 8)
    L : float
        half side of the box
    h : float
        spacing 2L/n
    shape : tuple
        (n,) * d
    cell_volume : float
        quadrature weight h^d
    axis_points : np.ndarray
        the n sample coordinates -L + k h of one axis
    axis_wavenumbers : np.ndarray
        the n wavenumbers m pi / L of one axis in FFT order

    Methods
    -------
    coordinate(axis)
        coordinate array of an axis, broadcastable to the grid shape
    wavenumber(axis)
        wavenumber array of an axis in FFT order, broadcastable
    fft(values) / ifft(values)
        plain transforms over the last d axes
    apply_symbol(values, symbol)
        Fourier multiplier applied to a grid array or a stack of them
    inner(a, b)
        quadrature L^2 inner products over the last d axes
    """

    def __init__(self, d: int, n: int, L: float) -> None:
        if d not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"unsupported dimension {d}")
        if n < MIN_POINTS_PER_AXIS or n & (n - 1) != 0:
            raise ValueError("points per axis must be a power of two and at least 8")
        if not L > 0:
            raise ValueError("box half side must be positive")

        self.d = int(d)
        self.n = int(n)
        self.L = float(L)
        self.h = 2.0 * self.L / self.n
        self.shape = (self.n,) * self.d
        self.axes = tuple(range(-self.d, 0))
        self.cell_volume = self.h**self.d
        self.axis_points = -self.L + self.h * np.arange(self.n)
        self.axis_wavenumbers = 2.0 * np.pi * scipy.fft.fftfreq(self.n, d=self.h)
        self._ksq = None

    @classmethod
    def from_descriptor(cls, text: str) -> "Grid":
        """Inverse of descriptor(): 'd:n:L'."""
        try:
            d, n, L = text.strip().split(":")
            return cls(int(d), int(n), float(L))
        except ValueError as err:
            raise ValueError(f"malformed grid descriptor {text!r}: {err}")

    def descriptor(self) -> str:
        return f"{self.d}:{self.n}:{self.L!r}"

    def _broadcast(self, vector: np.ndarray, axis: int) -> np.ndarray:
        if not 0 <= axis < self.d:
            raise ValueError(f"axis {axis} outside 0..{self.d - 1}")
        shape = [1] * self.d
        shape[axis] = self.n
        return vector.reshape(shape)

    def coordinate(self, axis: int) -> np.ndarray:
        return self._broadcast(self.axis_points, axis)

    def wavenumber(self, axis: int) -> np.ndarray:
        return self._broadcast(self.axis_wavenumbers, axis)

    def coordinates(self) -> list:
        return [
            np.broadcast_to(self.coordinate(axis), self.shape) for axis in range(self.d)
        ]

    @property
    def ksq(self) -> np.ndarray:
        """|xi|^2 on the grid in FFT order."""
        if self._ksq is None:
            ksq = np.zeros(self.shape)
            for axis in range(self.d):
                ksq = ksq + self.wavenumber(axis) ** 2
            self._ksq = ksq
        return self._ksq

    def radius_squared(self) -> np.ndarray:
        r2 = np.zeros(self.shape)
        for axis in range(self.d):
            r2 = r2 + self.coordinate(axis) ** 2
        return r2

    def wavenumber_table(self) -> np.ndarray:
        """Sorted wavenumbers of one axis, -n/2 .. n/2 - 1 times pi/L."""
        return np.sort(self.axis_wavenumbers)

    def fft(self, values: np.ndarray) -> np.ndarray:
        return scipy.fft.fftn(values, axes=self.axes, workers=get_threads())

    def ifft(self, values: np.ndarray) -> np.ndarray:
        return scipy.fft.ifftn(values, axes=self.axes, workers=get_threads())

    def apply_symbol(self, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        return self.ifft(self.fft(values) * symbol)

    def shift_symbol(self, shift: Sequence[float]) -> np.ndarray:
        """Symbol of f -> f(x - shift)."""
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (self.d,))
        phase = np.zeros(self.shape)
        for axis in range(self.d):
            phase = phase + self.wavenumber(axis) * shift[axis]
        return np.exp(-1j * phase)

    def inner(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """h^d sum conj(a) b over the grid axes."""
        return self.cell_volume * np.sum(np.conj(a) * b, axis=self.axes)

    def zeros(self, dtype=complex) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)

    def sample(self, function: Callable[..., np.ndarray]) -> "GridFunction":
        """Samples function(x_0, ..., x_{d-1}) on the grid."""
        values = np.asarray(function(*self.coordinates()))
        return GridFunction(self, np.broadcast_to(values, self.shape).copy())

    def check_same(self, other: "Grid") -> None:
        if self != other:
            raise GridMismatchError(f"grid mismatch: {self} vs {other}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.d, self.n, self.L) == (other.d, other.n, other.L)

    def __hash__(self) -> int:
        return hash((self.d, self.n, self.L))

    def __str__(self) -> str:
        return str({"d": self.d, "n": self.n, "L": self.L})

    def __repr__(self) -> str:
        return self.__str__()


class GridFunction:
    """Samples of a complex (or real) function on a Grid.

    Attributes
    ----------
    grid : Grid
        the grid the samples live on
    values : np.ndarray
        array of shape grid.shape
    """

    def __init__(self, grid: Grid, values: np.ndarray) -> None:
        values = np.asarray(values)
        if values.shape != grid.shape:
            raise ValueError(f"values of shape {values.shape} do not fit grid {grid.shape}")
        self.grid = grid
        self.values = values

    def _other_values(self, other):
        if isinstance(other, GridFunction):
            self.grid.check_same(other.grid)
            return other.values
        return other

    def __add__(self, other) -> "GridFunction":
        return GridFunction(self.grid, self.values + self._other_values(other))

    def __sub__(self, other) -> "GridFunction":
        return GridFunction(self.grid, self.values - self._other_values(other))

    def __mul__(self, other) -> "GridFunction":
        return GridFunction(self.grid, self.values * self._other_values(other))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def conj(self) -> "GridFunction":
        return GridFunction(self.grid, np.conj(self.values))

    def integral(self) -> complex:
        return self.grid.cell_volume * np.sum(self.values)

    def norm(self, p: float = 2) -> float:
        return lp_norm(self, p)

    def __str__(self) -> str:
        return str({"grid": str(self.grid), "dtype": str(self.values.dtype)})

    def __repr__(self) -> str:
        return self.__str__()


@dataclass(frozen=True)
class PotentialSpec:
    """Pair potential of the Hartree term.

    kind is one of 'riesz' (|x|^-a with 1 < a < d), 'delta' or 'none'.
    """

    kind: str
    a: Optional[Rational] = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "riesz":
            if self.a is None:
                raise ValueError("riesz potential needs an exponent")
            object.__setattr__(self, "a", parse_rational(self.a, "riesz exponent"))
            if not self.a > 0:
                raise ValueError("riesz exponent must be positive")
        elif self.a is not None:
            raise ValueError(f"{self.kind} potential takes no exponent")

    @classmethod
    def riesz(cls, a) -> "PotentialSpec":
        return cls("riesz", a)

    @classmethod
    def delta(cls) -> "PotentialSpec":
        return cls("delta")

    @classmethod
    def none(cls) -> "PotentialSpec":
        return cls("none")

    @classmethod
    def from_string(cls, text: str) -> "PotentialSpec":
        """Parses 'riesz(3/2)', 'delta' or 'none'."""
        text = text.strip().lower()
        if text in ("delta", "none"):
            return cls(text)
        if text.startswith("riesz(") and text.endswith(")"):
            return cls("riesz", text[len("riesz(") : -1])
        raise ValueError(f"unknown potential {text!r}")

    def __str__(self) -> str:
        if self.kind == "riesz":
            return f"riesz({self.a})"
        return self.kind


def _as_grid_function(f) -> GridFunction:
    if not isinstance(f, GridFunction):
        raise TypeError("expected a GridFunction")
    return f


def _unitary_factor(grid: Grid) -> np.ndarray:
    # h^d (2 pi)^(-d/2) e^{i xi . L}; the phase accounts for the box starting at -L
    phase = np.ones(grid.shape, dtype=complex)
    for axis in range(grid.d):
        phase = phase * np.exp(1j * grid.wavenumber(axis) * grid.L)
    return grid.cell_volume * (2.0 * np.pi) ** (-grid.d / 2.0) * phase


def forward_transform(f: GridFunction) -> GridFunction:
    """Unitary Fourier coefficients of f in FFT order.

    The coefficients approximate the continuous transform
    (2 pi)^(-d/2) int f(x) e^{-i x xi} dx at the grid wavenumbers, so that
    sum |f|^2 h^d equals sum |f^|^2 (pi/L)^d.
    """
    f = _as_grid_function(f)
    return GridFunction(f.grid, f.grid.fft(f.values) * _unitary_factor(f.grid))


def inverse_transform(coefficients: GridFunction) -> GridFunction:
    coefficients = _as_grid_function(coefficients)
    grid = coefficients.grid
    return GridFunction(grid, grid.ifft(coefficients.values / _unitary_factor(grid)))


def apply_multiplier(f: GridFunction, symbol: Union[np.ndarray, Callable]) -> GridFunction:
    """Applies the Fourier multiplier symbol(xi).

    symbol is an array in FFT order or a callable receiving the d
    broadcastable wavenumber arrays.
    """
    f = _as_grid_function(f)
    grid = f.grid
    if callable(symbol):
        symbol = symbol(*[grid.wavenumber(axis) for axis in range(grid.d)])
    return GridFunction(grid, grid.apply_symbol(f.values, symbol))


def free_propagator_symbol(grid: Grid, t: float) -> np.ndarray:
    return np.exp(-1j * t * grid.ksq)


def apply_free_propagator(f: GridFunction, t: float) -> GridFunction:
    """e^{i t Delta} f, the free Schroedinger flow i d_t f = -Delta f."""
    f = _as_grid_function(f)
    return GridFunction(f.grid, f.grid.apply_symbol(f.values, free_propagator_symbol(f.grid, t)))


def derivative(f: GridFunction, axis: int) -> GridFunction:
    f = _as_grid_function(f)
    return GridFunction(f.grid, f.grid.apply_symbol(f.values, 1j * f.grid.wavenumber(axis)))


def translate(f: GridFunction, shift: Sequence[float]) -> GridFunction:
    """Spectral translate f(x - shift)."""
    f = _as_grid_function(f)
    return GridFunction(f.grid, f.grid.apply_symbol(f.values, f.grid.shift_symbol(shift)))


def riesz_constant(d: int, a: float) -> float:
    """Constant c with Fourier transform of |x|^-a equal to c |xi|^(a-d)."""
    return (
        2.0 ** (d - a)
        * np.pi ** (d / 2.0)
        * gamma_function((d - a) / 2.0)
        / gamma_function(a / 2.0)
    )


def riesz_symbol(grid: Grid, a) -> np.ndarray:
    """Multiplier of convolution with |x|^-a on plain FFT coefficients.

    Requires 1 < a < d. The zero mode takes the value at the lowest
    nonzero wavenumber pi/L, which shifts v * rho by a constant only.
    """
    a = float(a)
    if not 1.0 < a < grid.d:
        raise ValueError(f"riesz exponent must lie in (1, {grid.d}), got {a}")
    ksq = grid.ksq.copy()
    ksq.flat[0] = (np.pi / grid.L) ** 2
    return riesz_constant(grid.d, a) * ksq ** ((a - grid.d) / 2.0)


def potential_symbol(grid: Grid, spec: PotentialSpec) -> Optional[np.ndarray]:
    """Multiplier of v * ., or None for the zero potential."""
    if spec.kind == "none":
        return None
    if spec.kind == "delta":
        return np.ones(grid.shape)
    return riesz_symbol(grid, spec.a)


def convolve_values(grid: Grid, values: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    """Array form of convolve_potential."""
    if spec.kind == "none":
        return np.zeros_like(values)
    if spec.kind == "delta":
        return values.copy()
    result = grid.apply_symbol(values, riesz_symbol(grid, spec.a))
    if np.isrealobj(values):
        return result.real
    return result


def convolve_potential(rho: GridFunction, spec: PotentialSpec) -> GridFunction:
    """v * rho for the pair potential spec; real input gives real output."""
    rho = _as_grid_function(rho)
    return GridFunction(rho.grid, convolve_values(rho.grid, rho.values, spec))


def lp_values_norm(grid: Grid, values: np.ndarray, p: float) -> float:
    if p == np.inf:
        return float(np.max(np.abs(values))) if values.size else 0.0
    if p <= 0:
        raise ValueError("p must be positive")
    return float((grid.cell_volume * np.sum(np.abs(values) ** p)) ** (1.0 / p))


def lp_norm(f: GridFunction, p: float) -> float:
    """Quadrature L^p norm, p in (0, inf]."""
    f = _as_grid_function(f)
    return lp_values_norm(f.grid, f.values, p)


def boundary_region(grid: Grid, fraction: float = BOUNDARY_FRACTION) -> np.ndarray:
    """Mask of points within fraction * L of the box boundary."""
    inner = grid.L * (1.0 - fraction)
    mask = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.d):
        mask = mask | (np.abs(grid.coordinate(axis)) >= inner)
    return mask


def boundary_mass(density: GridFunction, fraction: float = BOUNDARY_FRACTION) -> float:
    """Share of the total mass of density sitting near the boundary."""
    density = _as_grid_function(density)
    values = np.abs(np.real(density.values))
    total = np.sum(values)
    if total == 0:
        return 0.0
    return float(np.sum(values[boundary_region(density.grid, fraction)]) / total)
