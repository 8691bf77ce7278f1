"""Uniform periodic 1-D lattices and the unitary position/momentum transform.

Units are dimensionless with hbar = 1. A lattice of ``N`` points on a box of
length ``L`` carries positions ``x_j = -L/2 + j*dx`` and momenta
``k_m = 2*pi*m/L`` for ``m`` in ``[-N/2, N/2)``. The transform samples the
symmetric continuum convention::

    psi~(k) = dx/sqrt(2 pi) * sum_j psi(x_j) exp(-i k x_j)
    psi(x)  = dk/sqrt(2 pi) * sum_m psi~(k_m) exp(+i k_m x)

which is unitary in the cell measures (dx for positions, dk for momenta)
because ``dx * dk * N = 2 pi``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

MIN_POINTS = 8
# Amplitude (relative to peak) below which a profile is considered decayed at the periodic seam.
SEAM_TOLERANCE = 1e-6
_SQRT_2PI = np.sqrt(2.0 * np.pi)


class LatticeError(ValueError):
    """Invalid lattice construction or lattice-incompatible request."""


class Rep(str, enum.Enum):
    POSITION = "position"
    MOMENTUM = "momentum"

    @classmethod
    def parse(cls, value: "Rep | str") -> "Rep":
        if isinstance(value, Rep):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise LatticeError(
                f"unknown representation {value!r}; expected 'position' or 'momentum'"
            ) from None

    def other(self) -> "Rep":
        return Rep.MOMENTUM if self is Rep.POSITION else Rep.POSITION


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic lattice with matched position and momentum samples."""

    n_points: int
    length: float

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < MIN_POINTS:
            raise LatticeError(f"n_points must be an integer >= {MIN_POINTS}, got {self.n_points}")
        if self.n_points % 2:
            raise LatticeError(f"n_points must be even, got {self.n_points}")
        if not np.isfinite(self.length) or self.length <= 0:
            raise LatticeError(f"length must be positive, got {self.length}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "length", float(self.length))

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def momentum_spacing(self) -> float:
        return 2.0 * np.pi / self.length

    @cached_property
    def positions(self) -> np.ndarray:
        x = (np.arange(self.n_points) - self.n_points // 2) * self.spacing
        x.setflags(write=False)
        return x

    @cached_property
    def momenta(self) -> np.ndarray:
        k = (np.arange(self.n_points) - self.n_points // 2) * self.momentum_spacing
        k.setflags(write=False)
        return k

    def values(self, rep: Rep | str) -> np.ndarray:
        return self.positions if Rep.parse(rep) is Rep.POSITION else self.momenta

    def cell(self, rep: Rep | str) -> float:
        return self.spacing if Rep.parse(rep) is Rep.POSITION else self.momentum_spacing

    def period(self, rep: Rep | str) -> float:
        return self.n_points * self.cell(rep)

    def wrap(self, delta, rep: Rep | str = Rep.POSITION):
        """Minimum-image representative of ``delta`` in ``[-P/2, P/2)``."""
        period = self.period(rep)
        return np.mod(np.asarray(delta) + 0.5 * period, period) - 0.5 * period

    def snap(self, value: float, rep: Rep | str = Rep.POSITION) -> tuple[int, float, float]:
        """Nearest lattice sample to ``value``: ``(index, snapped_value, snap_distance)``.

        Values outside the lattice range are rejected rather than wrapped.
        """
        rep = Rep.parse(rep)
        vals = self.values(rep)
        cell = self.cell(rep)
        lo, hi = vals[0] - 0.5 * cell, vals[-1] + 0.5 * cell
        if not (lo <= value < hi):
            raise LatticeError(
                f"{rep.value} value {value} outside lattice range [{lo:.6g}, {hi:.6g})"
            )
        idx = int(np.argmin(np.abs(vals - value)))
        return idx, float(vals[idx]), float(vals[idx] - value)


def make_grid(n_points: int, length: float) -> Grid1D:
    return Grid1D(n_points, length)


@dataclass(frozen=True)
class ComplexVector:
    grid: Grid1D
    values: np.ndarray
    rep: Rep = Rep.POSITION

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise LatticeError(
                f"vector of shape {values.shape} does not match grid of {self.grid.n_points} points"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "rep", Rep.parse(self.rep))

    @property
    def cell(self) -> float:
        return self.grid.cell(self.rep)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell))

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def _sign(n_points: int) -> np.ndarray:
    # exp(-i k_m x_0) with x_0 = -L/2 reduces to (-1)^m
    m = np.arange(n_points) - n_points // 2
    return np.where(m % 2 == 0, 1.0, -1.0)


def _shape_for(axis: int, ndim: int, n: int) -> tuple[int, ...]:
    shape = [1] * ndim
    shape[axis] = n
    return tuple(shape)


def fourier(values: np.ndarray, grid: Grid1D, axis: int = -1, inverse: bool = False) -> np.ndarray:
    """Apply the lattice transform along one axis of an array.

    ``inverse=False`` maps position samples to momentum samples; ``inverse=True``
    maps momentum samples back to positions.
    """
    values = np.asarray(values, dtype=complex)
    axis = axis % values.ndim
    n = grid.n_points
    if values.shape[axis] != n:
        raise LatticeError(f"axis {axis} has length {values.shape[axis]}, grid has {n}")
    sign = _sign(n).reshape(_shape_for(axis, values.ndim, n))
    if not inverse:
        out = np.fft.fftshift(np.fft.fft(values, axis=axis), axes=axis)
        return out * (sign * (grid.spacing / _SQRT_2PI))
    shifted = np.fft.ifftshift(values * sign, axes=axis)
    return np.fft.ifft(shifted, axis=axis) * (n * grid.momentum_spacing / _SQRT_2PI)


def transform_1d(vec: ComplexVector, target: Rep | str) -> ComplexVector:
    target = Rep.parse(target)
    if target is vec.rep:
        return vec
    out = fourier(vec.values, vec.grid, inverse=target is Rep.POSITION)
    return ComplexVector(vec.grid, out, target)


def min_width(grid: Grid1D) -> float:
    """Smallest regularization width the lattice resolves (half a cell)."""
    return 0.5 * grid.spacing


def seam_amplitude(distance: float, width: float) -> float:
    """Relative amplitude of a width-``width`` Gaussian kernel at ``distance`` from its center."""
    return float(np.exp(-(distance**2) / (4.0 * width**2)))


def gaussian_profile(grid: Grid1D, center: float, width: float, rep: Rep | str = Rep.POSITION) -> np.ndarray:
    """Unnormalized periodic Gaussian amplitude whose square has standard deviation ``width``."""
    delta = grid.wrap(grid.values(rep) - center, rep)
    return np.exp(-(delta**2) / (4.0 * width**2))


def gaussian_kernel(grid: Grid1D, center: float, width: float) -> ComplexVector:
    """Normalized Gaussian standing in for ``delta(x - center)``.

    ``|values|**2`` is a Gaussian density with standard deviation ``width``,
    laid out with periodic (minimum-image) distance on the lattice.
    """
    if not width >= min_width(grid):
        raise LatticeError(
            f"kernel width {width} below lattice resolution {min_width(grid):.6g} (aliased delta)"
        )
    half = 0.5 * grid.length
    if not (-half <= center < half):
        raise LatticeError(f"kernel center {center} outside grid [{-half}, {half})")
    values = gaussian_profile(grid, center, width)
    values = values / np.sqrt(np.sum(values**2) * grid.spacing)
    return ComplexVector(grid, values.astype(complex), Rep.POSITION)


def plane_wave(grid: Grid1D, k: float) -> ComplexVector:
    """``exp(i k x)/sqrt(L)`` with ``k`` snapped to the lattice."""
    _, k_snapped, _ = grid.snap(k, Rep.MOMENTUM)
    values = np.exp(1j * k_snapped * grid.positions) / np.sqrt(grid.length)
    return ComplexVector(grid, values, Rep.POSITION)


def circular_moments(pmf: np.ndarray, values: np.ndarray, period: float) -> tuple[float, float]:
    """Mean and variance of a distribution on a circle of circumference ``period``.

    Values are lifted to the minimum image around the circular mean before the
    ordinary moments are taken, which is exact for distributions concentrated
    well inside half a period.
    """
    pmf = np.asarray(pmf, dtype=float)
    pmf = pmf / pmf.sum()
    angle = np.angle(np.sum(pmf * np.exp(2j * np.pi * values / period)))
    center = angle * period / (2 * np.pi)
    lifted = center + (np.mod(values - center + 0.5 * period, period) - 0.5 * period)
    mean = float(np.sum(pmf * lifted))
    return mean, float(np.sum(pmf * (lifted - mean) ** 2))


def index_combination_pmf(joint: np.ndarray, sign: int) -> np.ndarray:
    """pmf over ``(i + sign*j) mod n`` for a joint mass array indexed ``[i, j]``."""
    n = joint.shape[0]
    rows = np.arange(n)[:, None]
    shifts = np.arange(n)[None, :]
    cols = ((shifts - rows) * sign) % n
    return joint[rows, cols].sum(axis=0)
