"""Postselection, densities and the scalar metrics used to check correlations."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .lattice import Grid1D, LatticeError, Rep, circular_moments, index_combination_pmf
from .states import StateTensor, axis_marginal, to_reps, transform_axis

NULL_PROBABILITY = 1e-14
DENSITY_TOLERANCE = 1e-10
# mean resultant length above which conditional distributions count as concentrated on the circle
RIDGE_CONCENTRATION = 0.5


class MeasurementError(ValueError):
    """Invalid measurement request or a null-probability outcome."""


@dataclass(frozen=True)
class PointerSpec:
    """Pointer outcome used for postselection; ``smearing == 0`` means a sharp slice."""

    axis: str
    basis: Rep
    value: float
    smearing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "basis", Rep.parse(self.basis))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "smearing", float(self.smearing))
        if self.smearing < 0:
            raise MeasurementError(f"pointer smearing must be >= 0, got {self.smearing}")

    def validate(self, grid: Grid1D) -> None:
        try:
            grid.snap(self.value, self.basis)
        except LatticeError as exc:
            raise MeasurementError(f"pointer value: {exc}") from None
        if 0 < self.smearing < grid.cell(self.basis):
            raise MeasurementError(
                f"pointer smearing {self.smearing} is finer than one lattice cell ({grid.cell(self.basis):.6g})"
            )


@dataclass(frozen=True)
class PostselectionResult:
    state: StateTensor
    probability: float
    outcome: float
    snap_distance: float = 0.0


@dataclass(frozen=True)
class Density:
    grid: Grid1D
    axes: tuple[str, ...]
    reps: tuple[Rep, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        axes, reps = tuple(self.axes), tuple(Rep.parse(r) for r in self.reps)
        if not axes:
            raise MeasurementError("a density needs at least one axis")
        if len(reps) != len(axes) or values.shape != (self.grid.n_points,) * len(axes):
            raise MeasurementError(f"density shape {values.shape} inconsistent with axes {axes}")
        if len(set(axes)) != len(axes):
            raise MeasurementError(f"density axes must be unique, got {axes}")
        if np.any(values < 0):
            raise MeasurementError("density has negative entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "reps", reps)

    @property
    def cells(self) -> tuple[float, ...]:
        return tuple(self.grid.cell(r) for r in self.reps)

    @property
    def cell(self) -> float:
        return float(np.prod(self.cells))

    def total(self) -> float:
        return float(np.sum(self.values) * self.cell)

    def coordinates(self, axis: int | str) -> np.ndarray:
        return self.grid.values(self.reps[self.axis_index(axis)])

    def axis_index(self, axis: int | str) -> int:
        if isinstance(axis, str):
            if axis not in self.axes:
                raise MeasurementError(f"unknown axis {axis!r}; axes are {self.axes}")
            return self.axes.index(axis)
        return axis % len(self.axes)


@dataclass(frozen=True)
class CorrelationReport:
    """Ridge line ``axis0 = slope * axis1 + offset`` plus correlation and flatness."""

    ridge_slope: float
    ridge_offset: float
    pearson: float
    flatness_tv: float
    periodic: bool = field(default=False, compare=False)


def _normalized(density: Density) -> Density:
    total = density.total()
    if not total > NULL_PROBABILITY:
        raise MeasurementError("density has no mass")
    return replace(density, values=density.values / total)


def uniform_density(grid: Grid1D, axes: Sequence[str], reps: Sequence[Rep | str]) -> Density:
    reps = tuple(Rep.parse(r) for r in reps)
    vol = float(np.prod([grid.period(r) for r in reps]))
    return Density(grid, tuple(axes), reps, np.full((grid.n_points,) * len(axes), 1.0 / vol))


def joint_density(state: StateTensor, reps: Sequence[Rep | str] | None = None) -> Density:
    if reps is not None:
        state = to_reps(state, reps)
    values = np.abs(state.amplitudes) ** 2
    return _normalized(Density(state.grid, state.labels, state.reps, values))


def marginal(density: Density, keep: Sequence[str]) -> Density:
    keep = tuple(keep)
    if not keep:
        raise MeasurementError("marginal needs at least one axis to keep")
    idx = [density.axis_index(a) for a in keep]
    drop = tuple(i for i in range(len(density.axes)) if i not in idx)
    weight = float(np.prod([density.cells[i] for i in drop])) if drop else 1.0
    values = np.sum(density.values, axis=drop) * weight if drop else density.values
    # remaining axes keep their original order; reorder to the requested order
    remaining = [i for i in range(len(density.axes)) if i in idx]
    values = np.transpose(values, [remaining.index(i) for i in idx])
    return _normalized(Density(density.grid, keep, tuple(density.reps[i] for i in idx), values))


def conditional(density: Density, given_axis: str, given_value: float) -> Density:
    i = density.axis_index(given_axis)
    if len(density.axes) < 2:
        raise MeasurementError("conditioning needs at least two axes")
    try:
        j, _, _ = density.grid.snap(given_value, density.reps[i])
    except LatticeError as exc:
        raise MeasurementError(str(exc)) from None
    values = np.take(density.values, j, axis=i)
    axes = density.axes[:i] + density.axes[i + 1:]
    reps = density.reps[:i] + density.reps[i + 1:]
    sliced = Density(density.grid, axes, reps, values)
    if not sliced.total() > NULL_PROBABILITY:
        raise MeasurementError(f"conditional on {given_axis}={given_value} has null mass")
    return _normalized(sliced)


def total_variation(d1: Density, d2: Density) -> float:
    if d1.grid != d2.grid or d1.axes != d2.axes or d1.reps != d2.reps:
        raise MeasurementError(
            f"mismatched supports: {d1.axes}/{[r.value for r in d1.reps]} vs "
            f"{d2.axes}/{[r.value for r in d2.reps]}"
        )
    tv = 0.5 * float(np.sum(np.abs(d1.values - d2.values)) * d1.cell)
    return min(max(tv, 0.0), 1.0)


def flatness(density: Density) -> float:
    """Total variation distance from the uniform density on the same lattice."""
    return total_variation(density, uniform_density(density.grid, density.axes, density.reps))


def combination_moments(density: Density, sign: int = 1) -> tuple[float, float]:
    """Mean and variance of ``axis0 + sign * axis1`` for a two-axis density.

    Both axes must share a representation; the combination lives on the
    lattice circle and is lifted around its circular mean.
    """
    if len(density.axes) != 2 or density.reps[0] is not density.reps[1]:
        raise MeasurementError("combination moments need two axes in the same representation")
    if sign not in (1, -1):
        raise MeasurementError(f"sign must be +1 or -1, got {sign}")
    rep = density.reps[0]
    grid = density.grid
    pmf = index_combination_pmf(density.values, sign)
    # index offset of the combined origin: x_i + s*x_j = (i + s*j)*cell + (1 + s)*x_0
    origin = (1 + sign) * grid.values(rep)[0]
    values = origin + np.arange(grid.n_points) * grid.cell(rep)
    return circular_moments(pmf, values, grid.period(rep))


def _weighted_pearson(p: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    mu, mv = np.sum(p * u), np.sum(p * v)
    cov = np.sum(p * (u - mu) * (v - mv))
    var_u, var_v = np.sum(p * (u - mu) ** 2), np.sum(p * (v - mv) ** 2)
    if var_u <= 0 or var_v <= 0:
        return 0.0
    return float(np.clip(cov / np.sqrt(var_u * var_v), -1.0, 1.0))


def ridge_fit(density: Density) -> CorrelationReport:
    """Fit the ridge ``axis0 = slope * axis1 + offset`` of a two-axis density.

    Conditional means of axis 0 given each axis-1 column are weighted by the
    column mass. When those conditionals are concentrated, the means are taken
    on the circle and unwrapped along axis 1, so ridges crossing the periodic
    seam fit as straight lines; pearson is then computed on the lifted
    coordinate nearest the fitted line. Diffuse densities use plain moments.
    """
    if len(density.axes) != 2:
        raise MeasurementError("ridge_fit needs a two-axis density")
    density = _normalized(density)
    grid = density.grid
    p = density.values / np.sum(density.values)
    u, v = density.coordinates(0), density.coordinates(1)
    period = grid.period(density.reps[0])
    weights = p.sum(axis=0)
    live = weights > 1e-12 * weights.max()
    if np.count_nonzero(live) < 2:
        raise MeasurementError("degenerate density: support is a single column")
    flat_tv = flatness(density)

    z = np.sum(p * np.exp(2j * np.pi * u / period)[:, None], axis=0)
    resultant = np.abs(z[live]) / weights[live]
    periodic = float(np.sum(weights[live] * resultant)) >= RIDGE_CONCENTRATION
    if periodic:
        means = np.unwrap(np.angle(z[live]) * period / (2 * np.pi), period=period)
    else:
        means = np.sum(p * u[:, None], axis=0)[live] / weights[live]
    w, x = weights[live], v[live]
    xm = np.sum(w * x) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    if sxx <= 0:
        raise MeasurementError("degenerate density: no spread along axis 1")
    ym = np.sum(w * means) / np.sum(w)
    slope = float(np.sum(w * (x - xm) * (means - ym)) / sxx)
    offset = float(ym - slope * xm)

    uu, vv = np.meshgrid(u, v, indexing="ij")
    if periodic:
        offset = float(grid.wrap(offset, density.reps[0]))
        line = slope * vv + offset
        uu = line + grid.wrap(uu - line, density.reps[0])
    pearson = _weighted_pearson(p, uu, vv)
    return CorrelationReport(slope, offset, pearson, flat_tv, periodic)


def pointer_spectrum(state: StateTensor, axis: str, basis: Rep | str) -> Density:
    basis = Rep.parse(basis)
    state = transform_axis(state, axis, basis)
    idx = state.axis_index(axis)
    values = axis_marginal(state, idx)
    return _normalized(Density(state.grid, (state.labels[idx],), (basis,), values))


def _pointer_state(grid: Grid1D, basis: Rep, center: float, smearing: float) -> np.ndarray:
    delta = grid.wrap(grid.values(basis) - center, basis)
    phi = np.exp(-(delta**2) / (4.0 * smearing**2))
    return phi / np.sqrt(np.sum(phi**2) * grid.cell(basis))


def postselect(state: StateTensor, pointer: PointerSpec) -> PostselectionResult:
    """Condition ``state`` on a pointer outcome and drop the pointer axis.

    The axis is moved to ``pointer.basis``; a sharp pointer slices the nearest
    lattice outcome, a smeared one contracts against a normalized Gaussian
    pointer state. ``probability`` is the outcome's mass (density times cell
    for sharp pointers).
    """
    if state.n_axes < 2:
        raise MeasurementError("postselection needs at least two axes")
    pointer.validate(state.grid)
    idx = state.axis_index(pointer.axis)
    state = transform_axis(state, idx, pointer.basis)
    grid = state.grid
    cell = grid.cell(pointer.basis)
    j, outcome, snap = grid.snap(pointer.value, pointer.basis)
    if pointer.smearing == 0:
        amps = np.take(state.amplitudes, j, axis=idx)
        weight = cell
    else:
        phi = _pointer_state(grid, pointer.basis, outcome, pointer.smearing)
        amps = np.tensordot(state.amplitudes, phi.conj() * cell, axes=([idx], [0]))
        weight = 1.0
    reps = state.reps[:idx] + state.reps[idx + 1:]
    labels = state.labels[:idx] + state.labels[idx + 1:]
    rest = float(np.prod([grid.cell(r) for r in reps]))
    probability = float(np.sum(np.abs(amps) ** 2) * rest * weight)
    if not probability >= NULL_PROBABILITY:
        raise MeasurementError(
            f"postselection on null outcome ({pointer.axis}={outcome} in {pointer.basis.value} basis, "
            f"probability {probability:.3g})"
        )
    survivor = StateTensor(grid, amps / np.sqrt(probability / weight), reps, labels, state.notes)
    return PostselectionResult(survivor, min(probability, 1.0), outcome, snap)
