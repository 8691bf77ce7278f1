"""Multi-particle tensor states: the EPR pair and the particle-particle-diaphragm state.

Every axis of a :class:`StateTensor` shares one :class:`~gedanken.lattice.Grid1D`
and carries its own representation tag. Norms are taken in the mixed cell
measure (``dx`` per position axis, ``dk`` per momentum axis).

Dirac deltas are regularized as periodic Gaussians of density width ``sigma``.
The EPR ridge ``delta(x1 - x2 - d)`` is regularized through its composition
``int da delta(x1 - a) delta(x2 + d - a)``, which gives the relative coordinate
a density width of ``sqrt(2) * sigma``. That makes the EPR pair and the
diaphragm state postselected on ``K = K0`` the same object on the lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .lattice import (
    SEAM_TOLERANCE,
    Grid1D,
    LatticeError,
    Rep,
    circular_moments,
    fourier,
    index_combination_pmf,
    gaussian_profile,
    min_width,
    seam_amplitude,
)

EPR_LABELS = ("particle1", "particle2")
BOHR_LABELS = ("particle1", "particle2", "diaphragm")
NORM_TOLERANCE = 1e-10
MAX_POINTS_3D = 128


class StateError(ValueError):
    """Invalid state construction or an operation on an unknown axis."""


@dataclass(frozen=True)
class Envelope:
    """Transverse profile of an incident particle: ``unit`` or ``gaussian``."""

    kind: str = "unit"
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        kind = str(self.kind).strip().lower()
        if kind not in ("unit", "gaussian"):
            raise StateError(f"envelope kind must be 'unit' or 'gaussian', got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "center", float(self.center))
        object.__setattr__(self, "width", float(self.width))

    def sample(self, grid: Grid1D) -> np.ndarray:
        if self.kind == "unit":
            return np.ones(grid.n_points)
        if self.width < min_width(grid):
            raise StateError(f"envelope width {self.width} below lattice resolution")
        return gaussian_profile(grid, self.center, self.width)


@dataclass(frozen=True)
class PreparationParams:
    d: float = 3.0
    sigma: float = 0.15
    K0: float = 0.0
    envelopes: tuple[Envelope, Envelope] = (Envelope(), Envelope())

    def __post_init__(self):
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "K0", float(self.K0))
        if len(self.envelopes) != 2:
            raise StateError("exactly two envelopes are required")
        object.__setattr__(self, "envelopes", tuple(self.envelopes))


def resolve_preparation(grid: Grid1D, params: PreparationParams) -> tuple[PreparationParams, list[str]]:
    """Validate ``params`` on ``grid`` and snap ``K0`` onto the momentum lattice.

    Returns the resolved parameters and human-readable notes (snaps, seam warnings).
    Raises :class:`StateError` when the preparation cannot be represented.
    """
    notes: list[str] = []
    if not params.sigma >= min_width(grid):
        raise StateError(
            f"sigma={params.sigma} below lattice resolution {min_width(grid):.6g} (aliased delta)"
        )
    # the relative coordinate x1 - x2 must decay before the periodic seam at |x1 - x2| = L/2
    ridge_width = np.sqrt(2.0) * params.sigma
    gap = 0.5 * grid.length - abs(params.d)
    if gap <= 0 or seam_amplitude(gap, ridge_width) >= SEAM_TOLERANCE:
        raise StateError(
            f"d={params.d} too close to the grid extent L={grid.length}: "
            f"the ridge wraps across the periodic seam"
        )
    try:
        _, k0, dist = grid.snap(params.K0, Rep.MOMENTUM)
    except LatticeError as exc:
        raise StateError(f"K0: {exc}") from None
    if dist != 0.0:
        notes.append(f"K0 snapped from {params.K0!r} to {k0!r} (distance {dist:.6g})")
    for name, env in zip(EPR_LABELS, params.envelopes):
        if env.kind != "gaussian":
            continue
        if env.width < min_width(grid):
            raise StateError(f"{name} envelope width {env.width} below lattice resolution")
        edge = seam_amplitude(0.5 * grid.length - abs(float(grid.wrap(env.center))), env.width)
        if edge >= SEAM_TOLERANCE:
            notes.append(
                f"wrapped: {name} envelope amplitude {edge:.3g} at the periodic seam exceeds {SEAM_TOLERANCE:g}"
            )
    return replace(params, K0=k0), notes


@dataclass(frozen=True)
class StateTensor:
    grid: Grid1D
    amplitudes: np.ndarray
    reps: tuple[Rep, ...]
    labels: tuple[str, ...]
    notes: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        reps = tuple(Rep.parse(r) for r in self.reps)
        labels = tuple(self.labels)
        if not 1 <= amps.ndim <= 3:
            raise StateError(f"states have 1 to 3 axes, got {amps.ndim}")
        if amps.shape != (self.grid.n_points,) * amps.ndim:
            raise StateError(f"amplitude shape {amps.shape} does not match grid")
        if len(reps) != amps.ndim or len(labels) != amps.ndim:
            raise StateError("one representation tag and one label per axis are required")
        if len(set(labels)) != len(labels):
            raise StateError(f"axis labels must be unique, got {labels}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "reps", reps)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "notes", tuple(self.notes))

    @property
    def n_axes(self) -> int:
        return self.amplitudes.ndim

    def axis_index(self, axis: int | str) -> int:
        if isinstance(axis, str):
            try:
                return self.labels.index(axis)
            except ValueError:
                raise StateError(f"unknown axis {axis!r}; axes are {self.labels}") from None
        if not -self.n_axes <= axis < self.n_axes:
            raise StateError(f"axis index {axis} out of range for {self.n_axes} axes")
        return axis % self.n_axes

    @property
    def cells(self) -> tuple[float, ...]:
        return tuple(self.grid.cell(r) for r in self.reps)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cells))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.cell_volume))


def normalize(state: StateTensor) -> StateTensor:
    norm = state.norm()
    if not norm > 0 or not np.isfinite(norm):
        raise StateError("cannot normalize a zero-norm state")
    return replace(state, amplitudes=state.amplitudes / norm)


def _relative_profile(grid: Grid1D, offset: np.ndarray, width: float) -> np.ndarray:
    delta = grid.wrap(offset)
    return np.exp(-(delta**2) / (4.0 * width**2))


def build_epr_state(grid: Grid1D, params: PreparationParams) -> StateTensor:
    """Regularized ``delta(x1 - x2 - d)`` with uniform center-of-mass weight.

    The center of mass is spread uniformly over the periodic grid, so both
    joint representations are exact lattice ridges: ``x1 = x2 + d`` in
    position and ``k1 = -k2`` in momentum.
    """
    params, notes = resolve_preparation(grid, params)
    x = grid.positions
    amps = _relative_profile(grid, x[:, None] - x[None, :] - params.d, np.sqrt(2.0) * params.sigma)
    state = StateTensor(grid, amps, (Rep.POSITION, Rep.POSITION), EPR_LABELS, tuple(notes))
    return normalize(state)


def build_bohr_state(grid: Grid1D, params: PreparationParams) -> StateTensor:
    """Two particles and the movable double-slit diaphragm after passage.

    Amplitude on ``(x1, x2, a)``::

        delta_s(x1 - a) * delta_s(x2 + d - a) * Phi1(x1) * Phi2(x2) * exp(i K0 a)

    regularized first and normalized globally afterwards.
    """
    if grid.n_points > MAX_POINTS_3D:
        raise StateError(f"3-axis states are limited to n_points <= {MAX_POINTS_3D}")
    params, notes = resolve_preparation(grid, params)
    x = grid.positions
    a = grid.positions
    slit1 = _relative_profile(grid, x[:, None] - a[None, :], params.sigma)
    slit2 = _relative_profile(grid, x[:, None] + params.d - a[None, :], params.sigma)
    phi1 = params.envelopes[0].sample(grid)
    phi2 = params.envelopes[1].sample(grid)
    phase = np.exp(1j * params.K0 * a)
    amps = (
        (slit1 * phi1[:, None])[:, None, :]
        * (slit2 * phi2[:, None])[None, :, :]
        * phase[None, None, :]
    )
    state = StateTensor(grid, amps, (Rep.POSITION,) * 3, BOHR_LABELS, tuple(notes))
    return normalize(state)


def product_state(grid: Grid1D, factors: Sequence[np.ndarray], labels: Sequence[str], reps: Sequence[Rep | str] | None = None) -> StateTensor:
    """Unentangled state from one amplitude vector per axis."""
    amps = np.asarray(factors[0], dtype=complex)
    for f in factors[1:]:
        amps = np.multiply.outer(amps, np.asarray(f, dtype=complex))
    reps = tuple(reps) if reps is not None else (Rep.POSITION,) * len(factors)
    return normalize(StateTensor(grid, amps, reps, tuple(labels)))


def transform_axis(state: StateTensor, axis: int | str, target: Rep | str) -> StateTensor:
    idx = state.axis_index(axis)
    target = Rep.parse(target)
    if state.reps[idx] is target:
        return state
    amps = fourier(state.amplitudes, state.grid, axis=idx, inverse=target is Rep.POSITION)
    reps = state.reps[:idx] + (target,) + state.reps[idx + 1:]
    return replace(state, amplitudes=amps, reps=reps)


def to_reps(state: StateTensor, reps: Sequence[Rep | str]) -> StateTensor:
    if len(reps) != state.n_axes:
        raise StateError(f"expected {state.n_axes} representation tags, got {len(reps)}")
    for label, rep in zip(state.labels, reps):
        state = transform_axis(state, label, rep)
    return state


def swap_axes(state: StateTensor, axis_a: int | str, axis_b: int | str) -> StateTensor:
    """Exchange the amplitudes of two axes while keeping the label order."""
    i, j = state.axis_index(axis_a), state.axis_index(axis_b)
    reps = list(state.reps)
    reps[i], reps[j] = reps[j], reps[i]
    return replace(state, amplitudes=np.swapaxes(state.amplitudes, i, j), reps=tuple(reps))


def axis_marginal(state: StateTensor, axis: int | str) -> np.ndarray:
    """Probability density of one axis in its current representation."""
    idx = state.axis_index(axis)
    others = tuple(i for i in range(state.n_axes) if i != idx)
    weight = float(np.prod([state.cells[i] for i in others]))
    return np.sum(np.abs(state.amplitudes) ** 2, axis=others) * weight


def expectation(state: StateTensor, axis: int | str, observable: Rep | str, moment: int = 1) -> float:
    if moment not in (1, 2):
        raise StateError(f"moment must be 1 or 2, got {moment}")
    observable = Rep.parse(observable)
    state = transform_axis(state, axis, observable)
    density = axis_marginal(state, axis)
    values = state.grid.values(observable)
    return float(np.sum(values**moment * density) * state.grid.cell(observable))


def separation_moments(state: StateTensor, axis_a: int | str, axis_b: int | str) -> tuple[float, float]:
    """Mean and variance of ``x_a - x_b`` on the periodic lattice.

    Differences are taken as minimum images around their circular mean, so
    the ridge of the center-of-mass-uniform states is not split at the seam.
    """
    i, j = state.axis_index(axis_a), state.axis_index(axis_b)
    if i == j:
        raise StateError("separation needs two distinct axes")
    state = transform_axis(transform_axis(state, i, Rep.POSITION), j, Rep.POSITION)
    grid = state.grid
    others = tuple(ax for ax in range(state.n_axes) if ax not in (i, j))
    joint = np.sum(np.abs(state.amplitudes) ** 2, axis=others)
    if i > j:
        joint = joint.T
    pmf = index_combination_pmf(joint, -1)
    diffs = np.arange(grid.n_points) * grid.spacing
    return circular_moments(pmf, diffs, grid.length)
