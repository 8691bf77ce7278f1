"""Scripted gedanken scenarios built from states and measurements.

Alice holds particle 1 and Bob particle 2. The diaphragm pointer is read out
either in momentum (``K``, the corrected protocol) or in position (``X``,
Bohr's protocol). Alice's image plane corresponds to the position basis and
Bob's back focal plane to the momentum basis.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from .lattice import Grid1D, Rep
from .measurement import (
    CorrelationReport,
    Density,
    PointerSpec,
    combination_moments,
    conditional,
    flatness,
    joint_density,
    marginal,
    postselect,
    ridge_fit,
    total_variation,
)
from .states import (
    BOHR_LABELS,
    EPR_LABELS,
    Envelope,
    PreparationParams,
    StateTensor,
    build_bohr_state,
    build_epr_state,
    resolve_preparation,
    transform_axis,
)

SCENARIOS = ("epr_ideal", "bohr_corrected", "bohr_flawed", "disturbance", "counterfactual")
PAIR_SOURCES = ("epr_ideal", "bohr_corrected", "bohr_flawed")
ELEMENT_OF_REALITY = 0.9
N_ALICE_OUTCOMES = 5
DIAPHRAGM = BOHR_LABELS[2]
ALICE, BOB = EPR_LABELS

REGIME_NOTE = (
    "disturbance regime: Bob's k2 marginals compared after momentum and position pointer "
    "postselection; finite Gaussian envelopes keep the comparison non-trivial, unit envelopes "
    "are reported alongside as disturbance_unit_envelopes"
)


class ProtocolError(ValueError):
    """A configuration that the requested protocol cannot run."""


@dataclass(frozen=True)
class ProtocolConfig:
    scenario: str = "epr_ideal"
    n_points: int = 128
    length: float = 20.0
    preparation: PreparationParams = field(default_factory=PreparationParams)
    pointer: PointerSpec | None = None
    compare_pointer: PointerSpec | None = None
    alice_basis: Rep = Rep.POSITION
    bob_basis: Rep = Rep.MOMENTUM
    alice_outcomes: tuple[float, ...] | None = None
    counterfactual_of: str = "epr_ideal"
    outputs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ProtocolError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.counterfactual_of not in PAIR_SOURCES:
            raise ProtocolError(
                f"counterfactual_of must be one of {PAIR_SOURCES}, got {self.counterfactual_of!r}"
            )
        object.__setattr__(self, "alice_basis", Rep.parse(self.alice_basis))
        object.__setattr__(self, "bob_basis", Rep.parse(self.bob_basis))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.alice_outcomes is not None:
            object.__setattr__(self, "alice_outcomes", tuple(float(v) for v in self.alice_outcomes))

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.n_points, self.length)

    def momentum_pointer(self) -> PointerSpec:
        """Configured pointer if it reads momentum, else a sharp ``K = K0`` pointer."""
        if self.pointer is not None and self.pointer.basis is Rep.MOMENTUM:
            return self.pointer
        return PointerSpec(DIAPHRAGM, Rep.MOMENTUM, self.preparation.K0)

    def position_pointer(self) -> PointerSpec:
        if self.pointer is not None and self.pointer.basis is Rep.POSITION:
            return self.pointer
        return PointerSpec(DIAPHRAGM, Rep.POSITION, 0.0)


@dataclass
class ProtocolReport:
    scenario: str
    densities: dict[str, Density] = field(default_factory=dict)
    correlations: dict[str, CorrelationReport] = field(default_factory=dict)
    postselection_probability: float = 1.0
    disturbance: float | None = None
    metrics: dict[str, float] = field(default_factory=dict)
    tables: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict[str, Any]:
        """JSON-ready view of everything except the density arrays."""
        return {
            "scenario": self.scenario,
            "postselection_probability": self.postselection_probability,
            "disturbance": self.disturbance,
            "correlations": {k: asdict(v) for k, v in self.correlations.items()},
            "metrics": dict(self.metrics),
            "tables": {k: [dict(row) for row in rows] for k, rows in self.tables.items()},
            "densities": {
                k: {"axes": list(d.axes), "reps": [r.value for r in d.reps], "cell": d.cell}
                for k, d in self.densities.items()
            },
            "notes": list(self.notes),
        }


def _require_pointer(pointer: PointerSpec, basis: Rep, protocol: str) -> None:
    if pointer.axis != DIAPHRAGM:
        raise ProtocolError(f"{protocol}: pointer must act on the {DIAPHRAGM!r} axis, got {pointer.axis!r}")
    if pointer.basis is not basis:
        raise ProtocolError(f"{protocol}: pointer basis must be {basis.value}, got {pointer.basis.value}")


def _resolved(config: ProtocolConfig) -> tuple[Grid1D, PreparationParams, list[str]]:
    grid = config.grid
    params, notes = resolve_preparation(grid, config.preparation)
    return grid, params, notes


def _select(report: ProtocolReport, outputs: tuple[str, ...]) -> ProtocolReport:
    if not outputs:
        return report
    available = set(report.densities) | set(report.correlations) | set(report.metrics)
    missing = [name for name in outputs if name not in available]
    if missing:
        raise ProtocolError(
            f"{report.scenario}: requested outputs {missing} not produced; available: {sorted(available)}"
        )
    report.densities = {k: v for k, v in report.densities.items() if k in outputs}
    report.correlations = {k: v for k, v in report.correlations.items() if k in outputs}
    return report


def sample_outcomes(density: Density, count: int = N_ALICE_OUTCOMES) -> list[float]:
    """Evenly spaced lattice outcomes across the central half of a 1-axis density."""
    values = density.coordinates(0)
    cdf = np.cumsum(density.values) / np.sum(density.values)
    lo = values[min(int(np.searchsorted(cdf, 0.25)), len(values) - 1)]
    hi = values[min(int(np.searchsorted(cdf, 0.75)), len(values) - 1)]
    picks = []
    for target in np.linspace(lo, hi, count):
        _, snapped, _ = density.grid.snap(float(target), density.reps[0])
        if snapped not in picks:
            picks.append(snapped)
    return picks


def _conditional_peaks(pair: Density, outcomes: list[float], predict) -> list[dict[str, Any]]:
    rows = []
    for value in outcomes:
        cond = conditional(pair, ALICE, value)
        _, snapped, _ = pair.grid.snap(value, pair.reps[0])
        coords = cond.coordinates(0)
        rows.append(
            {
                "alice_basis": pair.reps[0].value,
                "alice_outcome": snapped,
                "bob_peak": float(coords[int(np.argmax(cond.values))]),
                "bob_predicted": float(predict(snapped)),
            }
        )
    return rows


def run_epr_ideal(config: ProtocolConfig) -> ProtocolReport:
    grid, params, notes = _resolved(config)
    state = build_epr_state(grid, params)
    pos = joint_density(state, (Rep.POSITION, Rep.POSITION))
    mom = joint_density(state, (Rep.MOMENTUM, Rep.MOMENTUM))
    report = ProtocolReport("epr_ideal", notes=notes)
    report.densities = {"position": pos, "momentum": mom}
    report.correlations = {"position": ridge_fit(pos), "momentum": ridge_fit(mom)}
    sep_mean, sep_var = combination_moments(pos, -1)
    sum_mean, sum_var = combination_moments(mom, +1)
    report.metrics = {
        "separation_mean": sep_mean,
        "separation_variance": sep_var,
        "momentum_sum_mean": sum_mean,
        "momentum_sum_variance": sum_var,
    }
    x_outcomes = list(config.alice_outcomes) if config.alice_outcomes else sample_outcomes(marginal(pos, [ALICE]))
    report.tables["conditionals"] = _conditional_peaks(
        pos, x_outcomes, lambda x1: grid.wrap(x1 - params.d)
    ) + _conditional_peaks(
        mom, sample_outcomes(marginal(mom, [ALICE])), lambda k1: grid.wrap(-k1, Rep.MOMENTUM)
    )
    return _select(report, config.outputs)


def _postselected_pair(config: ProtocolConfig, pointer: PointerSpec, params: PreparationParams | None = None):
    grid = config.grid
    params = params if params is not None else config.preparation
    state = build_bohr_state(grid, params)
    result = postselect(state, pointer)
    notes = list(state.notes)
    if result.snap_distance != 0.0:
        notes.append(
            f"pointer {pointer.basis.value} outcome snapped from {pointer.value!r} to "
            f"{result.outcome!r} (distance {result.snap_distance:.6g})"
        )
    return result, notes


def run_bohr_corrected(config: ProtocolConfig) -> ProtocolReport:
    """Momentum postselection on the diaphragm, then independent Alice/Bob readouts."""
    grid, params, _ = _resolved(config)
    pointer = config.momentum_pointer()
    _require_pointer(pointer, Rep.MOMENTUM, "bohr_corrected")
    result, notes = _postselected_pair(config, pointer)
    pair = result.state
    pos = joint_density(pair, (Rep.POSITION, Rep.POSITION))
    mom = joint_density(pair, (Rep.MOMENTUM, Rep.MOMENTUM))
    mixed = joint_density(pair, (config.alice_basis, config.bob_basis))
    report = ProtocolReport("bohr_corrected", postselection_probability=result.probability, notes=notes)
    report.densities = {
        "position": pos,
        "momentum": mom,
        "mixed": mixed,
        "bob_marginal": marginal(mixed, [BOB]),
    }
    report.correlations = {"position": ridge_fit(pos), "momentum": ridge_fit(mom), "mixed": ridge_fit(mixed)}
    sep_mean, sep_var = combination_moments(pos, -1)
    sum_mean, sum_var = combination_moments(mom, +1)
    report.metrics = {
        "pointer_outcome": result.outcome,
        "expected_momentum_sum": float(grid.wrap(params.K0 - result.outcome, Rep.MOMENTUM)),
        "momentum_sum_mean": sum_mean,
        "momentum_sum_variance": sum_var,
        "separation_mean": sep_mean,
        "separation_variance": sep_var,
        "mixed_alice_flatness": flatness(marginal(mixed, [ALICE])),
    }
    return _select(report, config.outputs)


def run_bohr_flawed(config: ProtocolConfig) -> ProtocolReport:
    """Position postselection on the diaphragm: positions pinned, momenta uncorrelated."""
    grid, params, _ = _resolved(config)
    pointer = config.position_pointer()
    _require_pointer(pointer, Rep.POSITION, "bohr_flawed")
    result, notes = _postselected_pair(config, pointer)
    pair = result.state
    pos = joint_density(pair, (Rep.POSITION, Rep.POSITION))
    mom = joint_density(pair, (Rep.MOMENTUM, Rep.MOMENTUM))
    report = ProtocolReport("bohr_flawed", postselection_probability=result.probability, notes=notes)
    report.densities = {"position": pos, "momentum": mom}
    report.correlations = {"position": ridge_fit(pos), "momentum": ridge_fit(mom)}
    x = grid.positions
    X = result.outcome
    pinned = {}
    for label, target in ((ALICE, X), (BOB, X - params.d)):
        m = marginal(pos, [label]).values
        pinned[f"{label}_mean"] = float(np.sum(x * m) * grid.spacing)
        pinned[f"{label}_target"] = float(target)
        near = np.abs(grid.wrap(x - target)) <= 3 * params.sigma
        pinned[f"{label}_mass_within_3sigma"] = float(np.sum(m[near]) * grid.spacing)
    report.metrics = {"pointer_outcome": X, **pinned, "momentum_flatness": flatness(mom)}
    return _select(report, config.outputs)


def bob_marginal(state: StateTensor, pointer: PointerSpec, alice_basis: Rep, bob_basis: Rep) -> tuple[Density, float]:
    """Bob's distribution after postselecting ``pointer``, averaged over Alice's results."""
    result = postselect(state, pointer)
    pair = transform_axis(transform_axis(result.state, ALICE, alice_basis), BOB, bob_basis)
    return marginal(joint_density(pair), [BOB]), result.probability


def _pointer_tag(pointer: PointerSpec) -> str:
    return "K" if pointer.basis is Rep.MOMENTUM else "X"


def run_disturbance_comparison(config: ProtocolConfig) -> ProtocolReport:
    """Compare Bob's marginal under momentum-pointer and position-pointer postselection."""
    grid, params, notes = _resolved(config)
    first = config.momentum_pointer() if config.pointer is None else config.pointer
    second = config.compare_pointer if config.compare_pointer is not None else config.position_pointer()
    for p in (first, second):
        if p.axis != DIAPHRAGM:
            raise ProtocolError(f"disturbance: pointers must act on {DIAPHRAGM!r}, got {p.axis!r}")
    state = build_bohr_state(grid, params)
    d1, p1 = bob_marginal(state, first, config.alice_basis, config.bob_basis)
    d2, p2 = bob_marginal(state, second, config.alice_basis, config.bob_basis)
    tag1, tag2 = _pointer_tag(first), _pointer_tag(second)
    if tag1 == tag2:
        tag2 = f"{tag2}_compare"
    report = ProtocolReport("disturbance", postselection_probability=p1, notes=notes + [REGIME_NOTE])
    report.densities = {f"bob_marginal_{tag1}": d1, f"bob_marginal_{tag2}": d2}
    report.disturbance = total_variation(d1, d2)

    unit = replace(params, envelopes=(Envelope(), Envelope()))
    if unit == params:
        unit_tv = report.disturbance
    else:
        unit_state = build_bohr_state(grid, unit)
        u1, _ = bob_marginal(unit_state, first, config.alice_basis, config.bob_basis)
        u2, _ = bob_marginal(unit_state, second, config.alice_basis, config.bob_basis)
        unit_tv = total_variation(u1, u2)
    report.metrics = {
        f"probability_{tag1}": p1,
        f"probability_{tag2}": p2,
        "disturbance": report.disturbance,
        "disturbance_unit_envelopes": unit_tv,
    }
    return _select(report, config.outputs)


def _pair_for(config: ProtocolConfig, source: str) -> tuple[StateTensor, float, float, list[str]]:
    """Two-particle state of a source protocol with its probability and momentum-sum rule."""
    grid, params, notes = _resolved(config)
    if source == "epr_ideal":
        return build_epr_state(grid, params), 1.0, 0.0, notes
    if source == "bohr_corrected":
        pointer = config.momentum_pointer()
        result, notes = _postselected_pair(config, pointer)
        q = float(grid.wrap(params.K0 - result.outcome, Rep.MOMENTUM))
        return result.state, result.probability, q, notes
    result, notes = _postselected_pair(config, config.position_pointer())
    return result.state, result.probability, 0.0, notes


def run_counterfactual_table(config: ProtocolConfig) -> ProtocolReport:
    """Conditional mass near Bob's predicted value for sampled Alice outcomes.

    Position predictions use ``x2 = x1 - d`` within two ridge widths
    (``2*sqrt(2)*sigma``); momentum predictions use ``k2 = q - k1`` within
    ``2*dk``, where ``q`` is ``K0 - K`` after momentum postselection and 0
    otherwise.
    """
    grid, params, _ = _resolved(config)
    source = config.counterfactual_of
    pair, probability, q, notes = _pair_for(config, source)
    report = ProtocolReport("counterfactual", postselection_probability=probability, notes=notes)
    windows = {
        Rep.POSITION: 2.0 * np.sqrt(2.0) * params.sigma,
        Rep.MOMENTUM: 2.0 * grid.momentum_spacing,
    }
    rules = {
        Rep.POSITION: lambda v: grid.wrap(v - params.d),
        Rep.MOMENTUM: lambda v: grid.wrap(q - v, Rep.MOMENTUM),
    }
    rows = []
    for basis in (Rep.POSITION, Rep.MOMENTUM):
        joint = joint_density(pair, (basis, basis))
        if config.alice_outcomes and basis is config.alice_basis:
            outcomes = list(config.alice_outcomes)
        else:
            outcomes = sample_outcomes(marginal(joint, [ALICE]))
        coords = grid.values(basis)
        in_window_baseline = None
        for value in outcomes:
            _, snapped, _ = grid.snap(value, basis)
            cond = conditional(joint, ALICE, snapped)
            predicted = float(rules[basis](snapped))
            near = np.abs(grid.wrap(coords - predicted, basis)) <= windows[basis] * (1 + 1e-12)
            mass = float(np.sum(cond.values[near]) * grid.cell(basis))
            in_window_baseline = float(np.count_nonzero(near)) / grid.n_points
            rows.append(
                {
                    "alice_basis": basis.value,
                    "alice_outcome": snapped,
                    "bob_predicted": predicted,
                    "window": float(windows[basis]),
                    "conditional_mass": mass,
                    "uniform_baseline": in_window_baseline,
                    "element_of_reality": mass >= ELEMENT_OF_REALITY,
                }
            )
    report.tables["counterfactual"] = rows
    for basis in (Rep.POSITION, Rep.MOMENTUM):
        masses = [r["conditional_mass"] for r in rows if r["alice_basis"] == basis.value]
        report.metrics[f"min_conditional_mass_{basis.value}"] = float(min(masses))
    report.metrics["momentum_sum_rule"] = q
    report.notes.append(f"pair source: {source}")
    return _select(report, config.outputs)


RUNNERS = {
    "epr_ideal": run_epr_ideal,
    "bohr_corrected": run_bohr_corrected,
    "bohr_flawed": run_bohr_flawed,
    "disturbance": run_disturbance_comparison,
    "counterfactual": run_counterfactual_table,
}


def run_protocol(config: ProtocolConfig) -> ProtocolReport:
    return RUNNERS[config.scenario](config)
