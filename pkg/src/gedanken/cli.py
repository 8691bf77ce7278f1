"""Command-line front end: ``gedanken <scenario> --config <path> --out <dir>``.

Exit codes: 0 success, 2 configuration error, 3 numerical-validity error
(wrapped ridge, null postselection). Set ``GEDANKEN_LOG_LEVEL`` to control
logging verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .doppler import CollisionError, CollisionInput, collide_exact
from .lattice import Grid1D, LatticeError, Rep
from .measurement import Density, MeasurementError, PointerSpec
from .protocols import SCENARIOS, ProtocolConfig, ProtocolError, ProtocolReport, run_protocol
from .states import Envelope, PreparationParams, StateError, resolve_preparation

log = logging.getLogger("gedanken")

ALL_SCENARIOS = SCENARIOS + ("doppler",)
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
DOPPLER_NOTE = (
    "shift_doppler is -2*v*omega, the large-mass limit of the expansion; "
    "the form -2*m*v*omega is dimensionally inconsistent with it and is not used"
)

_TOP_KEYS = {
    "scenario", "grid", "preparation", "pointer", "compare_pointer", "alice_basis",
    "bob_basis", "alice_outcomes", "counterfactual_of", "outputs", "doppler",
}


class ConfigError(ValueError):
    """Malformed or invalid scenario configuration."""

    kind, exit_code = "config", EXIT_CONFIG


class ValidityError(ConfigError):
    """Configuration rejected by a numerical-validity precondition (ridge wrap, aliasing)."""

    kind, exit_code = "numerical", EXIT_NUMERICAL


@dataclass
class RunManifest:
    scenario: str
    config: dict[str, Any]
    artifacts: list[str] = field(default_factory=list)
    tool_version: str = __version__
    wall_clock_seconds: float = 0.0


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {unknown}; allowed: {sorted(allowed)}")


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected a mapping, got {type(value).__name__}")
    return value


def _number(section: dict, key: str, default, where: str, kind=float):
    value = section.get(key, default)
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a sign (1.0e9) as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
    return kind(value)


def _envelope(raw: Any, where: str) -> Envelope:
    if raw is None:
        return Envelope()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    _check_keys(raw, {"kind", "center", "width"}, where)
    try:
        return Envelope(
            raw.get("kind", "unit"),
            _number(raw, "center", 0.0, where),
            _number(raw, "width", 1.0, where),
        )
    except StateError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _pointer(raw: Any, where: str) -> PointerSpec | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    _check_keys(raw, {"axis", "basis", "value", "smearing"}, where)
    if "basis" not in raw:
        raise ConfigError(f"{where}.basis: required")
    try:
        return PointerSpec(
            str(raw.get("axis", "diaphragm")),
            Rep.parse(raw["basis"]),
            _number(raw, "value", 0.0, where),
            _number(raw, "smearing", 0.0, where),
        )
    except (LatticeError, MeasurementError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _load_yaml(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{path}: parse error at {where}: {problem}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return raw


def doppler_input(raw: dict) -> CollisionInput:
    section = _section(raw, "doppler")
    _check_keys(section, {"omega", "v", "mass"}, "doppler")
    try:
        return CollisionInput(
            _number(section, "omega", 1.0, "doppler"),
            _number(section, "v", 1e-3, "doppler"),
            _number(section, "mass", 1e9, "doppler"),
        )
    except CollisionError as exc:
        raise ConfigError(f"doppler: {exc}") from None


def config_from_mapping(raw: dict, notes: list[str] | None = None) -> ProtocolConfig:
    """Validate a parsed mapping into a fully resolved :class:`ProtocolConfig`."""
    notes = notes if notes is not None else []
    _check_keys(raw, _TOP_KEYS, "config")
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: expected one of {list(SCENARIOS)}, got {scenario!r}")

    g = _section(raw, "grid")
    _check_keys(g, {"n_points", "length"}, "grid")
    try:
        grid = Grid1D(_number(g, "n_points", 128, "grid", int), _number(g, "length", 20.0, "grid"))
    except LatticeError as exc:
        raise ConfigError(f"grid: {exc}") from None

    p = _section(raw, "preparation")
    _check_keys(p, {"d", "sigma", "K0", "envelopes"}, "preparation")
    env = p.get("envelopes") or {}
    if not isinstance(env, dict):
        raise ConfigError("preparation.envelopes: expected a mapping")
    _check_keys(env, {"particle1", "particle2"}, "preparation.envelopes")
    params = PreparationParams(
        _number(p, "d", 3.0, "preparation"),
        _number(p, "sigma", 0.15, "preparation"),
        _number(p, "K0", 0.0, "preparation"),
        (
            _envelope(env.get("particle1"), "preparation.envelopes.particle1"),
            _envelope(env.get("particle2"), "preparation.envelopes.particle2"),
        ),
    )
    try:
        params, prep_notes = resolve_preparation(grid, params)
    except StateError as exc:
        raise ValidityError(f"preparation: {exc}") from None
    notes.extend(prep_notes)

    pointers = {}
    for key in ("pointer", "compare_pointer"):
        spec = _pointer(raw.get(key), key)
        if spec is not None:
            try:
                spec.validate(grid)
            except MeasurementError as exc:
                raise ConfigError(f"{key}: {exc}") from None
            _, snapped, dist = grid.snap(spec.value, spec.basis)
            if dist != 0.0:
                notes.append(f"{key}.value snapped from {spec.value!r} to {snapped!r} (distance {dist:.6g})")
                spec = replace(spec, value=snapped)
        pointers[key] = spec

    outcomes = raw.get("alice_outcomes")
    if outcomes is not None:
        if not isinstance(outcomes, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in outcomes
        ):
            raise ConfigError("alice_outcomes: expected a list of numbers")
    outputs = raw.get("outputs") or []
    if not isinstance(outputs, list) or not all(isinstance(v, str) for v in outputs):
        raise ConfigError("outputs: expected a list of names")
    try:
        return ProtocolConfig(
            scenario=scenario,
            n_points=grid.n_points,
            length=grid.length,
            preparation=params,
            pointer=pointers["pointer"],
            compare_pointer=pointers["compare_pointer"],
            alice_basis=Rep.parse(raw.get("alice_basis", "position")),
            bob_basis=Rep.parse(raw.get("bob_basis", "momentum")),
            alice_outcomes=tuple(outcomes) if outcomes is not None else None,
            counterfactual_of=raw.get("counterfactual_of", "epr_ideal"),
            outputs=tuple(outputs),
        )
    except (LatticeError, ProtocolError) as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path: str | Path, notes: list[str] | None = None) -> ProtocolConfig:
    """Read a YAML scenario file; snap notes are appended to ``notes`` when given."""
    notes = notes if notes is not None else []
    config = config_from_mapping(_load_yaml(Path(path)), notes)
    for note in notes:
        log.warning(note)
    return config


def default_config_path(scenario: str) -> Path:
    return Path(str(resources.files("gedanken") / "configs" / f"{scenario}.yaml"))


def config_to_dict(config: ProtocolConfig) -> dict[str, Any]:
    def pointer(p: PointerSpec | None):
        return None if p is None else {"axis": p.axis, "basis": p.basis.value, "value": p.value, "smearing": p.smearing}

    prep = config.preparation
    return {
        "scenario": config.scenario,
        "grid": {"n_points": config.n_points, "length": config.length},
        "preparation": {
            "d": prep.d,
            "sigma": prep.sigma,
            "K0": prep.K0,
            "envelopes": {
                name: asdict(env) for name, env in zip(("particle1", "particle2"), prep.envelopes)
            },
        },
        "pointer": pointer(config.pointer),
        "compare_pointer": pointer(config.compare_pointer),
        "alice_basis": config.alice_basis.value,
        "bob_basis": config.bob_basis.value,
        "alice_outcomes": None if config.alice_outcomes is None else list(config.alice_outcomes),
        "counterfactual_of": config.counterfactual_of,
        "outputs": list(config.outputs),
    }


def _column(density: Density, axis: int) -> str:
    return f"{density.axes[axis]}_{density.reps[axis].value}"


def export_density(density: Density, path: str | Path) -> Path:
    """Write a density as CSV: one row per cell, axis indices in lexicographic order."""
    if not density.axes:
        raise ValueError("cannot export a density without axes")
    path = Path(path)
    grid = density.grid
    coords = np.meshgrid(*[density.coordinates(i) for i in range(len(density.axes))], indexing="ij")
    table = np.column_stack([c.ravel() for c in coords] + [density.values.ravel()])
    header = "\n".join(
        [
            f"# axes: {','.join(density.axes)}",
            f"# reps: {','.join(r.value for r in density.reps)}",
            f"# cell: {density.cell!r}",
            f"# grid: n_points={grid.n_points} length={grid.length!r}",
            ",".join([_column(density, i) for i in range(len(density.axes))] + ["probability"]),
        ]
    )
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            np.savetxt(fh, table, fmt="%.17g", delimiter=",")
    except OSError as exc:
        raise OSError(f"failed to write density to {path}: {exc.strerror}") from exc
    return path


def read_density(path: str | Path) -> Density:
    path = Path(path)
    meta = {}
    n_header = 0
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            n_header += 1
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
    axes = tuple(meta["axes"].split(","))
    reps = tuple(Rep.parse(r) for r in meta["reps"].split(","))
    grid_fields = dict(item.split("=") for item in meta["grid"].split())
    grid = Grid1D(int(grid_fields["n_points"]), float(grid_fields["length"]))
    data = np.loadtxt(path, delimiter=",", skiprows=n_header + 1, ndmin=2)
    values = data[:, -1].reshape((grid.n_points,) * len(axes))
    return Density(grid, axes, reps, values)


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _to_builtin(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(report: ProtocolReport, out_dir: Path, notes: list[str]) -> list[str]:
    """Write densities and the report; returns the artifact names in write order."""
    artifacts = []
    density_files = {}
    for name in sorted(report.densities):
        fname = f"{name}_density.csv"
        export_density(report.densities[name], out_dir / fname)
        density_files[name] = fname
        artifacts.append(fname)
    summary = report.summary()
    for name, entry in summary["densities"].items():
        entry["file"] = density_files[name]
    summary["notes"] = list(dict.fromkeys(notes + summary["notes"]))
    _write_json(out_dir / "report.json", _to_builtin(summary))
    artifacts.append("report.json")
    return artifacts


def run(scenario: str, config: ProtocolConfig | CollisionInput, out_dir: str | Path, notes: list[str] | None = None) -> RunManifest:
    """Execute one scenario and write its artifacts plus ``manifest.json`` into ``out_dir``.

    Everything is computed before the first file is written, so a failing
    run leaves no partial output.
    """
    notes = list(notes or [])
    start = time.perf_counter()
    out_dir = Path(out_dir)
    if scenario == "doppler":
        if not isinstance(config, CollisionInput):
            raise ConfigError("doppler scenario needs a collision input")
        result = collide_exact(config)
        payload = {"input": asdict(config), "result": asdict(result), "notes": notes + [DOPPLER_NOTE]}
        energy, momentum = result.residuals(config)
        payload["residuals"] = {"energy": energy, "momentum": momentum}
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "collision.json", payload)
        artifacts = ["collision.json"]
        resolved = {"scenario": "doppler", "doppler": asdict(config)}
    else:
        if not isinstance(config, ProtocolConfig) or config.scenario != scenario:
            raise ConfigError(f"config does not describe scenario {scenario!r}")
        report = run_protocol(config)
        out_dir.mkdir(parents=True, exist_ok=True)
        artifacts = write_report(report, out_dir, notes)
        resolved = config_to_dict(config)
    manifest = RunManifest(scenario, resolved, artifacts + ["manifest.json"])
    manifest.wall_clock_seconds = time.perf_counter() - start
    _write_json(out_dir / "manifest.json", _to_builtin(asdict(manifest)))
    for name in manifest.artifacts:
        path = out_dir / name
        if not path.exists() or path.stat().st_size == 0:
            raise OSError(f"artifact {path} missing or empty")
    return manifest


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gedanken",
        description="EPR pair and movable-diaphragm gedanken experiment simulator.",
    )
    parser.add_argument("scenario", choices=ALL_SCENARIOS)
    parser.add_argument("--config", type=Path, help="YAML scenario file (default: shipped config)")
    parser.add_argument("--out", type=Path, help="output directory (default: ./gedanken_out/<scenario>)")
    parser.add_argument("--omega", type=float, help="doppler: incident photon frequency")
    parser.add_argument("--v", type=float, help="doppler: target velocity")
    parser.add_argument("--mass", type=float, help="doppler: target mass")
    return parser


def _error(kind: str, message: str, code: int) -> int:
    record = {"error": kind, "message": message, "exit_code": code}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("GEDANKEN_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_parser().parse_args(argv)
    config_path = args.config or default_config_path(args.scenario)
    out_dir = args.out or Path("gedanken_out") / args.scenario
    notes: list[str] = []
    try:
        raw = _load_yaml(Path(config_path))
        if args.scenario == "doppler":
            raw.setdefault("scenario", "doppler")
            if raw.get("scenario") != "doppler":
                raise ConfigError(f"scenario: config is for {raw.get('scenario')!r}, not 'doppler'")
            _check_keys(raw, {"scenario", "doppler"}, "config")
            section = dict(_section(raw, "doppler"))
            for key, value in (("omega", args.omega), ("v", args.v), ("mass", args.mass)):
                if value is not None:
                    section[key] = value
            config: ProtocolConfig | CollisionInput = doppler_input({"doppler": section})
        else:
            raw.setdefault("scenario", args.scenario)
            if raw["scenario"] != args.scenario:
                raise ConfigError(f"scenario: config is for {raw['scenario']!r}, not {args.scenario!r}")
            config = config_from_mapping(raw, notes)
            for note in notes:
                log.warning(note)
    except ConfigError as exc:
        return _error(exc.kind, str(exc), exc.exit_code)
    try:
        manifest = run(args.scenario, config, out_dir, notes)
    except (StateError, MeasurementError, ProtocolError, CollisionError, LatticeError) as exc:
        return _error("numerical", str(exc), EXIT_NUMERICAL)
    except ConfigError as exc:
        return _error(exc.kind, str(exc), exc.exit_code)
    log.info("wrote %s", ", ".join(str(out_dir / a) for a in manifest.artifacts))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
