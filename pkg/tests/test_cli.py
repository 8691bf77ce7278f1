import json
import math

import numpy as np
import pytest

from gedanken import cli
from gedanken.cli import ConfigError, ValidityError, export_density, main, parse_config, read_density
from gedanken.lattice import Rep, make_grid
from gedanken.measurement import Density, MeasurementError, joint_density
from gedanken.states import PreparationParams, build_epr_state


def write(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestParseConfig:
    def test_defaults(self, tmp_path):
        cfg = parse_config(write(tmp_path, "scenario: epr_ideal\n"))
        assert (cfg.n_points, cfg.length) == (128, 20.0)
        p = cfg.preparation
        assert (p.d, p.sigma, p.K0) == (3.0, 0.15, 0.0)
        assert all(e.kind == "unit" for e in p.envelopes)

    def test_ridge_wrap(self, tmp_path):
        with pytest.raises(ValidityError, match="wrap"):
            parse_config(write(tmp_path, "scenario: epr_ideal\npreparation: {d: 15}\n"))

    def test_K0_snapped_with_note(self, tmp_path):
        notes = []
        cfg = parse_config(write(tmp_path, "scenario: epr_ideal\npreparation: {K0: 0.3}\n"), notes)
        assert cfg.preparation.K0 == pytest.approx(2 * math.pi / 20)
        assert round(cfg.preparation.K0, 3) == 0.314
        assert any("snapped" in n for n in notes)

    def test_pointer_snapped(self, tmp_path):
        notes = []
        text = "scenario: bohr_corrected\npointer: {axis: diaphragm, basis: momentum, value: -0.3}\n"
        cfg = parse_config(write(tmp_path, text), notes)
        assert cfg.pointer.value == pytest.approx(-2 * math.pi / 20)
        assert any("pointer" in n for n in notes)

    def test_parse_error_has_line(self, tmp_path):
        with pytest.raises(ConfigError, match="line 2, column"):
            parse_config(write(tmp_path, "scenario: epr_ideal\ngrid: a: b\n"))

    @pytest.mark.parametrize(
        "text, field",
        [
            ("scenario: bell\n", "scenario"),
            ("scenario: epr_ideal\ngrid: {n_points: 7}\n", "grid"),
            ("scenario: epr_ideal\ngrid: {n_points: 12.5}\n", "grid.n_points"),
            ("scenario: epr_ideal\npreparation: {d: three}\n", "preparation.d"),
            ("scenario: epr_ideal\ncolour: red\n", "colour"),
            ("scenario: epr_ideal\npointer: {axis: diaphragm}\n", "pointer.basis"),
            ("scenario: epr_ideal\npreparation: {envelopes: {particle1: {kind: box}}}\n", "particle1"),
            ("- a\n- b\n", "mapping"),
        ],
    )
    def test_validation_names_field(self, tmp_path, text, field):
        with pytest.raises(ConfigError, match=field):
            parse_config(write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            parse_config(tmp_path / "absent.yaml")

    @pytest.mark.parametrize("scenario", cli.SCENARIOS)
    def test_shipped_configs_parse(self, scenario):
        assert parse_config(cli.default_config_path(scenario)).scenario == scenario


@pytest.fixture(scope="module")
def density():
    return joint_density(build_epr_state(make_grid(128, 20.0), PreparationParams()))


class TestExport:
    def test_rows_and_header(self, tmp_path, density):
        path = export_density(density, tmp_path / "d.csv")
        lines = path.read_text().splitlines()
        header = [line for line in lines if line.startswith("#")]
        assert header[0] == "# axes: particle1,particle2"
        assert lines[len(header)] == "particle1_position,particle2_position,probability"
        assert len(lines) - len(header) - 1 == 16384

    def test_lexicographic_order(self, tmp_path, density):
        path = export_density(density, tmp_path / "d.csv")
        data = np.loadtxt(path, delimiter=",", skiprows=5)
        x = density.grid.positions
        np.testing.assert_array_equal(data[:3, 0], [x[0]] * 3)
        np.testing.assert_array_equal(data[:3, 1], x[:3])

    def test_round_trip(self, tmp_path, density):
        back = read_density(export_density(density, tmp_path / "d.csv"))
        assert back.total() == pytest.approx(1.0, abs=1e-9)
        assert back.axes == density.axes and back.reps == density.reps
        np.testing.assert_array_equal(back.values, density.values)

    def test_empty_axes_rejected(self):
        with pytest.raises(MeasurementError):
            Density(make_grid(8, 8.0), (), (), np.array(1.0))

    def test_io_error_has_path(self, tmp_path, density):
        target = tmp_path / "missing" / "d.csv"
        with pytest.raises(OSError, match="missing"):
            export_density(density, target)

    def test_momentum_columns(self, tmp_path):
        grid = make_grid(8, 8.0)
        d = Density(grid, ("k",), (Rep.MOMENTUM,), np.full(8, 1 / (8 * grid.momentum_spacing)))
        text = export_density(d, tmp_path / "k.csv").read_text()
        assert "k_momentum,probability" in text


class TestMain:
    def test_bohr_flawed_files(self, tmp_path):
        assert main(["bohr_flawed", "--out", str(tmp_path)]) == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert {"position_density.csv", "momentum_density.csv", "report.json", "manifest.json"} <= names
        report = json.loads((tmp_path / "report.json").read_text())
        assert "flatness_tv" in report["correlations"]["momentum"]

    def test_disturbance_files(self, tmp_path):
        assert main(["disturbance", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["disturbance"] > 0
        assert (tmp_path / "bob_marginal_K_density.csv").exists()
        assert (tmp_path / "bob_marginal_X_density.csv").exists()

    def test_doppler(self, tmp_path):
        code = main(["doppler", "--omega", "1", "--v", "1e-3", "--mass", "1e9", "--out", str(tmp_path)])
        assert code == 0
        record = json.loads((tmp_path / "collision.json").read_text())
        assert record["result"]["shift_exact"] == pytest.approx(-2e-3, rel=2e-3)
        assert record["residuals"]["energy"] < 1e-12

    def test_manifest(self, tmp_path):
        assert main(["epr_ideal", "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["scenario"] == "epr_ideal"
        assert manifest["config"]["preparation"]["sigma"] == 0.15
        for name in manifest["artifacts"]:
            assert (tmp_path / name).stat().st_size > 0

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, "scenario: epr_ideal\ngrid: {n_points: 7}\n")
        assert main(["epr_ideal", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["error"] == "config" and record["exit_code"] == 2
        assert not (tmp_path / "o").exists()

    def test_wrap_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, "scenario: epr_ideal\npreparation: {d: 15}\n")
        assert main(["epr_ideal", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["error"] == "numerical"

    def test_null_postselection_exit(self, tmp_path, capsys):
        text = (
            "scenario: bohr_corrected\npreparation: {sigma: 0.5}\n"
            "pointer: {axis: diaphragm, basis: momentum, value: -19.79}\n"
        )
        cfg = write(tmp_path, text)
        assert main(["bohr_corrected", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
        assert "null outcome" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_scenario_mismatch(self, tmp_path):
        cfg = write(tmp_path, "scenario: epr_ideal\n")
        assert main(["bohr_flawed", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_doppler_out_of_window(self, tmp_path):
        assert main(["doppler", "--v", "0.5", "--out", str(tmp_path)]) == 2

    def test_unknown_scenario(self):
        with pytest.raises(SystemExit):
            main(["bell"])
