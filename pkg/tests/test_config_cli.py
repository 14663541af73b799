import csv
import json
import subprocess
import sys

import pytest

from ioncavity.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_USAGE, main
from ioncavity.config import OUTPUT_ENV, RunConfig, parse_config
from ioncavity.errors import DataError
from ioncavity.units import MHZ


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def table(path):
    return {r["quantity"]: r["value"] for r in rows(path)}


# -- configuration ----------------------------------------------------------

def test_defaults_reproduce_presets():
    cfg = RunConfig()
    assert cfg.rates().kappa / MHZ == pytest.approx(2.178, abs=1e-3)
    assert cfg.system().g_n / MHZ == pytest.approx(12.09, abs=0.01)


def test_parse_units_and_angular():
    cfg = parse_config("[transition]\ng = 0.6 MHz\nn_eff = 100\n[cavity]\nlength = 12 mm\n")
    assert cfg["transition.g"] == pytest.approx(0.6 * MHZ)
    assert cfg["cavity.length"] == pytest.approx(12e-3)
    cfg = parse_config("[run]\nangular = true\n[transition]\ng = 1e6 rad/s\n")
    assert cfg["transition.g"] == pytest.approx(1e6)


@pytest.mark.parametrize("text, line, fragment", [
    ("[transition]\ng = 0.53\n", 2, "needs one of"),
    ("[cavity]\nlength = 11.8 mm\nbogus = 1\n", 3, "unknown key"),
    ("[run]\nseed = 1\n\n[nonsense]\nx = 1\n", 4, "unknown section"),
    ("[larmor]\ndecay = linear\n", 2, "decay"),
    ("[run]\nseed = abc\n", 2, "integer"),
])
def test_config_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(DataError) as exc:
        parse_config(text, source="run.cfg")
    msg = str(exc.value)
    assert f"run.cfg:{line}:" in msg
    assert fragment in msg


def test_config_syntax_error():
    with pytest.raises(DataError):
        parse_config("no section header\n", source="x.cfg")


def test_config_inconsistent_values():
    with pytest.raises(DataError):
        parse_config("[cavity]\nt1 = 1 ppm\nt2 = 10 ppm\n")


def test_output_dir_precedence(monkeypatch):
    cfg = RunConfig()
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert cfg.output_dir() == "."
    monkeypatch.setenv(OUTPUT_ENV, "/env")
    assert cfg.output_dir() == "/env"
    cfg.set("run.output_dir", "/file")
    assert cfg.output_dir() == "/file"
    assert cfg.output_dir("/flag") == "/flag"


# -- command line -----------------------------------------------------------

def run_cli(tmp_path, *argv):
    return main([*argv, "--output-dir", str(tmp_path), "-q"])


def test_rates_command(tmp_path):
    assert run_cli(tmp_path, "rates") == 0
    t = table(tmp_path / "rates.csv")
    assert 2.0 <= float(t["kappa"]) <= 2.3
    assert 2700 <= float(t["finesse"]) <= 3200
    assert (tmp_path / "rates.manifest.json").exists()


def test_coupling_command(tmp_path):
    assert run_cli(tmp_path, "coupling", "--g", "0.53MHz", "--n", "520") == 0
    t = table(tmp_path / "coupling.csv")
    assert float(t["g_n"]) == pytest.approx(12.09, rel=0.01)
    assert t["strong_coupling"] == "1"
    assert run_cli(tmp_path, "coupling", "--n", "1523", "--gamma-eff", "12.7MHz", "--kappa", "2.1MHz") == 0
    assert float(table(tmp_path / "coupling.csv")["cooperativity"]) == pytest.approx(7.9, rel=0.1)


def test_angular_flag(tmp_path):
    w = 0.53 * MHZ
    assert run_cli(tmp_path, "coupling", "--angular", "--g", f"{w}rad/s", "--n", "520") == 0
    assert float(table(tmp_path / "coupling.csv")["g"]) == pytest.approx(0.53, rel=1e-9)


def test_effn_command(tmp_path):
    assert run_cli(tmp_path, "effn") == 0
    t = {r["quantity"]: r for r in rows(tmp_path / "effn.csv")}
    assert float(t["n_eff"]["value"]) == pytest.approx(520, rel=0.15)
    assert 0.05 <= float(t["relative_uncertainty"]["value"]) <= 0.07


def test_spectrum_schema(tmp_path):
    assert run_cli(tmp_path, "spectrum", "--points", "101") == 0
    r = rows(tmp_path / "spectrum.csv")
    assert list(r[0]) == ["detuning_mhz", "reflectivity", "kappa_prime_mhz", "shift_mhz"]
    assert len(r) == 101
    assert all(0 <= float(x["reflectivity"]) <= 1 for x in r)


def test_thermal_and_larmor_commands(tmp_path):
    assert run_cli(tmp_path, "thermal") == 0
    assert (tmp_path / "thermal.csv").exists()
    assert run_cli(tmp_path, "larmor") == 0
    r = rows(tmp_path / "larmor.csv")
    assert list(r[0])[:2] == ["tau_us", "cooperativity"]


def test_larmor_pure_state_reports_third_harmonic(tmp_path, capsys):
    # the trace is still written; the summary says the two-harmonic form fails
    assert main(["larmor", "--initial", "plus32", "--output-dir", str(tmp_path)]) == 0
    assert "not of the two-harmonic form" in capsys.readouterr().out
    assert len(rows(tmp_path / "larmor.csv")) > 100


def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", "locked", "--seed", "5", "--points", "41", "--sequences", "500",
                     "--output-dir", str(d), "-q"]) == 0
    assert (a / "simulate_locked.csv").read_bytes() == (b / "simulate_locked.csv").read_bytes()
    ma = json.loads((a / "simulate_locked.manifest.json").read_text())
    assert ma["seed"] == 5
    assert ma["files"]["simulate_locked.csv"]


def test_pipeline_command_and_fit_round_trip(tmp_path):
    assert run_cli(tmp_path, "pipeline", "fig5a", "--seed", "7", "--fast") == 0
    summary = {r["parameter"]: r for r in rows(tmp_path / "fig5a_summary.csv")}
    assert float(summary["g_n"]["recovered"]) == pytest.approx(12.09, rel=0.03)
    manifest = json.loads((tmp_path / "fig5a.manifest.json").read_text())
    assert manifest["command"] == "pipeline"
    assert "fig5a_kappa_prime.csv" in manifest["files"]
    assert run_cli(tmp_path, "fit", "absorption", str(tmp_path / "fig5a_kappa_prime.csv")) == 0
    fit = {r["parameter"]: r for r in rows(tmp_path / "fit_absorption.csv")}
    assert float(fit["g_n"]["value"]) == pytest.approx(float(summary["g_n"]["recovered"]), rel=1e-6)


def test_exit_codes(tmp_path):
    assert run_cli(tmp_path, "coupling", "--g", "0.53") == EXIT_DATA
    assert run_cli(tmp_path, "bogus") == EXIT_USAGE
    bad = tmp_path / "bad.csv"
    bad.write_text("detuning_mhz,kappa_prime_mhz\n1,2\n2,oops\n")
    assert run_cli(tmp_path, "fit", "absorption", str(bad)) == EXIT_DATA
    missing = tmp_path / "missing.csv"
    missing.write_text("x,y\n1,2\n")
    assert run_cli(tmp_path, "fit", "absorption", str(missing)) == EXIT_DATA
    flat = tmp_path / "flat.csv"
    flat.write_text("detuning_mhz,counts\n" + "".join(f"{x},100\n" for x in range(-20, 21)))
    assert run_cli(tmp_path, "fit", "dip", str(flat)) == EXIT_NUMERIC
    cfg = tmp_path / "c.cfg"
    cfg.write_text("[transition]\ng = 0.53\n")
    assert run_cli(tmp_path, "rates", "--config", str(cfg)) == EXIT_DATA


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert main(["rates", "-q"]) == 0
    assert (tmp_path / "rates.csv").exists()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "ioncavity", "coupling", "--output-dir", str(tmp_path)],
                         capture_output=True, text=True, check=True)
    assert "g_N" in out.stdout
