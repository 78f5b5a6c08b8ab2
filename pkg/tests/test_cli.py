"""Command-line surface: exit codes, determinism, validation, config parsing."""
import csv
import json
import math

import pytest

from riskvb.bounds import c9
from riskvb.cli import load_config, main
from tests.helpers import conjugate_log_evidence


@pytest.fixture()
def demand_csv(tmp_path):
    path = tmp_path / "demand.csv"
    code = main(["simulate", "--theta0", "0.68", "--n", "80", "--seed", "7", "--out", str(path)])
    assert code == 0
    return path


def write_config(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


class TestSimulate:
    def test_row_count_and_determinism(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main(["simulate", "--theta0", "0.68", "--n", "100", "--seed", "7", "--out", str(a)]) == 0
        assert main(["simulate", "--theta0", "0.68", "--n", "100", "--seed", "7", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        with open(a, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["xi"]
        assert len(rows) == 101

    def test_zero_samples_is_validation_error(self, capsys):
        code = main(["simulate", "--theta0", "0.68", "--n", "0", "--seed", "1"])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "--n" in err  # message names the field

    def test_stdout_when_out_omitted(self, capsys):
        assert main(["simulate", "--theta0", "1.0", "--n", "3", "--seed", "9"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("xi")
        assert len(out.strip().splitlines()) == 4


class TestFit:
    def fit_json(self, capsys, args):
        assert main(args) == 0
        return json.loads(capsys.readouterr().out)

    def test_constant_risk_reproduces_plain_fit(self, demand_csv, capsys):
        common = ["--data", str(demand_csv), "--prior", "1.0", "4.1", "--h", "0.005", "--b", "0.1"]
        nvb = self.fit_json(capsys, ["fit", "--method", "nvb", *common])
        rsvb = self.fit_json(
            capsys,
            ["fit", "--method", "rsvb", "--risk", "constant", "--f", "identity", *common],
        )
        assert rsvb["shape"] == pytest.approx(nvb["shape"], rel=1e-6)
        assert rsvb["rate"] == pytest.approx(nvb["rate"], rel=1e-6)
        assert rsvb["decision"] == pytest.approx(nvb["decision"], abs=1e-6)

    def test_calibrated_method_is_unit_log_log(self, demand_csv, capsys):
        common = ["--data", str(demand_csv), "--prior", "1.0", "4.1", "--h", "0.005", "--b", "0.1"]
        lcvb = self.fit_json(capsys, ["fit", "--method", "lcvb", *common])
        rsvb = self.fit_json(
            capsys,
            ["fit", "--method", "rsvb", "--gamma-bar", "1.0", "--risk", "log", "--f", "log", *common],
        )
        assert rsvb["shape"] == lcvb["shape"]
        assert rsvb["rate"] == lcvb["rate"]
        assert rsvb["decision"] == lcvb["decision"]

    def test_malformed_csv_names_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("xi\n0.5\nbroken\n")
        code = main(
            ["fit", "--method", "nvb", "--data", str(bad), "--prior", "1.0", "4.1",
             "--h", "0.005", "--b", "0.1"]
        )
        assert code == 2
        assert "line 3" in capsys.readouterr().err


class TestOracle:
    def test_zero_risk_injection(self, demand_csv, capsys):
        assert main(
            ["oracle", "--data", str(demand_csv), "--prior", "1.0", "4.1", "--a", "2.0",
             "--h", "0.005", "--b", "0.1", "--risk", "constant"]
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["logexp_risk"] == pytest.approx(0.0, abs=1e-9)
        assert payload["size_biased_risk"] >= payload["posterior_risk"] - 1e-12

    def test_gamma_prior_sanity_evidence(self, demand_csv, capsys):
        assert main(
            ["oracle", "--data", str(demand_csv), "--prior", "2.0", "3.0", "--a", "2.0",
             "--h", "0.005", "--b", "0.1", "--gamma-prior"]
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        with open(demand_csv, newline="") as handle:
            values = [float(row["xi"]) for row in csv.DictReader(handle)]
        closed = conjugate_log_evidence(len(values), sum(values), 2.0, 3.0)
        assert payload["log_evidence"] == pytest.approx(closed, abs=1e-8)

    def test_decision_outside_interval_rejected(self, demand_csv, capsys):
        code = main(
            ["oracle", "--data", str(demand_csv), "--prior", "1.0", "4.1", "--a", "100.0",
             "--h", "0.005", "--b", "0.1"]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err


BASE_CONFIG = """
theta0 = 0.68
b = 0.1
h = [0.005]
n_grid = [50, 100, 200]
paths = 2
seed = 11
methods = ["nvb", "lcvb"]

[prior]
alpha = 1.0
beta = 4.1

[bound]
M = 1.0
tau = 10.0
delta = 2.0
"""


class TestBoundsCommand:
    def test_curve_is_decreasing_and_metadata_echoes_constant(self, tmp_path):
        config = write_config(tmp_path, BASE_CONFIG)
        out = tmp_path / "bounds.csv"
        assert main(["bounds", "--config", str(config), "--out", str(out)]) == 0
        with open(out, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert list(rows[0]) == ["n", "epsilon_sq", "rate_term", "bound", "prob_level", "method"]
        for method in ("nvb", "lcvb"):
            curve = [float(r["bound"]) for r in rows if r["method"] == method]
            assert curve == sorted(curve, reverse=True)
        meta = json.loads((tmp_path / "bounds.meta.json").read_text())
        assert meta["derived"]["C9"] == pytest.approx(c9(1.0, 4.1, 0.68), rel=1e-13)

    def test_invalid_tau_is_validation_error(self, tmp_path, capsys):
        config = write_config(tmp_path, BASE_CONFIG.replace("tau = 10.0", "tau = 0.5"))
        code = main(["bounds", "--config", str(config), "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "tau" in capsys.readouterr().err

    def test_multi_h_requires_flag(self, tmp_path, capsys):
        config = write_config(tmp_path, BASE_CONFIG.replace("h = [0.005]", "h = [0.003, 0.005]"))
        code = main(["bounds", "--config", str(config), "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "--h" in capsys.readouterr().err
        assert main(["bounds", "--config", str(config), "--h", "0.003", "--out", str(tmp_path / "x.csv")]) == 0


class TestExperimentCommand:
    def test_worker_count_does_not_change_results(self, tmp_path):
        config = write_config(tmp_path, BASE_CONFIG.replace("n_grid = [50, 100, 200]", "n_grid = [20, 40]"))
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert main(["experiment", "--config", str(config), "--workers", "1", "--outdir", str(out1)]) == 0
        assert main(["experiment", "--config", str(config), "--workers", "2", "--outdir", str(out2)]) == 0
        assert (out1 / "comparison.csv").read_bytes() == (out2 / "comparison.csv").read_bytes()

        def strip_elapsed(path):
            with open(path, newline="") as handle:
                return [row[:-1] for row in csv.reader(handle)]

        assert strip_elapsed(out1 / "records.csv") == strip_elapsed(out2 / "records.csv")

    def test_unwritable_outdir_is_runtime_error(self, tmp_path, capsys):
        config = write_config(tmp_path, BASE_CONFIG.replace("n_grid = [50, 100, 200]", "n_grid = [20]"))
        code = main(["experiment", "--config", str(config), "--outdir", "/proc/nope"])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_paths_flag_overrides_config(self, tmp_path):
        config = write_config(tmp_path, BASE_CONFIG.replace("n_grid = [50, 100, 200]", "n_grid = [20]"))
        outdir = tmp_path / "override"
        assert main(["experiment", "--config", str(config), "--workers", "1",
                     "--paths", "4", "--seed", "321", "--outdir", str(outdir)]) == 0
        with open(outdir / "records.csv", newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 2 * 1 * 1 * 4  # two methods, one h, one n, four paths
        meta = json.loads((outdir / "records.meta.json").read_text())
        assert meta["seed"] == 321
        assert meta["config"]["paths"] == 4


class TestConfigParsing:
    def test_unknown_keys_rejected(self, tmp_path):
        config = write_config(tmp_path, BASE_CONFIG + "\nunknown_key = 3\n")
        with pytest.raises(ValueError, match="unknown_key"):
            load_config(str(config))

    def test_unknown_nested_key_rejected(self, tmp_path):
        config = write_config(tmp_path, BASE_CONFIG.replace("beta = 4.1", "beta = 4.1\nscale = 2.0"))
        with pytest.raises(ValueError, match="scale"):
            load_config(str(config))

    def test_defaults_fill_missing_fields(self, tmp_path):
        config = write_config(tmp_path, "paths = 7\n")
        cfg = load_config(str(config))
        assert cfg.paths == 7
        assert cfg.theta0 == 0.68
        assert cfg.h_values == (0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008, 0.009)

    def test_rsvb_method_table(self, tmp_path):
        config = write_config(
            tmp_path,
            'methods = ["rsvb"]\n\n[rsvb]\ngamma_bar = 2.0\nF = "identity"\nf = "identity"\n',
        )
        cfg = load_config(str(config))
        assert cfg.methods[0].label == "rsvb(2,identity,identity)"

    def test_missing_file(self):
        with pytest.raises(ValueError, match="not found"):
            load_config("/does/not/exist.toml")
