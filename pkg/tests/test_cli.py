import csv
import json
import os

import numpy as np
import pytest

from entfree import cli
from entfree.report import Check, RunReport, atomic_write, csv_text, report_json

FINITE_COLUMNS = ["t", "purity", "schmidt1", "schmidt2", "coupling_C", "fichtre_residual",
                  "fidelity_meanfield"]
CONTINUUM_COLUMNS = ["t", "norm", "energy", "entropy", "mean_xA", "mean_xB", "classical_xA",
                     "classical_xB"]


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_presets_list_and_show(capsys):
    assert cli.main(["presets", "list"]) == 0
    names = capsys.readouterr().out.split()
    assert {"factorisable_invariance", "sigma_zz_rate"} <= set(names)
    assert cli.main(["presets", "show", "sigma_zz_rate"]) == 0
    assert "sigma_zz" in capsys.readouterr().out
    assert cli.main(["presets", "show", "nope"]) == 2


def test_every_preset_parses():
    for name in cli.preset_names():
        cfg = cli.load_preset(name)
        assert cfg.id == name


def test_factorisable_invariance_preset(tmp_path):
    assert cli.main(["run", "factorisable_invariance", "--output-dir", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "factorisable_invariance.csv")
    assert header == FINITE_COLUMNS
    assert data[:, 1].min() >= 1 - 1e-9
    rep = json.loads((tmp_path / "factorisable_invariance.json").read_text())
    assert list(rep) == ["scenario_id", "passed", "wall_time", "checks", "outputs", "warnings"]
    assert rep["passed"] is True


def test_sigma_zz_rate_preset(tmp_path):
    assert cli.main(["run", "sigma_zz_rate", "--output-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "sigma_zz_rate.json").read_text())
    (check,) = rep["checks"]
    assert abs(check["value"] + 4.0) <= 1e-3


def test_missing_dt_is_config_error(tmp_path):
    out = tmp_path / "out"
    path = write(tmp_path, f"[scenario]\nmode = finite\nt_final = 1.0\n[output]\ndir = {out}\n")
    assert cli.main(["run", path]) == 2
    assert not out.exists()


@pytest.mark.parametrize("text", [
    "[scenario]\nmode = finite\ndt = 0.1\nt_final = 1\nbogus = 1\n",
    "[scenario]\nmode = finite\ndt = 0.1\nt_final = 1\n[extra]\nx = 1\n",
    "[scenario]\nmode = sideways\n",
    "[scenario]\nmode = finite\ndt = -0.1\nt_final = 1\n",
    "[scenario]\nmode = finite\ndt = 0.3\nt_final = 1\n",
    "[scenario]\nmode = finite\ndt = 0.1\nt_final = 1\n[finite]\nd_a = 3\nhamiltonian = sigma_zz\n",
    "[scenario]\nmode = finite\ndt = 0.1\nt_final = 1\n[finite]\nmeanfield = maybe\n",
    "[scenario]\nmode = continuum\ndt = 0.1\nt_final = 1\n[continuum]\nn_a = 100\n",
    "not an ini file",
])
def test_invalid_configs_exit_2(tmp_path, text):
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, text), "--output-dir", str(out)]) == 2
    assert not out.exists()


def test_unknown_config_path():
    assert cli.main(["run", "/nonexistent/config.ini"]) == 2


def test_numerical_precondition_exit_3(tmp_path):
    path = write(tmp_path, "[scenario]\nmode = continuum\ndt = 0.1\nt_final = 1.0\n")
    assert cli.main(["run", path, "--output-dir", str(tmp_path / "o")]) == 3


def test_io_error_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "sigma_zz_rate", "--output-dir", str(blocker / "sub")]) == 4


def test_failing_check_exit_1(tmp_path):
    path = write(tmp_path, "[scenario]\nmode = finite\nseed = 3\ndt = 0.01\nt_final = 0.5\n"
                           "[finite]\nhamiltonian = random\n[tolerances]\npurity_min = 0.9999\n")
    assert cli.main(["run", path, "--output-dir", str(tmp_path / "o")]) == 1
    rep = json.loads((tmp_path / "o" / "cfg.json").read_text())
    assert rep["passed"] is False and rep["checks"][0]["passed"] is False


def test_environment_overrides_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", "sigma_zz_rate"]) == 0
    assert (tmp_path / "env" / "sigma_zz_rate.csv").exists()


def test_relative_output_dir_and_file_inputs(tmp_path):
    h = np.kron(np.diag([1, -1]), np.diag([1, -1])).astype(complex)
    np.save(tmp_path / "h.npy", h)
    np.savetxt(tmp_path / "psi.txt", np.array([1, 1, 1, 1], dtype=complex) / 2)
    path = write(tmp_path, "[scenario]\nid = fromfile\nmode = finite\ndt = 0.01\nt_final = 1\n"
                           "[finite]\nhamiltonian = file\nhamiltonian_file = h.npy\n"
                           "initial_state = file\ninitial_state_file = psi.txt\n"
                           "rate_check = true\n[output]\ndir = results\n")
    assert cli.main(["run", path]) == 0
    header, data = read_csv(tmp_path / "results" / "fromfile.csv")
    assert np.max(np.abs(data[:, 1] - (1 - np.sin(2 * data[:, 0]) ** 2 / 2))) <= 1e-8


def test_rate_check_needs_product(tmp_path):
    path = write(tmp_path, "[scenario]\nmode = finite\ndt = 0.1\nt_final = 1\n"
                           "[finite]\ninitial_state = random\nrate_check = true\n")
    assert cli.main(["run", path, "--output-dir", str(tmp_path / "o")]) == 3


def test_continuum_run_and_schema(tmp_path):
    path = write(tmp_path, "[scenario]\nid = c\nmode = continuum\ndt = 0.002\nt_final = 0.2\n"
                           "[continuum]\nn_a = 64\nx_min_a = -9.6\ndx_a = 0.3\nx0_a = -2\n"
                           "x0_b = 2\nstrength = 1.0\nclassical = true\n")
    assert cli.main(["run", path, "--output-dir", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "c.csv")
    assert header == CONTINUUM_COLUMNS
    assert np.all(np.isfinite(data))


def test_continuum_with_mask_and_externals(tmp_path):
    path = write(tmp_path, "[scenario]\nid = m\nmode = continuum\ndt = 0.002\nt_final = 0.1\n"
                           "[continuum]\nn_a = 64\nx_min_a = -9.6\ndx_a = 0.3\nx0_a = -2\n"
                           "x0_b = 2\nmask_ramp = 2.0\nexternal_a_kind = harmonic\n"
                           "external_a_strength = 1.0\n[tolerances]\nentropy_max = 1.0\n")
    assert cli.main(["run", path, "--output-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "m.json").read_text())
    assert [c["name"] for c in rep["checks"]] == ["final_entropy"]


def test_byte_identical_reruns(tmp_path):
    for k in range(2):
        assert cli.main(["run", "random_coupled", "--output-dir", str(tmp_path / str(k))]) == 0
    a = (tmp_path / "0" / "random_coupled.csv").read_bytes()
    b = (tmp_path / "1" / "random_coupled.csv").read_bytes()
    assert a == b


def test_verify_filter(tmp_path, capsys):
    assert cli.main(["verify", "--filter", "theorem0", "--output-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["checks"] and all(c["name"].startswith("theorem0") for c in rep["checks"])


def test_verify_filter_matching_nothing(tmp_path, capsys):
    assert cli.main(["verify", "--filter", "no_such_check", "--output-dir", str(tmp_path)]) == 0
    assert "warning" in capsys.readouterr().err
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["checks"] == [] and rep["passed"] is True


def test_verify_glob_and_jobs(tmp_path):
    from entfree.verify import select, verify_suite

    assert select("*_residual") == ["mixed_product_residual"]
    assert select("[tm]*") == ["theorem0_classifier", "mixed_product_residual"]
    rep = verify_suite("[tm]*", jobs=2)
    # registry order is kept even when entries run concurrently
    assert [c.name.split(".")[0] for c in rep.checks][0] == "theorem0_classifier"
    assert rep.passed


def test_verify_mode_config(tmp_path):
    assert cli.main(["run", "verify_theorem0", "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "verify_theorem0.json").exists()


def test_bad_arguments_exit_2():
    assert cli.main(["frobnicate"]) == 2


# ---------------------------------------------------------------- report helpers


def test_check_comparisons():
    assert Check("a", 1.0, 1.0, "<=").passed
    assert not Check("a", 1.0, 1.0, "<").passed
    assert Check("a", -3.9995, 1e-3, "abs<=", -4.0).passed
    assert not Check("a", float("nan"), 1.0, ">=").passed
    with pytest.raises(ValueError):
        Check("a", 1.0, 1.0, "~")


def test_json_and_csv_formats():
    rep = RunReport("x", 0.5, [Check("c", 0.1, 1.0)], ["f"])
    text = report_json(rep)
    assert '"value": 0.10000000000000001' in text
    assert json.loads(text)["checks"][0]["target"] is None
    body = csv_text(("t", "v"), [(0.1, 1 / 3), (float("nan"), 2)])
    assert body.splitlines() == ["t,v", "0.10000000000000001,0.33333333333333331", "nan,2"]
    assert "PASS" in rep.table()


def test_atomic_write_leaves_no_temporaries(tmp_path):
    path = tmp_path / "d" / "f.txt"
    atomic_write(str(path), "hello")
    atomic_write(str(path), "again")
    assert path.read_text() == "again"
    assert os.listdir(tmp_path / "d") == ["f.txt"]


def test_inline_comments_and_empty_values(tmp_path):
    path = write(tmp_path, "[scenario]\nid = c ; name\nmode = finite   ; finite run\n"
                           "dt = 0.01\nt_final = 0.1\n[finite]\nhamiltonian_file =\n"
                           "[tolerances]\npurity_min =\n")
    cfg = cli.load_config(path)
    assert cfg.id == "c" and cfg.mode == "finite"
    assert cfg.finite["hamiltonian_file"] is None and cfg.tolerances["purity_min"] is None
