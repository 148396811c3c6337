import csv
import json

import numpy as np
import pytest

from oses_chain.cli import RunConfig, ConfigError, main
from oses_chain.oses import degeneracy_structure


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return header, {name: body[:, i] for i, name in enumerate(header)}


def lambdas(cols, k):
    return np.column_stack([cols[f"lambda_{i}"] for i in range(1, k + 1)])


def test_header_names_every_column(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["run", "--scenario", "four-site", "--tmax", "0.1", "--out", str(out)]) == 0
    header, _ = read_csv(out)
    expected = ["time"] + [f"lambda_{i}" for i in range(1, 17)] + [f"schmidt_{i}" for i in range(1, 17)]
    expected += ["osee", "purity", "n_1", "n_2", "n_3", "n_4"]
    expected += [f"abs_xi_{j}_{l}" for j in range(1, 5) for l in range(j + 1, 5)]
    expected += ["block_a2", "block_a1", "coherence_1", "coherence_2"]
    assert header == expected


def test_csv_is_byte_identical_and_lf(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["run", "--scenario", "two-site", "--tmax", "1", "--gamma", "0.1"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    raw = a.read_bytes()
    assert raw == b.read_bytes()
    assert b"\r" not in raw
    assert raw.endswith(b"\n")


def test_rows_satisfy_purity_sum(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["run", "--scenario", "four-site", "--tmax", "2", "--out", str(out)]) == 0
    _, cols = read_csv(out)
    total = lambdas(cols, 16).sum(axis=1)
    assert np.max(np.abs(total - cols["purity"])) <= 1e-9
    np.testing.assert_allclose(cols["schmidt_1"] ** 2, cols["lambda_1"], rtol=1e-10)
    np.testing.assert_allclose(cols["block_a2"] + cols["block_a1"] + 2 * (cols["coherence_1"] + cols["coherence_2"]),
                               cols["purity"], atol=1e-9)


def test_two_site_closed_run_has_112_structure(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["run", "--scenario", "two-site", "--gamma", "0", "--tmax", "5", "--stride", "50",
                 "--out", str(out)]) == 0
    _, cols = read_csv(out)
    lam = lambdas(cols, 4)
    patterns = [degeneracy_structure(row) for row in lam[1:]]
    typical = sum(sorted(p) == [1, 1, 2] for p in patterns)
    assert typical >= len(patterns) - 2
    np.testing.assert_allclose(cols["abs_xi_1_2"][1:], 1.0, atol=1e-9)


def test_two_site_dephased_asymptotics(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["run", "--scenario", "two-site", "--out", str(out), "--stride", "1000"]) == 0
    _, cols = read_csv(out)
    assert cols["time"][-1] == 20
    assert abs(cols["osee"][-1] - np.log(2)) <= 1e-3
    assert abs(cols["purity"][-1] - 0.5) <= 1e-3


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    out_file = tmp_path / "from_file.csv"
    cfg.write_text(f"# two-site run\nscenario = two-site\ngamma=0.5\ntmax = 0.5\nout={out_file}\n")
    assert main(["run", "--config", str(cfg)]) == 0
    assert out_file.exists()
    flagged = tmp_path / "flag.csv"
    assert main(["run", "--config", str(cfg), "--tmax", "0.2", "--out", str(flagged)]) == 0
    _, cols = read_csv(flagged)
    assert cols["time"][-1] == pytest.approx(0.2)


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--dt", "0"],
        ["run", "--gamma", "-1"],
        ["run", "--gamma", "nan"],
        ["run", "--tmax", "1.0005", "--dt", "0.001"],
        ["run", "--scenario", "two-site", "--cut", "2"],
        ["run", "--scenario", "four-site", "--sites", "3"],
        ["run", "--method", "mps", "--chi", "0"],
        ["run", "--scenario", "moon"],
        ["compare", "--scenario", "chain"],
    ],
)
def test_usage_errors_exit_2(tmp_path, argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv + ["--out", str(tmp_path / "x")])
    assert info.value.code == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(SystemExit) as info:
        main(["run", "--config", str(cfg)])
    assert info.value.code == 2


def test_integration_failure_exit_3(tmp_path, capsys):
    code = main(["run", "--scenario", "chain", "--gamma", "10", "--dt", "0.5", "--tmax", "20", "--stride", "1",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 3
    assert "diverged" in capsys.readouterr().err


def test_compare_two_site_passes(tmp_path):
    out = tmp_path / "r.json"
    assert main(["compare", "--scenario", "two-site", "--tmax", "5", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"]
    assert all(v < 1e-6 for v in report["max_deviation"].values())


def test_compare_truncated_breaches(tmp_path):
    out = tmp_path / "r.json"
    code = main(["compare", "--scenario", "four-site", "--chi", "2", "--tmax", "2", "--out", str(out)])
    report = json.loads(out.read_text())
    assert code == 4
    assert report["purity_deficit"] > 0
    assert report["discarded_weight"] > 0
    assert not report["passed"]


def test_compare_zero_duration(tmp_path):
    out = tmp_path / "r.json"
    assert main(["compare", "--scenario", "four-site", "--tmax", "0", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["samples"] == 1
    assert all(v <= 1e-14 for v in report["max_deviation"].values())


def test_mps_run_and_plot(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["run", "--scenario", "four-site", "--method", "mps", "--tmax", "0.5", "--emit-plot",
                 "--out", str(out)]) == 0
    svg = (tmp_path / "m.svg").read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "</svg>" in svg
    _, cols = read_csv(out)
    assert np.max(np.abs(lambdas(cols, 16).sum(axis=1) - cols["purity"])) <= 1e-9


def test_chain_scenario_runs_exact(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["run", "--scenario", "chain", "--tmax", "0.2", "--cut", "2", "--out", str(out)]) == 0
    header, cols = read_csv(out)
    assert "lambda_16" in header and "coherence_2" in header
    assert np.max(np.abs(lambdas(cols, 16).sum(axis=1) - cols["purity"])) <= 1e-9


def test_resolved_defaults():
    cfg = RunConfig(scenario="four-site").resolved()
    assert (cfg.sites, cfg.gamma, cfg.cut, cfg.chi, cfg.stride) == (4, 0.3, 2, 16, 10)
    with pytest.raises(ConfigError):
        RunConfig(stride=0).resolved()
