from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from diffeokit import cli, fibrancy as fb, simplicial as sx
from diffeokit.suite import SuiteConfig, checks_for, run_suite


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr().out


def write(path, text):
    path.write_text(text)
    return str(path)


# -- verify --------------------------------------------------------------------------

def test_verify_cutoff(capsys):
    code, out = run(capsys, "verify", "cutoff", "--eps", "0.2")
    assert code == 0 and "PASS" in out


def test_verify_equidef_json(capsys, tmp_path):
    code, out = run(capsys, "verify", "equidef", "--pair", "5,6", "--n", "1", "--eps", "0.2",
                    "--budget", "500", "--seed", "3", "--json", "--out", str(tmp_path))
    assert code == 0
    data = json.loads(out)
    assert data["pass"]
    assert (tmp_path / "equidef.json").exists()


def test_verify_equidef_bad_eps(capsys):
    code, _ = run(capsys, "verify", "equidef", "--pair", "1,2", "--eps", "0.6")
    assert code == 2


def test_verify_circle_unblended_fails(capsys):
    code, _ = run(capsys, "verify", "circle-retract", "--no-blend", "--budget", "500")
    assert code == 1


def test_verify_identities(capsys, tmp_path):
    path = write(tmp_path / "h.json", sx.horn(3, 1).to_json())
    code, _ = run(capsys, "verify", "identities", "--input", path)
    assert code == 0


# -- fill, obstruction, realize, lift, retract ---------------------------------------

def test_fill_abelian(capsys, tmp_path):
    F = fb.restrict_to_horn(fb.random_polynomial(3, np.random.default_rng(0)))
    path = write(tmp_path / "horn.json", F.to_json())
    code, out = run(capsys, "fill", "abelian", "--n", "3", "--input", path, "--json")
    assert code == 0
    assert json.loads(out)["filler"]["arity_in"] == 3


def test_fill_simplicial_none(capsys, tmp_path):
    path = write(tmp_path / "bd.json", sx.boundary_delta(2).to_json())
    code, out = run(capsys, "fill", "simplicial", "--input", path, "--n", "2", "--k", "1",
                    "--faces", '{"0": "12", "2": "01"}', "--json")
    assert code == 0
    assert json.loads(out)["exists"] is False


def test_obstruction_halfline(capsys):
    code, out = run(capsys, "obstruction", "halfline", "--json")
    assert code == 0
    assert json.loads(out)["h2_exact"] == "-6"


def test_obstruction_rank(capsys):
    code, out = run(capsys, "obstruction", "rank", "--n", "3", "--json")
    assert code == 0
    assert json.loads(out)["details"]["contradiction"] is True


@pytest.mark.parametrize("report", ["cells", "seams", "product-probe"])
def test_realize_reports(capsys, tmp_path, report):
    path = write(tmp_path / "d1.json", sx.delta(1).to_json())
    code, out = run(capsys, "realize", "--input", path, "--report", report, "--json",
                    "--budget", "200")
    assert code == 0
    data = json.loads(out)
    if report == "cells":
        assert data["counts"] == [2, 1]


def test_lift_mismatch_exit(capsys, tmp_path):
    path = write(tmp_path / "mm.json", fb.mismatched_phase_horn().to_json())
    code, out = run(capsys, "lift", "s1-horn", "--input", path, "--json")
    assert code == 1
    assert json.loads(out)["lifted"] is False


def test_lift_affine(capsys, tmp_path):
    path = write(tmp_path / "ok.json", fb.random_affine_phase_horn(2, np.random.default_rng(1)).to_json())
    code, _ = run(capsys, "lift", "s1-horn", "--input", path)
    assert code == 0


@pytest.mark.parametrize("what", ["dopen", "loop"])
def test_retract(capsys, what):
    code, _ = run(capsys, "retract", what, "--n", "2", "--budget", "2000")
    assert code == 0


def test_missing_input_file(capsys):
    code, _ = run(capsys, "realize", "--input", "/nonexistent/a.json")
    assert code == 2


# -- plots ---------------------------------------------------------------------------

def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_plot_R_endpoints(capsys, tmp_path):
    code, _ = run(capsys, "plot", "R", "--eps", "0.2", "--samples", "1001", "--out", str(tmp_path))
    assert code == 0
    header, data = read_csv(tmp_path / "R_eps0.2.csv")
    assert header == ["theta", "R"] and len(data) == 1001
    np.testing.assert_allclose(data[0], [-0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(data[-1], [0.5, 0.5], atol=1e-15)
    assert (tmp_path / "R_eps0.2.svg").read_text().startswith("<svg")


def test_plot_cutoff_monotone(capsys, tmp_path):
    run(capsys, "plot", "cutoff", "--out", str(tmp_path))
    _, data = read_csv(tmp_path / "cutoff_eps0.2.csv")
    assert data[0, 1] == 0.0 and data[-1, 1] == 1.0
    assert np.all(np.diff(data[:, 1]) >= 0)


def test_plot_obstruction(capsys, tmp_path):
    run(capsys, "plot", "obstruction", "--out", str(tmp_path))
    _, data = read_csv(tmp_path / "obstruction_eps0.2.csv")
    np.testing.assert_allclose(data[:, 1], -3 * data[:, 0] ** 2, atol=1e-12)


def test_plot_section(capsys, tmp_path):
    run(capsys, "plot", "section", "--out", str(tmp_path), "--samples", "101")
    header, data = read_csv(tmp_path / "section_eps0.2.csv")
    assert header == ["theta", "c0", "c1", "c2"]
    np.testing.assert_allclose(data[:, 1:].sum(axis=1), 1.0, atol=1e-12)


# -- suites and config ---------------------------------------------------------------

def test_unknown_suite():
    with pytest.raises(ValueError):
        checks_for("nope")
    with pytest.raises(SystemExit):
        cli.main(["suite", "nope"])


def test_unwritable_out(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _ = run(capsys, "suite", "simplicial", "--out", str(blocker / "sub"))
    assert code == 2


def test_suite_bundle_and_seed_recorded(capsys, tmp_path):
    code, out = run(capsys, "suite", "simplicial", "--seed", "7", "--out", str(tmp_path))
    assert code == 0
    assert "[PASS] homology" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["passed"] and summary["config"]["seed"] == 7
    for name, entry in summary["checks"].items():
        rep = json.loads((tmp_path / entry["file"]).read_text())
        assert rep["details"]["config"]["seed"] == 7


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('seed = 11\nbudget = 300\n[budgets]\nnormal_form = 50\n')
    args = cli.resolve(cli.build_parser().parse_args(["suite", "realization", "--config", str(cfg)]))
    assert (args.seed, args.budget, args.budgets) == (11, 300, {"normal_form": 50})
    args = cli.resolve(cli.build_parser().parse_args(
        ["--seed", "5", "suite", "realization", "--config", str(cfg)]))
    assert args.seed == 5 and args.budget == 300


def bundle_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_deterministic_bundles(tmp_path):
    budgets = {"normal_form": 300, "product_map": 200}
    a, b = tmp_path / "a", tmp_path / "b"
    run_suite(SuiteConfig("realization", 4, out=str(a), budgets=budgets))
    run_suite(SuiteConfig("realization", 4, out=str(b), budgets=budgets))
    assert bundle_bytes(a) == bundle_bytes(b)


def test_parallel_matches_serial(tmp_path):
    budgets = {"filler_instances": 3, "circle": 1000, "dopen": 1000}
    a, b = tmp_path / "a", tmp_path / "b"
    run_suite(SuiteConfig("fibrancy", 1, out=str(a), budgets=budgets))
    run_suite(SuiteConfig("fibrancy", 1, jobs=3, out=str(b), budgets=budgets))
    assert bundle_bytes(a) == bundle_bytes(b)


def test_different_seed_changes_reports(tmp_path):
    budgets = {"normal_form": 100, "product_map": 100}
    a, b = tmp_path / "a", tmp_path / "b"
    run_suite(SuiteConfig("realization", 1, out=str(a), budgets=budgets))
    run_suite(SuiteConfig("realization", 2, out=str(b), budgets=budgets))
    assert bundle_bytes(a) != bundle_bytes(b)
