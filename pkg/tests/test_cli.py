import subprocess
import sys

import numpy as np
import pytest

from graphquilt import io
from graphquilt.cli import main

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")

CFG = """[small]
graph = sbm
p = 30
n = 400
K = 2
o = 20
rank = 3
communities = 3
replications = 2
correlation = true
hub_k = 5
"""


@pytest.fixture
def scenario(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(CFG)
    return cfg


def test_full_chain(tmp_path, scenario, capsys):
    sim = tmp_path / "sim"
    assert main(["simulate", "--config", str(scenario), "--out", str(sim)]) == 0
    assert main(["estimate-cov", "--manifest", str(sim / "manifest.csv"),
                 "--out", str(tmp_path / "cov.csv")]) == 0
    est = io.read_observed(tmp_path / "cov.csv")
    ref = io.read_observed(sim / "cov.csv", sim / "mask.csv")
    np.testing.assert_allclose(est.filled(0.0), ref.filled(0.0), atol=1e-12)
    assert main(["complete", "--method", "bsvd-exact", "--rank", "3",
                 "--in", str(sim / "cov.csv"), "--mask", str(sim / "mask.csv"),
                 "--out", str(tmp_path / "sig.csv")]) == 0
    assert main(["graph", "--in", str(tmp_path / "sig.csv"), "--edges-target", "40",
                 "--out-edges", str(tmp_path / "e.csv")]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--est", str(tmp_path / "e.csv"),
                 "--truth", str(sim / "truth_edges.csv")]) == 0
    assert capsys.readouterr().out.startswith("f1=")


def test_complete_other_methods(tmp_path, scenario):
    sim = tmp_path / "sim"
    main(["simulate", "--config", str(scenario), "--out", str(sim)])
    for method, extra in (("nn", ["--nu", "auto", "--rank", "3"]),
                          ("lrf-spiked", ["--rank", "3"]), ("zero", [])):
        out = tmp_path / f"{method}.csv"
        assert main(["complete", "--method", method, "--in", str(sim / "cov.csv"),
                     "--out", str(out), *extra]) == 0
        assert io.read_matrix(out).shape == (30, 30)


def test_select_subcommands(tmp_path, scenario, capsys):
    sim = tmp_path / "sim"
    main(["simulate", "--config", str(scenario), "--out", str(sim)])
    cov = str(sim / "cov.csv")
    assert main(["select", "rank", "--in", cov, "--grid", "1,2,3",
                 "--out", str(tmp_path / "r.csv")]) == 0
    header, rows = io.read_table(tmp_path / "r.csv")
    assert "selected" in header and len(rows) == 3
    assert main(["select", "nu", "--in", cov, "--grid", "0.01,0.1",
                 "--folds", "2"]) == 0
    assert main(["select", "lambda", "--manifest", str(sim / "manifest.csv"),
                 "--grid", "0.05,0.1,0.3", "--subsamples", "3"]) == 0


def test_replicate_writes_tidy_table(tmp_path, scenario):
    out = tmp_path / "m.csv"
    assert main(["replicate", "--config", str(scenario), "--methods", "zero",
                 "--replications", "2", "--out", str(out), "--no-timestamp"]) == 0
    header, rows = io.read_table(out)
    assert header == ["method", "replication", "metric", "value"]
    assert {r[0] for r in rows} == {"zero"}


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[x]\np = 30\nwidth = 3\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: ConfigError:") and "bad.cfg:3" in err
    assert "\n" not in err


def test_parse_error_and_value_error_exit_codes(tmp_path, capsys):
    bad = tmp_path / "cov.csv"
    bad.write_text("1,2\n2,oops\n")
    assert main(["complete", "--method", "zero", "--in", str(bad)]) == 2
    assert "cov.csv:2" in capsys.readouterr().err
    good = tmp_path / "ok.csv"
    io.write_matrix(good, np.eye(3))
    assert main(["complete", "--method", "magic", "--in", str(good)]) == 1
    assert capsys.readouterr().err.startswith("error: ValueError:")
    assert main(["complete", "--method", "zero", "--in",
                 str(tmp_path / "missing.csv")]) == 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "graphquilt", "evaluate",
                        "--est", str(tmp_path / "none.csv"),
                        "--truth", str(tmp_path / "none.csv")],
                       capture_output=True, text=True)
    assert r.returncode == 1 and r.stderr.startswith("error: ")
