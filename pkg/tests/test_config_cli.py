import json
import os
import subprocess
import sys

import pytest

from kirchhoff_qp import __version__
from kirchhoff_qp.cli import main
from kirchhoff_qp.config import load_config, parse_config
from kirchhoff_qp.errors import ConfigError

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(os.path.dirname(HERE), "configs")

SMALL = """
[problem]
epsilon = {eps}
lambda = 1.0
[numerics]
box = 8, 8
max_steps = 6
[diagnose]
N = {N}
[scan]
n_lambda = 3
N_list = 4
check_G0 = false
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# -- config ---------------------------------------------------------------------
def test_parse_defaults():
    cfg = parse_config("")
    assert cfg.epsilon == 1e-3 and cfg.box == (16, 16) and cfg.omega_bar == "sqrt2"


def test_parse_sections():
    cfg = parse_config(SMALL.format(eps=0.01, N=3))
    assert cfg.epsilon == 0.01 and cfg.box == (8, 8) and cfg.diagnose["N"] == 3
    assert cfg.scan["N_list"] == (4,) and cfg.scan["check_G0"] is False


@pytest.mark.parametrize("text,field", [
    ("[problem]\nepsilon = abc\n", "problem.epsilon"),
    ("[numerics]\nbox = 1, 2, 3\n", "numerics.box"),
    ("[numerics]\nN0 = 2.5\n", "numerics.N0"),
    ("[scan]\ncheck_G0 = maybe\n", "scan.check_G0"),
    ("[problem]\nwhat = 1\n", "problem.what"),
    ("[extra]\na = 1\n", "extra"),
    ("[problem]\nepsilon = -1\n", "problem.epsilon"),
    ("no section header", "malformed"),
])
def test_parse_errors_name_field(text, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        parse_config(text)


def test_unknown_preset():
    cfg = parse_config("[problem]\nomega_bar = golden\n")
    with pytest.raises(ConfigError, match="omega_bar"):
        cfg.problem()
    cfg = parse_config("[problem]\nforcing = nope\n")
    with pytest.raises(ConfigError, match="forcing"):
        cfg.problem()


def test_explicit_frequency_and_forcing_file(tmp_path):
    from kirchhoff_qp.fourier import TorusFunction as TF
    f = TF.from_modes(1, 1, (1, 1), {((1,), (1,)): 0.5})
    (tmp_path / "g.json").write_text(f.to_json())
    cfg = load_config(write(tmp_path, "[problem]\nomega_bar = 1.5\ngamma0 = 0.1\nforcing = g.json\n"))
    pd = cfg.problem()
    assert pd.fd.omega_bar == (1.5,) and pd.g.coeff((1,), (1,)) == 0.5


def test_exponent_overrides():
    es = parse_config("[exponents]\ndelta = 0.2\n").exponent_set(1)
    assert es.delta == 0.2 and es.tau == 1.0


def test_hash_stable_and_sensitive():
    a, b = parse_config(SMALL.format(eps=0.01, N=3)), parse_config(SMALL.format(eps=0.01, N=3))
    assert a.hash() == b.hash() and len(a.hash()) == 64
    assert a.hash() != parse_config(SMALL.format(eps=0.02, N=3)).hash()
    assert a.stamp()["version"] == __version__


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.ini")


# -- cli -----------------------------------------------------------------------
def test_solve_baseline(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--config", os.path.join(CONFIGS, "baseline.ini"),
                 "--out", str(out)]) == 0
    sol = json.loads((out / "solution.json").read_text())
    assert sol["status"] == "converged" and sol["residual_s0"] <= 1e-9
    ratio = sol["collocation_residual"] / sol["residual_s0"]
    assert 0.1 <= ratio <= 10
    lines = (out / "trace.jsonl").read_text().splitlines()
    head = json.loads(lines[0])
    assert head["config_hash"] == sol["config_hash"] and head["version"] == __version__
    recs = [json.loads(x) for x in lines[1:]]
    assert [r["n"] for r in recs] == list(range(len(recs)))
    assert (out / "summary.txt").read_text().startswith("kirchhoff-qp")


def test_solve_eps_zero(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--config", os.path.join(CONFIGS, "eps_zero.ini"),
                 "--out", str(out)]) == 0
    assert len((out / "trace.jsonl").read_text().splitlines()) == 2  # header + one step


def test_solve_bad_delta(tmp_path, capsys):
    code = main(["solve", "--config", os.path.join(CONFIGS, "bad_delta.ini"),
                 "--out", str(tmp_path / "o")])
    assert code == 1 and "delta in (0, 1/3)" in capsys.readouterr().err


def test_solve_override(tmp_path):
    cfg = write(tmp_path, "[problem]\nepsilon = 0\n[exponents]\ndelta = 0.4\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--override-exponents"]) == 0


def test_solve_bad_parameter_exit_2(tmp_path):
    cfg = write(tmp_path, "[problem]\nlambda = 0.7071067811865476\n[numerics]\nbox = 6, 6\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    sol = json.loads((tmp_path / "o" / "solution.json").read_text())
    assert sol["status"] == "BadParameter"


def test_usage_errors(tmp_path):
    assert main([]) == 1
    assert main(["solve"]) == 1
    assert main(["solve", "--config", str(tmp_path / "missing.ini")]) == 1


def test_diagnose(tmp_path):
    cfg = write(tmp_path, SMALL.format(eps=0.001, N=2))
    out = tmp_path / "o"
    assert main(["diagnose", "--config", cfg, "--out", str(out), "--theta", "0.3"]) == 0
    rep = json.loads((out / "diagnose.json").read_text())
    assert rep["theta"] == 0.3 and rep["N"] == 2 and "config_hash" in rep
    assert isinstance(rep["bad_theta_intervals"], list)


def test_diagnose_eps_zero_matches_closed_form(tmp_path):
    import numpy as np
    from kirchhoff_qp.multiscale import diniz_intervals
    cfg = write(tmp_path, SMALL.format(eps=0.0, N=2))
    out = tmp_path / "o"
    assert main(["diagnose", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "diagnose.json").read_text())
    h = 2.0 ** -2 / 4
    ivs = [iv for l in range(-2, 3) for j in range(-1, 4) if j
           for iv in diniz_intervals(1.0, 1.0, l, j, (np.sqrt(2),), 2 * 2.0 ** -2)]
    assert rep["bad_theta_intervals"]
    for lo, hi in rep["bad_theta_intervals"]:
        for t in np.arange(lo, hi + h / 2, h):
            assert any(a - h <= t <= b + h for a, b in ivs)


def test_diagnose_N_zero(tmp_path):
    cfg = write(tmp_path, SMALL.format(eps=0.001, N=0))
    out = tmp_path / "o"
    assert main(["diagnose", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "diagnose.json").read_text())
    assert rep["n_singular"] == 0 and rep["clusters"] == []


def test_diagnose_unknown_preset(tmp_path):
    cfg = write(tmp_path, "[problem]\nomega_bar = golden\n")
    assert main(["diagnose", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_scan_deterministic(tmp_path):
    cfg = write(tmp_path, SMALL.format(eps=0.001, N=2))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["scan", "--config", cfg, "--out", str(a)]) == 0
    assert main(["scan", "--config", cfg, "--out", str(b), "--seed", "0"]) == 0
    assert (a / "scan.csv").read_bytes() == (b / "scan.csv").read_bytes()
    summ = json.loads((a / "summary.json").read_text())
    assert 0 <= summ["results"][0]["bad_fraction"] <= 1
    assert (a / "scan.csv").read_text().startswith("# config_hash=")


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "kirchhoff_qp", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
