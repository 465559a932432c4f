import csv
import json
import math

import pytest

from paraweight import cli
from paraweight.cli import RunConfig, compare_golden, main, parse_config, strip_volatile
from paraweight.errors import ConfigurationError


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_validate():
    cfg = cli.load_config(None)
    assert cfg == RunConfig()
    assert len(cfg.gammas()) == cfg.gamma_count
    assert cfg.gammas()[-1] * cfg.T <= cfg.tau_max


def test_parse_config_sections():
    cfg = parse_config("[grid]\nN = 128\n[probe]\nmodulus = loglip\nm = 2\n[ensemble]\nseed = 7\n")
    assert (cfg.N, cfg.modulus, cfg.m, cfg.seed) == (128, "loglip", 2, 7)


@pytest.mark.parametrize(
    "text,field",
    [
        ("[grid]\nN = 100\n", "grid.N"),
        ("[probe]\ns = 1.5\n", "probe.s"),
        ("[probe]\nmodulus = cubic\n", "probe.modulus"),
        ("[time]\nM = 16\n", "time.M"),
        ("[gamma]\nstop = 20\n", "gamma.stop"),
        ("[grid]\ncolour = red\n", "colour"),
        ("[grid]\nN = many\n", "N"),
    ],
)
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigurationError, match=field.replace(".", r"\.")):
        parse_config(text)


def test_bad_config_exits_2(tmp_path, capsys):
    p = write(tmp_path, "[grid]\nN = 100\n[probe]\ns = 2\n")
    assert main(["weights", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "grid.N" in err and "probe.s" in err
    assert main(["weights", "--config", str(tmp_path / "absent.ini")]) == 2


def test_seed_out_of_range_exits_2(tmp_path):
    assert main(["lp", "--seed", "-1", "--out", str(tmp_path), "--quiet"]) == 2


def test_weights_lip_closed_form(tmp_path):
    p = write(tmp_path, "[probe]\ntau_max = 10\n[gamma]\nstop = 10\n")
    out = tmp_path / "w"
    assert main(["weights", "--config", str(p), "--out", str(out), "--quiet"]) == 0
    rows = list(csv.DictReader((out / "weights_lip.csv").open()))
    assert float(rows[-1]["tau"]) == pytest.approx(10.0)
    for r in rows[1:]:
        exact = math.expm1(float(r["tau"]))
        assert abs(float(r["Phi"]) - exact) <= 1e-8 * exact
    suite = json.loads((out / "weights_suite.json").read_text())
    assert suite["verdict"] == "pass"


def test_lp_outputs(tmp_path):
    out = tmp_path / "lp"
    assert main(["lp", "--out", str(out), "--quiet"]) == 0
    assert (out / "field_random.spf").read_bytes()[:4] == b"SPF1"
    header = next(csv.reader((out / "lp_random.csv").open()))
    assert header == ["k", "delta_k"]


def test_para_identity_auto_m(tmp_path):
    p = write(tmp_path, "[grid]\nN = 128\n[ensemble]\nsize = 16\n")
    out = tmp_path / "para"
    assert main(["para", "--config", str(p), "--out", str(out), "--quiet"]) == 0
    data = json.loads((out / "para.json").read_text())
    assert data["m"] == 1
    assert data["m_source"] == "auto"
    for r in data["reports"]:
        if r["inequality"].startswith("coefficient_"):
            assert r["constant"] <= 1e-12


def test_para_rough_coefficient_runs(tmp_path):
    p = write(tmp_path, "[grid]\nN = 128\n[probe]\ncoefficients = scalar:2+sin\nm = 1\n[ensemble]\nsize = 8\n")
    assert main(["para", "--config", str(p), "--out", str(tmp_path / "r"), "--quiet"]) == 0


@pytest.fixture(scope="module")
def verify_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("verify")
    codes = [main(["verify", "--out", str(base / d), "--quiet"]) for d in ("a", "b")]
    return base, codes


def test_verify_is_deterministic(verify_runs):
    base, codes = verify_runs
    assert codes == [0, 0]
    a = json.loads((base / "a" / "suite.json").read_text())
    b = json.loads((base / "b" / "suite.json").read_text())
    assert "timestamp" in a
    assert json.dumps(strip_volatile(a), sort_keys=True) == json.dumps(strip_volatile(b), sort_keys=True)
    for name in ("gamma_sweep_lip.csv", "proof_ledger_lip.csv", "weights_lip.csv"):
        assert (base / "a" / name).read_bytes() == (base / "b" / name).read_bytes()


def test_compare_identical_and_perturbed(verify_runs, tmp_path, capsys):
    import shutil

    base, _ = verify_runs
    assert main(["compare", str(base / "a"), str(base / "b"), "--tol", "1e-12", "--quiet"]) == 0

    pert = tmp_path / "pert"
    shutil.copytree(base / "a", pert)
    path = pert / "weights_lip.csv"
    rows = list(csv.reader(path.open()))
    col = rows[0].index("Phi")
    rows[5][col] = repr(float(rows[5][col]) * (1 + 1e-3))
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    capsys.readouterr()
    assert main(["compare", str(pert), str(base / "b"), "--tol", "1e-6"]) == 1
    out = capsys.readouterr().out
    assert "weights_lip.csv row 5 column Phi" in out

    (pert / "weights_lip.csv").unlink()
    diff = compare_golden(pert, base / "b", 1e-6)
    assert not diff.passed
    assert any("weights_lip.csv" in s and "missing" in s for s in diff.structural)


def test_compare_header_change_is_structural(verify_runs, tmp_path):
    import shutil

    base, _ = verify_runs
    pert = tmp_path / "hdr"
    shutil.copytree(base / "a", pert)
    path = pert / "gamma_sweep_lip.csv"
    text = path.read_text().replace("min_c", "minimum", 1)
    path.write_text(text)
    diff = compare_golden(pert, base / "b")
    assert diff.structural and not diff.numeric
