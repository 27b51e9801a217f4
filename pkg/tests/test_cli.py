import json
from fractions import Fraction

from typer.testing import CliRunner

from coarsebound.chains import Chain, format_chain
from coarsebound.cli import OutputFormat, RunConfig, app, run
from coarsebound.constructions import z_line_chain
from coarsebound.spaces import parse_space

runner = CliRunner()


def _invoke(tmp_path, *args, name="out.json"):
    out = tmp_path / name
    result = runner.invoke(app, ["--out", str(out), *args])
    return result, out


def test_profile_exact_json(tmp_path):
    result, out = _invoke(tmp_path, "profile", "isodiametric", "--space", "zd:2", "--r", "1", "--exact")
    assert result.exit_code == 0
    payload = json.loads(out.read_text())
    assert payload["value"] == "5/12"
    assert payload["exact"] is True
    assert len(payload["checksum"]) == 16


def test_vanish_tsv(tmp_path):
    result, out = _invoke(tmp_path, "--format", "tsv", "cert", "vanish", "--space", "zd:1", "--rmax", "4", name="k.tsv")
    assert result.exit_code == 0
    header, *rows = out.read_text().splitlines()
    assert header.split("\t") == ["R", "K_R", "K_R_value"]
    for row in rows:
        R, _, value = row.split("\t")
        assert abs(float(value) - (int(R) - 0.5)) < 1e-3


def test_output_is_deterministic(tmp_path):
    args = ["cert", "solve", "--space", "zd:2", "--radius", "3", "--k", "1/8"]
    _invoke(tmp_path, *args, name="a.json")
    _invoke(tmp_path, *args, name="b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    payload = json.loads((tmp_path / "a.json").read_text())
    assert payload["feasible"] is False
    assert payload["audit"]["strict"] is True


def test_spread_check_passes(tmp_path):
    result, out = _invoke(tmp_path, "tails", "spread", "--space", "zd:2", "--radius", "5", "--check")
    assert result.exit_code == 0
    assert json.loads(out.read_text())["ok"] is True


def test_bad_space_is_usage_error(tmp_path):
    result, out = _invoke(tmp_path, "space", "ball", "--space", "zd:0", "--radius", "2")
    assert result.exit_code == 1
    assert not out.exists()


def test_round_below_lower_bound_fails_validation(tmp_path):
    z1 = parse_space("zd:1")
    chain = tmp_path / "line.chain"
    chain.write_text(format_chain(z_line_chain(3), z1, 3))
    result, _ = _invoke(tmp_path, "tails", "round", "--chain", str(chain), "--lower", "2")
    assert result.exit_code == 2
    result, out = _invoke(tmp_path, "tails", "round", "--chain", str(chain), "--lower", "1", name="ok.json")
    assert result.exit_code == 0
    assert json.loads(out.read_text())["tails"] == 5


def test_metrics_textfile(tmp_path):
    prom = tmp_path / "metrics.prom"
    result, _ = _invoke(tmp_path, "--metrics-out", str(prom), "cert", "solve", "--space", "zd:1", "--radius", "3", "--k", "3")
    assert result.exit_code == 0
    assert "coarsebound_solves_total" in prom.read_text()


def test_chain_boundary_dump(tmp_path):
    z2 = parse_space("zd:2")
    edge = Chain.from_terms(1, [((z2.parse_point("0,0"), z2.parse_point("1,0")), 1)])
    chain = tmp_path / "edge.chain"
    chain.write_text(format_chain(edge, z2, 2))
    result, out = _invoke(tmp_path, "chain", "boundary", "--chain", str(chain))
    assert result.exit_code == 0
    payload = json.loads(out.read_text())
    assert payload["dimension"] == 0
    assert payload["terms"] == 2


def test_run_directly(tmp_path):
    out = tmp_path / "ball.tsv"
    config = RunConfig(
        command="space ball",
        params={"space": "zd:2", "radius": 2},
        out=out,
        output_format=OutputFormat.TSV,
    )
    assert run(config) == 0
    assert out.read_text().splitlines()[-1] == "2\t8\t13"
    assert run(RunConfig(command="space nowhere")) == 1


def test_tight_cut_is_feasible_from_the_cli(tmp_path):
    result, out = _invoke(tmp_path, "cert", "solve", "--space", "free:2", "--radius", "4", "--k", "53/108")
    assert result.exit_code == 0
    payload = json.loads(out.read_text())
    assert payload["feasible"] is True
    assert payload["slack"] == "0/1"


def test_upper_case_k_is_still_accepted(tmp_path):
    result, out = _invoke(tmp_path, "cert", "solve", "--space", "zd:1", "--radius", "3", "--K", "3")
    assert result.exit_code == 0
    assert json.loads(out.read_text())["feasible"] is True


def test_bww_takes_lower_case_k(tmp_path):
    z1 = parse_space("zd:1")
    dipole = Chain.zero_chain({z1.parse_point("-1"): Fraction(1), z1.parse_point("1"): Fraction(-1)})
    chain = tmp_path / "dipole.chain"
    chain.write_text(format_chain(dipole, z1, 3))
    result, out = _invoke(tmp_path, "cert", "bww", "--space", "zd:1", "--chain", str(chain), "--k", "1", "--radius", "3")
    assert result.exit_code == 0
    assert json.loads(out.read_text())["feasible"] is True
    result, out = _invoke(tmp_path, "cert", "bww", "--space", "zd:1", "--chain", str(chain), "--k", "1/4", "--radius", "3", name="w.json")
    assert result.exit_code == 0
    assert json.loads(out.read_text())["feasible"] is False


def test_vanish_takes_tol(tmp_path):
    result, out = _invoke(tmp_path, "cert", "vanish", "--space", "zd:1", "--rmax", "3", "--tol", "0.001")
    assert result.exit_code == 0
    table = json.loads(out.read_text())["table"]
    assert [row["R"] for row in table] == [1, 2, 3]
    for row in table:
        assert abs(row["K_value"] - (row["R"] - 0.5)) <= 0.001 * row["R"]


def test_transfer_over_power_growth(tmp_path):
    result, out = _invoke(tmp_path, "cert", "transfer", "--space", "zd:2", "--f", "power:1/2", "--radius", "3")
    assert result.exit_code == 0
    assert json.loads(out.read_text())["tails"] == 13


def test_repeated_runs_are_byte_identical(tmp_path):
    commands = [
        ["--format", "tsv", "cert", "vanish", "--space", "zd:2", "--rmax", "3"],
        ["--seed", "4", "profile", "coarea", "--space", "zd:2", "--f", "linear", "--trials", "20", "--radius", "3"],
        ["spec", "gap", "--space", "free:2", "--radius", "3"],
        ["tails", "spread", "--space", "heis", "--radius", "4", "--check"],
        ["--jobs", "2", "profile", "isodiametric", "--space", "zd:1", "--r", "3", "--exact", "--sweep"],
    ]
    for k, args in enumerate(commands):
        first, a = _invoke(tmp_path, *args, name=f"{k}a.out")
        second, b = _invoke(tmp_path, *args, name=f"{k}b.out")
        assert first.exit_code == second.exit_code == 0
        assert a.read_bytes() == b.read_bytes()
