import json

import numpy as np
import pytest

from exact_estimation import cli
from exact_estimation import truncation as tr
from exact_estimation.exceptions import ParseError


@pytest.mark.parametrize(
    "text, label",
    [("geom:0.5", "geom:0.5"), ("invk", "invk"), ("inf", "inf"), ("poly:2:1.5", "poly:2:1.5")],
)
def test_parse_truncation(text, label):
    assert cli.parse_truncation(text).label() == label


def test_parse_sequence():
    law = cli.parse_truncation("seq:1,0.5,0.25")
    assert isinstance(law, tr.ExplicitLaw)
    assert law.survival(2) == 0.25


@pytest.mark.parametrize("text, token", [("geom:1.5", "1.5"), ("geom:x", "x"), ("bogus", "bogus"), ("invk:2", "invk")])
def test_parse_errors_name_token(text, token):
    with pytest.raises(ParseError) as info:
        cli.parse_truncation(text)
    assert info.value.token == token


def test_run_csv(capsys):
    assert cli.main(["run", "--model", "ar-bernoulli", "--estimator", "z", "--fn", "f2",
                     "--trunc", "geom:0.5", "--samples", "1000"]) == 0
    header, row = capsys.readouterr().out.strip().split("\n")
    assert header == "estimator,coupling,truncation,n_samples,mean,half_width_90,total_steps,seed"
    fields = row.split(",")
    assert fields[:4] == ["z", "forward", "geom:0.5", "1000"]
    assert fields[-1] == "0"


def test_run_json_budget(capsys):
    assert cli.main(["run", "--model", "mm1", "--estimator", "harris-independent", "--trunc", "invk",
                     "--steps", "20000", "--format", "json", "--seed", "7"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["total_steps"] <= 20000 and d["seed"] == 7 and d["coupling"] == "independent"


def test_run_writes_out_and_ecdf(tmp_path):
    out, cdf = tmp_path / "r.csv", tmp_path / "cdf.csv"
    assert cli.main(["run", "--model", "mm1", "--estimator", "harris-improved", "--fn", "identity",
                     "--trunc", "invk", "--samples", "500", "--out", str(out), "--ecdf", str(cdf)]) == 0
    assert out.read_text().startswith("estimator,")
    assert cdf.read_text().startswith("x,F_left,F\n")


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--model", "mm1", "--estimator", "z", "--samples", "10"],
        ["run", "--model", "nowhere", "--estimator", "z", "--samples", "10"],
        ["run", "--model", "ar-bernoulli", "--estimator", "z", "--trunc", "geom:1.5", "--samples", "10"],
        ["run", "--model", "ar-bernoulli", "--estimator", "z", "--trunc", "inf", "--samples", "10"],
        ["run", "--model", "ar-bernoulli", "--estimator", "z", "--fn", "f9", "--samples", "10"],
        ["run", "--model", "ar-bernoulli", "--estimator", "z"],
    ],
)
def test_config_errors_exit_nonzero(argv, capsys):
    assert cli.main(argv) != 0
    assert capsys.readouterr().err.startswith("error:")


def test_empty_budget_exit(capsys):
    assert cli.main(["run", "--estimator", "z", "--steps", "0.5"]) != 0


def test_finite_model(tmp_path, capsys):
    path = tmp_path / "p.csv"
    path.write_text("0.3,0.7\n0.6,0.4\n")
    assert cli.main(["run", "--model", f"finite:{path}", "--estimator", "harris-improved",
                     "--trunc", "inf", "--samples", "2000"]) == 0
    assert capsys.readouterr().out.count("\n") == 2


def test_table_one_shape():
    text = cli.table(1)
    lines = text.strip().split("\n")
    assert lines[0] == "fn,estimator,mean,half_width_90,n_samples"
    assert [l.split(",")[:2] for l in lines[1:]] == [
        [f, e] for f in ("f1", "f2", "f3") for e in ("z", "zstar")
    ]


def test_table_three_prefix():
    lines = cli.table(3, max_steps=1e6).strip().split("\n")
    assert [l.split(",")[0] for l in lines[1:]] == ["100000", "200000", "500000", "1e+06"]
    counts = [int(l.split(",")[-1]) for l in lines[1:]]
    assert counts == sorted(counts)


def test_table_command_writes_file(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["table", "3", "--max-steps", "2e5", "--out", str(out)]) == 0
    assert len(out.read_text().strip().split("\n")) == 3


def test_optimal_n_ar(capsys):
    assert cli.main(["optimal-n", "--fn", "f1", "--samples", "20000", "--horizon", "10"]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    s = np.array([float(l.split(",")[2]) for l in lines[1:]])
    # square-root law for this chain: S(k) = sqrt(3) 2^-k for k >= 1
    assert s[0] == 1.0
    assert s[1:6] == pytest.approx(np.sqrt(3) * 2.0 ** -np.arange(1, 6), rel=0.02)


def test_optimal_n_reports_non_monotone(capsys):
    code = cli.main(["optimal-n", "--model", "mm1", "--estimator", "harris-improved",
                     "--samples", "20000", "--horizon", "10"])
    assert code != 0
    assert "error" in capsys.readouterr().err


def test_ecdf_command(tmp_path, capsys):
    out = tmp_path / "cdf.csv"
    assert cli.main(["ecdf", "--samples", "5000", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["total_mass"] == pytest.approx(1.0)
    assert 0 < summary["sup_distance"] < 0.2
    assert out.exists()
