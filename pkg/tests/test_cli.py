import csv
import io
import json

import pytest

from urllc_ppp import cli
from urllc_ppp.errors import NumericalError
from urllc_ppp.fbl import CodingParams
from urllc_ppp.metrics import Method
from urllc_ppp.sirdist import NetworkParams


def run_cli(argv, capsys):
    code = cli.run(cli.parse_args(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def usage_error(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.parse_args(argv)
    assert exc.value.code == 2
    return capsys.readouterr().err


def test_parse_eval_binding():
    cfg = cli.parse_args("eval --lambda 1e-5 --distance 5 --beta 4 --n 500 --rate 1 --method integral".split())
    assert cfg.command == "eval"
    assert (cfg.lambdas, cfg.distances, cfg.betas, cfg.blocklengths, cfg.rates) == ([1e-5], [5.0], [4.0], [500], [1.0])
    assert cfg.method is Method.INTEGRAL and cfg.inv_powers == [0.0]


def test_parse_beta_must_exceed_two(capsys):
    assert "beta must exceed 2" in usage_error(["eval", "--beta", "2"], capsys)


@pytest.mark.parametrize(
    "argv",
    [["eval", "--bogus", "1"], ["solve", "--epsilon", "1.5"], ["eval", "--n", "0"], ["eval", "--rate", "1,2"],
     ["sweep", "--rate", "3:1:0.5"], ["eval", "--method", "guess"], ["ffr", "--method", "mc"],
     ["eval", "--method", "closed", "--inv-power", "0.1"], ["solve", "--lambda", "0"], ["ffr", "--eta", "3,2"]],
)  # fmt: skip
def test_parse_usage_errors(argv, capsys):
    usage_error(argv, capsys)


def test_parse_solve_reference_defaults():
    cfg = cli.parse_args(["solve", "--epsilon", "1e-4"])
    assert cfg.epsilon == 1e-4
    assert next(cfg.network_grid()) == NetworkParams(1e-5, 5.0, 4.0, 0.0)
    assert cfg.blocklengths == [500]


def test_parse_values_ranges():
    assert cli.parse_values("0.1:4:0.1") == [round(0.1 * k, 12) for k in range(1, 41)]
    assert cli.parse_values("1:8", int) == list(range(1, 9))
    assert cli.parse_values("0.5e-5,1e-5,2e-5") == [0.5e-5, 1e-5, 2e-5]
    assert cli.parse_values("1,3:5") == [1.0, 3.0, 4.0, 5.0]
    assert cli.parse_values("0:1:0.3") == [0.0, 0.3, 0.6, 0.9]
    with pytest.raises(ValueError):
        cli.parse_values("1.5", int)


def test_config_file_overridden_by_flags(tmp_path):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"lambda": 2e-5, "n": 250, "inv-power": 0.0, "epsilon": 1e-3}))
    cfg = cli.parse_args(["solve", "--config", str(conf), "--n", "1000"])
    assert cfg.lambdas == [2e-5] and cfg.blocklengths == [1000] and cfg.epsilon == 1e-3


def test_config_file_unknown_key(tmp_path, capsys):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"lamda": 2e-5}))
    assert "unknown key" in usage_error(["eval", "--config", str(conf)], capsys)


def test_eval_output(capsys):
    code, out, _ = run_cli("eval --lambda 1e-5 --distance 5 --beta 4 --n 500 --rate 1 --method integral".split(), capsys)
    assert code == 0
    (row,) = rows(out)
    assert list(row) == list(cli.COLUMNS)
    assert float(row["epsilon"]) == pytest.approx(1.2341698983e-3, rel=1e-8)
    assert row["r_epsilon"] == "" and row["seed"] == ""


def test_sweep_cartesian_size(capsys):
    code, out, _ = run_cli("sweep --lambda 0.5e-5,1e-5,2e-5 --rate 0.1:4:0.1 --method closed".split(), capsys)
    assert code == 0
    table = rows(out)
    assert len(table) == 120
    assert {r["method"] for r in table} == {"closed_form"}


@pytest.mark.parametrize("method", ["integral", "closed", "mc"])
def test_sweep_rows_round_trip(method, capsys):
    argv = ["sweep", "--lambda", "1e-5,2e-5", "--n", "200,500", "--rate", "0.5,2", "--method", method,
            "--samples", "5000", "--seed", "3"]  # fmt: skip
    code, out, _ = run_cli(argv, capsys)
    assert code == 0
    table = [cli.parse_row(r) for r in rows(out)]
    assert len(table) == 8
    for r in table:
        params = NetworkParams(r["lambda"], r["distance"], r["beta"], r["inv_power"])
        coding = CodingParams(r["n"], r["rate"])
        if r["method"] == "monte_carlo":
            argv_one = ["eval", "--method", "mc", "--lambda", repr(r["lambda"]), "--n", str(r["n"]),
                        "--rate", repr(r["rate"]), "--samples", "5000", "--seed", str(r["seed"])]  # fmt: skip
            _, again, _ = run_cli(argv_one, capsys)
            assert cli.parse_row(rows(again)[0])["epsilon"] == r["epsilon"]
        else:
            assert cli.evaluate(params, coding, r["method"]) == pytest.approx(r["epsilon"], abs=1e-12)


def test_solve_row(capsys):
    code, out, _ = run_cli(["solve", "--epsilon", "1e-4"], capsys)
    assert code == 0
    (row,) = [cli.parse_row(r) for r in rows(out)]
    assert row["rate"] == row["r_epsilon"] == 0.008095
    assert row["epsilon"] <= 1e-4 == row["epsilon_target"]
    assert row["ase"] == pytest.approx(1e-5 * 0.008095 * (1 - 1e-4), rel=1e-12)


def test_solve_infeasible_exit_code(capsys):
    code, out, _ = run_cli(["solve", "--lambda", "1e-2", "--epsilon", "1e-6"], capsys)
    assert code == 3
    assert rows(out)[0]["notes"].startswith("infeasible")


def test_numerical_failure_exit_code(monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise NumericalError("no convergence", estimate=0.1, error_bound=1.0)

    monkeypatch.setattr(cli, "error_probability_integral", boom)
    code, _, err = run_cli(["eval"], capsys)
    assert code == 4 and "numerical failure" in err


def test_io_failure_exit_code(tmp_path, capsys):
    code, _, err = run_cli(["eval", "-o", str(tmp_path / "missing" / "out.csv")], capsys)
    assert code == 5 and "cannot write" in err


def test_ffr_rows_and_optimum(capsys):
    code, out, _ = run_cli("ffr --eta 1:8 --epsilon 1e-4 --method closed".split(), capsys)
    assert code == 0
    table = [cli.parse_row(r) for r in rows(out)]
    assert len(table) == 9
    assert [r["eta"] for r in table[:8]] == list(range(1, 9))
    assert table[-1]["notes"] == "optimum"
    best = max(table[:8], key=lambda r: r["ase"])
    assert table[-1]["eta"] == best["eta"]


def test_ffr_reports_skipped(capsys):
    code, out, err = run_cli("ffr --n 50 --eta 1:6 --epsilon 1e-2 --method closed".split(), capsys)
    assert code == 0
    assert "skipped eta=6" in err
    assert len(rows(out)) == 6


def test_jsonl_output(capsys):
    code, out, _ = run_cli(["eval", "--format", "jsonl"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert list(rec) == list(cli.COLUMNS)
    assert rec["method"] == "integral" and rec["r_epsilon"] is None and rec["n"] == 500


def test_output_byte_identical(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        cfg = cli.parse_args(["sweep", "--method", "mc", "--samples", "20000", "--seed", "8", "--rate", "0.5,1", "-o", str(p)])
        assert cli.run(cfg) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_validate_report(tmp_path, capsys):
    out = tmp_path / "v.csv"
    argv = ["validate", "--lambda", "1e-5", "--rate", "0.5:2:0.5", "--samples", "20000", "--seed", "42", "-o", str(out)]
    code, _, err = run_cli(argv, capsys)
    assert code == 0 and "PASS" in err
    table = [cli.parse_row(r) for r in rows(out.read_text())]
    methods = [r["method"] for r in table]
    assert methods.count("integral") == 4 and methods.count("closed_form") == 4
    summary = table[-1]
    assert summary["notes"].startswith("summary;") and "pass=yes" in summary["notes"]
    assert summary["ks"] <= 0.01 + 1.36 / 141  # 2e4 samples


def test_validate_with_noise_skips_closed_form(tmp_path, capsys):
    out = tmp_path / "v.csv"
    argv = ["validate", "--lambda", "1e-5", "--inv-power", "1e-3", "--rate", "1", "--mc-rates", "1", "--samples", "2000",
            "-o", str(out)]  # fmt: skip
    code, _, _ = run_cli(argv, capsys)
    assert code == 0
    table = [cli.parse_row(r) for r in rows(out.read_text())]
    assert "closed_form" not in [r["method"] for r in table]
    assert "closed_form=n/a" in table[-1]["notes"]


def test_workers_env(monkeypatch, tmp_path):
    outs = []
    for workers in ("1", "8"):
        monkeypatch.setenv("URLLC_PPP_WORKERS", workers)
        p = tmp_path / f"w{workers}.csv"
        assert cli.run(cli.parse_args(["eval", "--method", "mc", "--samples", "30000", "--chunk-size", "4000",
                                       "-o", str(p)])) == 0  # fmt: skip
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_config_file_unreadable_is_io_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.parse_args(["eval", "--config", str(tmp_path / "absent.json")])
    assert exc.value.code == 5
    assert "cannot read" in capsys.readouterr().err


def test_config_file_malformed_is_usage_error(tmp_path, capsys):
    conf = tmp_path / "bad.json"
    conf.write_text("{lambda: 1")
    assert "not valid JSON" in usage_error(["eval", "--config", str(conf)], capsys)
