import json
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htsolve import cli, io as tio, plots
from htsolve import experiments as ex
from htsolve import htucker as ht
from htsolve.config import ConfigError, RunConfig, dump_config, parse_config
from htsolve.solver import TRACE_COLUMNS


# ---------------------------------------------------------------- config

def test_config_roundtrip():
    cfg = RunConfig(d=5, operator="tridiagonal", max_level=4, eps=0.03, beta1=0.25)
    assert parse_config(dump_config(cfg)) == cfg


def test_config_without_section_and_comments():
    cfg = parse_config("d = 3   # three modes\noperator = laplacian\nmax_level =\n")
    assert cfg.d == 3 and cfg.max_level is None


@pytest.mark.parametrize("text", ["d = 1", "operator = helmholtz", "delta = 1.5",
                                  "beta2 = 0", "bogus = 3", "d = three", "deterministic = maybe"])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


# ---------------------------------------------------------------- trace io

row_strategy = st.tuples(
    st.integers(0, 50), st.integers(0, 20),
    *[st.floats(1e-300, 1e300, allow_nan=False)] * 3,
    st.integers(0, 500), st.integers(0, 500), st.integers(0, 10 ** 6), st.integers(0, 10 ** 15))


@settings(max_examples=30, deadline=None)
@given(st.lists(row_strategy, max_size=12))
def test_trace_csv_roundtrip(tmp_path_factory, rows):
    path = os.path.join(tmp_path_factory.mktemp("csv"), "t.csv")
    tio.write_rows_csv(path, rows)
    back = tio.read_trace_csv(path)
    assert [tuple(r[c] for c in TRACE_COLUMNS) for r in back] == [tuple(r) for r in rows]


def test_trace_csv_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    tio.write_rows_csv(str(path), [(0, 0, 1.0, 1.0, 1.0, 1, 1, 1, 1)])
    text = path.read_text().splitlines()
    text.append("1,0,0.5,oops,0.5,1,1,1,2")
    path.write_text("\n".join(text) + "\n")
    with pytest.raises(tio.TraceFormatError, match=":4:"):
        tio.read_trace_csv(str(path))
    path.write_text("k,j\n")
    with pytest.raises(tio.TraceFormatError, match=":1:"):
        tio.read_trace_csv(str(path))


# ---------------------------------------------------------------- plots

def test_empty_plot_is_valid_svg():
    svg = plots.line_plot([{"x": [], "y": [], "label": "none"}], logx=True)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "<polyline" not in svg and "<circle" not in svg


def test_single_point_one_marker():
    svg = plots.line_plot([{"x": [1.0], "y": [1e-3], "label": "p"}])
    assert svg.count("<circle") == 1 and "<polyline" not in svg


def test_plots_deterministic_and_log_axes():
    rows = [{"k": 0, "j": j, "eta": 1.0, "residual": 10.0 ** -j, "bound": 2 * 10.0 ** -j,
             "max_rank_iterate": j + 1, "max_rank_intermediate": j + 2, "supp_total": 3,
             "ops_cum": 100 * (j + 1)} for j in range(5)]
    a = plots.residual_figure([("d=2", rows)])
    assert a == plots.residual_figure([("d=2", rows)])
    assert "1e-4" in a and "1e0" in a
    assert "1e2" in plots.ops_figure([("d=2", rows)])
    assert plots.rank_figure([("d=2", rows)]).count("<polyline") == 2


def test_nonpositive_values_skipped_on_log_axis():
    svg = plots.line_plot([{"x": [1, 2, 3], "y": [0.0, 1e-2, 1e-1], "label": "z"}])
    assert svg.count("<circle") == 2


# ---------------------------------------------------------------- shape helpers

def test_ops_at_reduction_and_slope():
    rows = [{"bound": b, "ops_cum": o} for b, o in [(1.0, 10), (0.3, 50), (0.09, 90)]]
    assert ex.ops_at_reduction(rows, 10) == 90
    assert ex.ops_at_reduction(rows, 100) is None
    assert ex.loglog_slope([2, 4, 8], [3, 12, 48]) == pytest.approx(2.0)


def test_rank_at_error():
    rows = [{"bound": 1e-1, "max_rank_iterate": 1}, {"bound": 1e-2, "max_rank_iterate": 3},
            {"bound": 1e-3, "max_rank_iterate": 5}]
    assert ex.rank_at_error(rows, 1e-2) == 3


# ---------------------------------------------------------------- cli

def test_cli_certify_expsum(capsys):
    assert cli.main(["certify-expsum", "--delta", "0.1", "--T", "1e6", "--grid", "200"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["ok"] and rep["max_rel_err"] <= 0.1


def test_cli_certify_failure_exit_code(capsys):
    # two terms cannot cover [1, 1e8]
    code = cli.main(["certify-expsum", "--delta", "0.1", "--T", "1e8", "--n", "2"])
    assert code == cli.EXIT_CERT
    assert not json.loads(capsys.readouterr().out)["ok"]


def test_cli_poisson_small(tmp_path, capsys):
    out = tmp_path / "p"
    code = cli.main(["poisson", "--dims", "2", "--eps", "0.3", "--relative", "--out", str(out)])
    assert code == 0
    rows = tio.read_trace_csv(str(out / "trace_laplacian_d2.csv"))
    assert rows and all(r["bound"] > 0 for r in rows)
    summary = tio.read_summary_json(str(out / "summary_laplacian_d2.json"))
    assert summary["status"] == "ok"
    for name in ("residuals", "ranks", "ops"):
        assert (out / f"{name}.svg").read_text().startswith("<svg")


def test_cli_solve_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"d = 2\neps = 0.3\neps_relative = true\nout = {tmp_path / 'o'}\n")
    assert cli.main(["solve", "--config", str(cfg)]) == 0
    assert (tmp_path / "o" / "trace_laplacian_d2.csv").exists()


def test_cli_resource_exit_code(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"d = 2\neps = 1e-3\neps_relative = true\nrank_cap = 1\nout = {tmp_path / 'o'}\n")
    assert cli.main(["solve", "--config", str(cfg)]) == 3


def test_cli_apply_bench(tmp_path, capsys):
    rng = np.random.default_rng(0)
    v = ht.random_tensor(rng, 2, 2, [np.arange(1, 6), np.arange(2, 8)])
    path = str(tmp_path / "v.npz")
    ht.save(v, path)
    assert cli.main(["apply-bench", "--tensor", path, "--eta", "1e-3"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["rank_audit_ok"] and rep["J"] >= 0


def test_cli_bad_config_path():
    assert cli.main(["solve", "--config", "/nonexistent/cfg"]) == cli.EXIT_USAGE
