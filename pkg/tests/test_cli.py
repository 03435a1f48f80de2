"""Command line behaviour: exit codes, formats, overrides, determinism.

Everything drives ``main(argv)`` in-process; stdout/stderr go through
capsys so the emitted tables can be parsed back.
"""

import json
import subprocess
import sys

import pytest

from d2dcache import tdma
from d2dcache.caching import optimal_caching, zipf
from d2dcache.cli import main
from d2dcache.config import urban_defaults, with_updates
from d2dcache.sweeps import make_sweep, run_sweep


def _csv_rows(text):
    lines = text.strip().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, line.split(","))) for line in lines[1:]]


def test_analytic_defaults(capsys):
    assert main(["analytic"]) == 0
    rows = _csv_rows(capsys.readouterr().out)
    assert [r["scheme"] for r in rows] == ["full-reuse", "tdma"]
    fr, td = rows
    # defaults run at the power cap
    assert float(fr["tx_power_w"]) == 0.2
    assert float(fr["p_offload"]) == pytest.approx(0.1076117696806004,
                                                   rel=1e-9)
    assert float(td["p_offload"]) == pytest.approx(0.6928222099563914,
                                                   rel=1e-9)
    assert float(fr["p_o"]) == pytest.approx(0.7134769819059252, rel=1e-9)


def test_analytic_json_one_scheme(capsys):
    assert main(["analytic", "--scheme", "full-reuse",
                 "--tx-power", "0.001", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    row = dict(zip(doc["columns"], doc["rows"][0]))
    assert row["scheme"] == "full-reuse"
    assert row["p_offload"] == pytest.approx(0.20102610681174118, rel=1e-9)


def test_solve_caching_head(capsys):
    assert main(["solve-caching", "--head", "5"]) == 0
    captured = capsys.readouterr()
    rows = _csv_rows(captured.out)
    assert len(rows) == 5
    assert [r["file_index"] for r in rows] == ["1", "2", "3", "4", "5"]
    # placement follows popularity rank
    assert float(rows[0]["p_cache"]) > float(rows[-1]["p_cache"]) > 0.0
    assert "policy=optimal cutoff=317" in captured.err


def test_mc_subcommand(capsys):
    assert main(["mc", "--drops", "4", "--scheme", "tdma",
                 "--tx-power", "0.05"]) == 0
    captured = capsys.readouterr()
    rows = {r["metric"]: r for r in _csv_rows(captured.out)}
    assert {"p_o", "p_offload", "p_ratio", "energy_cost"} <= set(rows)
    assert 0.0 <= float(rows["p_offload"]["mean"]) <= 1.0
    assert "4 drops, backend=" in captured.err


def test_optimize_power_subcommand(capsys):
    assert main(["optimize-power"]) == 0
    rows = {r["scheme"]: r for r in _csv_rows(capsys.readouterr().out)}
    assert rows["full-reuse"]["method"] == "search"
    # at defaults the one-at-a-time schedule rides the power cap
    assert float(rows["tdma"]["p_star_w"]) == 0.2
    assert rows["tdma"]["clamped"] == "1"


def test_sweep_cli_matches_library(capsys):
    argv = ["sweep", "--variable", "P_t", "--grid", "0.001,0.05",
            "--scheme", "full-reuse", "--outputs", "p_offload"]
    assert main(argv) == 0
    out1 = capsys.readouterr().out
    assert main(argv) == 0
    out2 = capsys.readouterr().out
    assert out1 == out2  # identical invocations are byte stable

    spec = make_sweep("P_t", (0.001, 0.05), scheme="full-reuse",
                      outputs=("p_offload",))
    assert out1 == run_sweep(urban_defaults(), spec).to_csv()


def test_sweep_cli_range_grid(capsys):
    assert main(["sweep", "--variable", "rho", "--grid", "0.01:1:5:log",
                 "--scheme", "tdma", "--outputs", "p_ratio"]) == 0
    rows = _csv_rows(capsys.readouterr().out)
    assert len(rows) == 5
    assert float(rows[0]["battery_fraction"]) == pytest.approx(0.01)
    assert float(rows[-1]["battery_fraction"]) == pytest.approx(1.0)


def test_figure_subcommand(capsys):
    assert main(["figure", "fig2a"]) == 0
    captured = capsys.readouterr()
    assert len(_csv_rows(captured.out)) == 15
    assert captured.err.startswith("fig2a:")


def test_out_flag_writes_file(tmp_path, capsys):
    target = tmp_path / "table.csv"
    assert main(["analytic", "--out", str(target)]) == 0
    assert capsys.readouterr().out == ""
    text = target.read_text(encoding="utf-8")
    assert text.startswith("scheme,tx_power_w,")
    assert len(text.splitlines()) == 3


def test_out_flag_io_error(capsys):
    rc = main(["analytic", "--out", "/nonexistent-dir/x.csv"])
    assert rc == 2
    assert "i/o error" in capsys.readouterr().err


def test_set_override_natural_units(capsys):
    cfg = with_updates(urban_defaults(), collab_distance=50.0)
    pop = zipf(cfg.catalog_size, cfg.zipf_exponent)
    cache = optimal_caching(cfg.user_density, 50.0, pop)
    want = tdma.tdma_metrics(cfg, pop, cache, 0.05).p_offload

    assert main(["analytic", "--scheme", "tdma", "--tx-power", "0.05",
                 "--set", "collab_distance_m=50"]) == 0
    row = _csv_rows(capsys.readouterr().out)[0]
    assert float(row["p_offload"]) == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("assignment", [
    "bogus_key=1",            # unknown key
    "collab_distance_m",      # missing '='
    "collab_distance_m=abc",  # unparsable value
    "collab_distance_m=-5",   # fails validation
])
def test_bad_set_exits_2(assignment, capsys):
    assert main(["analytic", "--set", assignment]) == 2
    assert "error:" in capsys.readouterr().err


def test_config_file_equivalent_to_set(tmp_path, capsys):
    # a config file describes the whole scenario; --set patches defaults
    from d2dcache.config import DEFAULTS
    raw = dict(DEFAULTS, collab_distance_m=50)
    path = tmp_path / "scenario.cfg"
    path.write_text("# tighter cluster\n" +
                    "".join(f"{k} = {v}\n" for k, v in raw.items()),
                    encoding="utf-8")
    assert main(["analytic", "--config", str(path)]) == 0
    from_file = capsys.readouterr().out
    assert main(["analytic", "--set", "collab_distance_m=50"]) == 0
    assert from_file == capsys.readouterr().out

    sparse = tmp_path / "sparse.cfg"
    sparse.write_text("collab_distance_m = 50\n", encoding="utf-8")
    assert main(["analytic", "--config", str(sparse)]) == 2
    dup = tmp_path / "dup.cfg"
    dup.write_text("".join(f"{k} = {v}\n" for k, v in raw.items()) +
                   "collab_distance_m = 60\n", encoding="utf-8")
    assert main(["analytic", "--config", str(dup)]) == 2
    assert main(["analytic", "--config", str(tmp_path / "missing.cfg")]) == 2
    capsys.readouterr()


def test_usage_errors_exit_2(capsys):
    assert main(["sweep", "--variable", "bogus", "--grid", "1"]) == 2
    assert main(["sweep", "--variable", "P_t", "--grid", "0:1:3:lin"]) == 2
    assert main(["compare", "--grid", "0.001:0.2:5:log"]) == 2
    assert main(["mc", "--drops", "1"]) == 2
    capsys.readouterr()


def test_argparse_rejections():
    with pytest.raises(SystemExit) as exc:
        main(["analytic", "--scheme", "bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["figure", "fig99"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_compare_cli_pass(capsys):
    assert main(["compare", "--scheme", "tdma", "--grid", "0.05",
                 "--drops", "60"]) == 0
    captured = capsys.readouterr()
    assert "5 checks, 0 failures" in captured.err
    rows = _csv_rows(captured.out)
    assert [r["passed"] for r in rows] == ["pass"] * 5


def test_compare_cli_tolerance_failure(capsys):
    rc = main(["compare", "--scheme", "tdma", "--grid", "0.05",
               "--drops", "30", "--abs-tol", "1e-12", "--rel-tol", "1e-12",
               "--hw-factor", "0"])
    assert rc == 1
    captured = capsys.readouterr()
    assert "5 checks, 5 failures" in captured.err
    assert "FAIL" in captured.out


def test_compare_cli_empty_grid(capsys):
    assert main(["compare", "--grid", ","]) == 2
    assert "nothing compared" in capsys.readouterr().err


def test_module_entry_point():
    # the package is runnable as a script and exits through main()
    proc = subprocess.run(
        [sys.executable, "-m", "d2dcache.cli", "solve-caching", "--head", "1"],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.startswith("file_index,p_request,p_cache")
