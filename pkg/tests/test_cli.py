import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from qclob import Frame
from qclob.analytics import activity_summary, relative_distribution
from qclob.cli import EXIT_EMPTY, EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from qclob.ingest import TICK_HEADER, load_session
from qclob.models import ECDF, collapse_ratio

SPEC = {"max_limit_orders": 1200, "seed": 3}


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def family(tmp_path_factory):
    root = tmp_path_factory.mktemp("family")
    spec = root / "spec.json"
    spec.write_text(json.dumps(SPEC))
    assert main(["generate", "--spec", str(spec), "--days", "3", "--out", str(root / "gen")]) == EXIT_OK
    return root / "gen"


def _days(family):
    return [str(family / f"day_{d:02d}") for d in range(3)]


def test_generate_writes_sessions_and_is_byte_stable(family, tmp_path):
    assert sorted(p.name for p in family.iterdir()) == ["day_00", "day_01", "day_02", "spec.json"]
    assert {p.name for p in (family / "day_00").iterdir()} == {"ticks.csv", "trades.csv", "truth.json", "session.cfg"}
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SPEC))
    main(["generate", "--spec", str(spec), "--days", "3", "--out", str(tmp_path / "again")])
    assert _files(tmp_path / "again") == _files(family)


def test_generate_single_day_defaults(tmp_path):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"max_limit_orders": 50}))
    assert main(["generate", "--spec", str(spec), "--out", str(tmp_path / "o"), "--mode", "qclob"]) == EXIT_OK
    assert [p.name for p in (tmp_path / "o").iterdir() if p.is_dir()] == ["day_00"]
    assert json.loads((tmp_path / "o" / "spec.json").read_text())["mode"] == "qclob"


def test_invalid_spec_names_the_field(tmp_path, capsys):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"cancel_rate": -1}))
    assert main(["generate", "--spec", str(spec), "--out", str(tmp_path)]) == EXIT_INPUT
    assert "cancel_rate" in capsys.readouterr().err


def test_replay_outputs_and_determinism(family, tmp_path):
    assert main(["replay", *_days(family), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["replay", *_days(family), "--out", str(tmp_path / "b")]) == EXIT_OK
    a = _files(tmp_path / "a")
    assert a == _files(tmp_path / "b")
    for name in ("summary.json", "activity.csv", "activity.json", "spread.json",
                 "size_ecdf_limits.csv", "size_ecdf_cancels.json", "size_ecdf_market.csv"):
        assert f"day_00/{name}" in a
    act = json.loads(a["day_01/activity.json"])
    lib = activity_summary(load_session(family / "day_01")).as_dict()
    assert act["limits"] == lib["limits"] and act["market"]["count"] == lib["market"]["count"]


def test_malformed_line_17(family, tmp_path, capsys):
    d = tmp_path / "bad"
    shutil.copytree(family / "day_00", d)
    lines = (d / "ticks.csv").read_text().splitlines(keepends=True)
    lines[16] = "garbage,line\n"
    (d / "ticks.csv").write_text("".join(lines))
    code = main(["replay", str(d), "--out", str(tmp_path / "o")])
    assert code == EXIT_INPUT and code != 0
    assert "line 17" in capsys.readouterr().err


def test_empty_session_exit_code(tmp_path):
    d = tmp_path / "empty"
    d.mkdir()
    (d / "ticks.csv").write_text(",".join(TICK_HEADER) + "\n")
    (d / "trades.csv").write_text("time_ms,direction,price_ticks,size_lots\n")
    assert main(["replay", str(d), "--out", str(tmp_path / "o")]) == EXIT_EMPTY
    assert json.loads((tmp_path / "o" / "empty" / "activity.json").read_text())["empty"] is True


def test_usage_errors(tmp_path, family):
    assert main(["replay", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["replay", "--ticks", "x.csv", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["collapse", _days(family)[0], "--out", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["stats", "--frame", "sideways"])
    assert exc.value.code == EXIT_USAGE
    assert main(["replay", str(tmp_path / "missing"), "--out", str(tmp_path)]) == EXIT_USAGE


def test_stats_both_frames_match_library(family, tmp_path):
    assert main(["stats", _days(family)[0], "--out", str(tmp_path)]) == EXIT_OK
    out = tmp_path / "day_00"
    s = load_session(family / "day_00")
    for frame in ("quote", "trade"):
        for flow in ("limits", "cancels", "depth"):
            doc = json.loads((out / f"dist_{frame}_{flow}.json").read_text())
            rd = relative_distribution(s, Frame(frame), flow)
            assert [r["tick"] for r in doc["rows"]] == rd.ticks.tolist()
            assert np.allclose([r["mass"] for r in doc["rows"]], rd.mass)
            assert (out / f"spectrum_{frame}_{flow}.csv").exists()
        assert (out / f"cancel_ratio_{frame}.json").exists()
    assert (out / "hx_ecdf.json").exists() and (out / "size_vs_queue_deciles.csv").exists()


def test_stats_single_frame_and_no_trade_session(tmp_path):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"max_limit_orders": 200, "market_rate": 0}))
    main(["generate", "--spec", str(spec), "--out", str(tmp_path / "g")])
    assert main(["stats", str(tmp_path / "g" / "day_00"), "--frame", "trade", "--flow", "limits",
                 "--out", str(tmp_path / "o")]) == EXIT_OK
    out = tmp_path / "o" / "day_00"
    doc = json.loads((out / "dist_trade_limits.json").read_text())
    assert doc["empty"] is True and doc["rows"] == []
    assert not (out / "dist_quote_limits.json").exists()
    assert json.loads((out / "hx_ecdf.json").read_text())["empty"] is True


def test_fit_report_and_error_entry(family, tmp_path):
    args = ["fit", _days(family)[0], "--frame", "quote", "--flow", "limits", "--out"]
    assert main(args + [str(tmp_path / "a")]) == EXIT_OK
    assert main(args + [str(tmp_path / "b")]) == EXIT_OK
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    rep = json.loads((tmp_path / "a" / "fit_report.json").read_text())["fits"]
    assert len(rep) == 1 and "error" not in rep[0]
    p = rep[0]["params"]
    assert p["sigma"] > 0 and p["nu"] > 2
    qq = json.loads((tmp_path / "a" / "day_00" / "qq_quote_limits.json").read_text())
    assert len(qq["rows"]) == 99

    small = tmp_path / "small.json"
    small.write_text(json.dumps({"max_limit_orders": 40}))
    main(["generate", "--spec", str(small), "--out", str(tmp_path / "g")])
    assert main(["fit", str(tmp_path / "g" / "day_00"), "--frame", "quote", "--flow", "limits",
                 "--out", str(tmp_path / "c")]) == EXIT_OK
    rep = json.loads((tmp_path / "c" / "fit_report.json").read_text())["fits"]
    assert "at least 100" in rep[0]["error"]


def test_collapse_reports_and_library_consistency(family, tmp_path):
    code = main(["collapse", *_days(family), "--frame", "trade", "--flow", "limits",
                 "--distance", "cvm", "--distance", "ks", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert {p.name for p in tmp_path.iterdir()} == {
        "collapse_cvm.json", "collapse_cvm.csv", "collapse_ks.json", "collapse_ks.csv"}
    days = {}
    for d in _days(family):
        s = load_session(d)
        rd = relative_distribution(s, Frame.TRADE, "limits")
        days[s.label] = ECDF.from_histogram(rd.ticks, rd.mass, n=rd.n)
    for kind in ("cvm", "ks"):
        doc = json.loads((tmp_path / f"collapse_{kind}.json").read_text())
        got = doc["table"]["trade"]["limits"]
        assert got == pytest.approx(collapse_ratio(days, kind).mean_ratio, rel=1e-12)
        # days drawn from one law: raw and rescaled distances are of the same order
        assert 0.2 < got < 5


def test_collapse_lists_degenerate_pairs(family, tmp_path):
    a = tmp_path / "a"
    shutil.copytree(family / "day_00", a)
    shutil.copytree(family / "day_00", tmp_path / "b")
    assert main(["collapse", str(a), str(tmp_path / "b"), _days(family)[1], "--frame", "quote",
                 "--flow", "limits", "--out", str(tmp_path / "o")]) == EXIT_OK
    cell = json.loads((tmp_path / "o" / "collapse_cvm.json").read_text())["cells"][0]
    assert {(e["d1"], e["d2"]) for e in cell["excluded"]} == {("a", "b"), ("b", "a")}
    assert cell["n_pairs"] == 4


def test_console_script_runs(tmp_path):
    exe = shutil.which("qclob")
    cmd = [exe] if exe else [sys.executable, "-m", "qclob.cli"]
    res = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "collapse" in res.stdout
