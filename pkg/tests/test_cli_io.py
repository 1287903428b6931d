import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdcascade import cli
from qdcascade.config import ConfigError, build_config, parse_config, preset_fields
from qdcascade.io import (
    FormatError,
    canonical_json,
    read_histogram,
    read_timetags,
    read_timetags_binary,
    write_histogram,
    write_timetags,
    write_timetags_binary,
)
from qdcascade.reproduce import Report, StepError, reproduce_paper
from qdcascade.streams import CoincidenceHistogram, TimeTagStream


def _stream(n, seed=0, meta=None):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.integers(0, 10**12, n))
    return TimeTagStream(t, rng.integers(0, 2, n).astype(np.int16), 0, 10**12, meta or {})


# -- configuration ---------------------------------------------------------------


def test_reference_preset():
    cfg = parse_config("preset = paper-default\nexperiment = hbt\n")
    src = cfg.experiment_config.source
    assert (src.t1_xx, src.t1_x, src.rep_period) == (220.0, 400.0, 13158.0)
    assert all(d.dark_rate == 250.0 for d in cfg.experiment_config.detectors)
    assert cfg.preset == "paper-default"


def test_overrides_and_comments():
    cfg = parse_config("# run\nexperiment = tpi  # two-photon\nt1_x = 410\ndark_rate_1 = 10\nseed = 7\nparallel = no\n")
    assert cfg.experiment_config.source.t1_x == 410
    assert [d.dark_rate for d in cfg.experiment_config.detectors] == [0.0, 10.0]
    assert cfg.seed == 7 and cfg.parallel is False


def test_empty_experiment_names_field():
    with pytest.raises(ConfigError, match="experiment") as e:
        parse_config("t1_x = 400\nexperiment =\n")
    assert e.value.key == "experiment"


def test_missing_experiment():
    with pytest.raises(ConfigError, match="experiment"):
        parse_config("t1_x = 400\n")


def test_t2_limit_rejected_with_line():
    with pytest.raises(ConfigError, match="2") as e:
        parse_config("experiment = hbt\nt2_x = 900\n")
    assert e.value.line == 2 and e.value.key == "t2_x"


@pytest.mark.parametrize(
    "text,line,key",
    [
        ("experiment = hbt\nbogus = 1\n", 2, "bogus"),
        ("experiment = hbt\nefficiency = 1.5\n", 2, "efficiency"),
        ("experiment = hbt\nseed = x\n", 2, "seed"),
        ("experiment = hbt\nt1_x = 400\nt1_x = 410\n", 3, "t1_x"),
        ("experiment = hbt\nt1_x = nan\n", 2, "t1_x"),
        ("experiment = hbt\nchannel = Y\n", 2, "channel"),
        ("experiment = hbt\nperiods = 0\n", 2, "periods"),
        ("experiment = hbt\npreset = desk\n", 2, "preset"),
    ],
)
def test_config_errors_carry_location(text, line, key):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert (e.value.line, e.value.key) == (line, key)
    assert f"line {line}" in str(e.value)


def test_unknown_preset():
    with pytest.raises(ConfigError, match="preset"):
        parse_config("experiment = hbt\n", preset="nope")


def test_preset_fields_reparse():
    fields = preset_fields("desk")
    text = "experiment = hbt\n" + "".join(f"{k} = {v}\n" for k, v in fields.items())
    assert parse_config(text).experiment_config == parse_config("experiment = hbt\n", preset="desk").experiment_config


def test_digest_stable():
    a = build_config({"experiment": "hbt", "seed": 1})
    assert a.digest() == build_config({"experiment": "hbt", "seed": 1}).digest()
    assert a.digest() != build_config({"experiment": "hbt", "seed": 2}).digest()


# -- time tags -----------------------------------------------------------------


def test_timetag_roundtrip_million_byte_identical(tmp_path):
    s = _stream(10**6, meta={"seed": 3, "rate": 1.5, "channel": "XX"})
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_timetags(s, p1)
    r = read_timetags(p1)
    np.testing.assert_array_equal(r.timestamps, s.timestamps)
    np.testing.assert_array_equal(r.detector_ids, s.detector_ids)
    assert r.meta == s.meta and (r.t_start, r.t_end) == (s.t_start, s.t_end)
    write_timetags(r, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_timetag_header_format(tmp_path):
    p = tmp_path / "t.csv"
    write_timetags(_stream(3, meta={"seed": 1}), p)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# format=")
    assert "detector_id,timestamp_ps" in lines
    assert any(l.startswith("# ") and "seed" in l for l in lines)


def test_timetag_empty(tmp_path):
    p = tmp_path / "e.csv"
    write_timetags(TimeTagStream(np.empty(0, np.int64), np.empty(0, np.int16), 0, 100), p)
    assert p.read_text().splitlines()[-1] == "detector_id,timestamp_ps"
    assert len(read_timetags(p)) == 0


def test_timetag_corrupted_row(tmp_path):
    p = tmp_path / "c.csv"
    write_timetags(_stream(10), p)
    lines = p.read_text().splitlines()
    n = len(lines) - 4
    lines[n] = "0,12x"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError) as e:
        read_timetags(p)
    assert e.value.line == n + 1
    assert f"line {n + 1}" in str(e.value)


def test_timetag_unsorted(tmp_path):
    p = tmp_path / "u.csv"
    write_timetags(_stream(10), p)
    lines = p.read_text().splitlines()
    lines[-1], lines[-2] = lines[-2], lines[-1]
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="sort"):
        read_timetags(p)
    assert read_timetags(p, sort=True).is_sorted()


def test_timetag_wrong_format_tag(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("# format=something/9\ndetector_id,timestamp_ps\n")
    with pytest.raises(FormatError, match="format"):
        read_timetags(p)


def test_binary_roundtrip_matches_text(tmp_path):
    s = _stream(10**5, 1, {"seed": 9})
    write_timetags_binary(s, tmp_path / "a.bin")
    r = read_timetags_binary(tmp_path / "a.bin")
    np.testing.assert_array_equal(r.timestamps, s.timestamps)
    write_timetags(r, tmp_path / "a.csv")
    write_timetags(s, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    write_timetags_binary(r, tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_binary_errors(tmp_path):
    p = tmp_path / "t.bin"
    write_timetags_binary(_stream(10), p)
    data = p.read_bytes()
    p.write_bytes(data[:-3])
    with pytest.raises(FormatError, match="truncated"):
        read_timetags_binary(p)
    p.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        read_timetags_binary(p)


@settings(max_examples=30)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(-2**62, 2**62)), max_size=50))
def test_timetag_roundtrip_property(tmp_path_factory, rows):
    rows = sorted(rows, key=lambda r: r[1])
    ids = np.array([r[0] for r in rows], dtype=np.int16)
    ts = np.array([r[1] for r in rows], dtype=np.int64)
    s = TimeTagStream(ts, ids, -2**62, 2**62)
    p = tmp_path_factory.mktemp("rt") / "s.csv"
    write_timetags(s, p)
    r = read_timetags(p)
    np.testing.assert_array_equal(r.timestamps, ts)
    np.testing.assert_array_equal(r.detector_ids, ids)


# -- histograms ----------------------------------------------------------------


def _histogram(n=101):
    rng = np.random.default_rng(2)
    return CoincidenceHistogram(129, -(n // 2 + 0.5) * 129, rng.poisson(30, n), 13.158, (1.2e5, 1.3e5), 13158, {"channel": "X"})


def test_histogram_roundtrip(tmp_path):
    h = _histogram()
    write_histogram(h, tmp_path / "h.csv")
    r = read_histogram(tmp_path / "h.csv")
    np.testing.assert_array_equal(r.counts, h.counts)
    assert (r.bin_width, r.origin, r.integration_time, r.singles_rates, r.period, r.meta) == (
        h.bin_width, h.origin, h.integration_time, h.singles_rates, h.period, h.meta)
    write_histogram(r, tmp_path / "g.csv")
    assert (tmp_path / "h.csv").read_bytes() == (tmp_path / "g.csv").read_bytes()


def test_histogram_empty(tmp_path):
    h = CoincidenceHistogram(10, 0.0, np.zeros(0, dtype=np.int64), 0.0, (0.0, 0.0), 0.0)
    write_histogram(h, tmp_path / "h.csv")
    assert len(read_histogram(tmp_path / "h.csv")) == 0


@pytest.mark.parametrize("bad", ["12,abc", "-5,3", "0,-1", "1,2,3"])
def test_histogram_corruption(tmp_path, bad):
    p = tmp_path / "h.csv"
    write_histogram(_histogram(5), p)
    lines = p.read_text().splitlines()
    lines[-2] = bad
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError) as e:
        read_histogram(p)
    assert e.value.line == len(lines) - 1


# -- reports -------------------------------------------------------------------


def test_canonical_json_stable():
    obj = {"b": 1.0 / 3.0, "a": [np.float64(2.5), np.int64(3)], "c": {"z": None, "y": True}}
    text = canonical_json(obj)
    assert text == canonical_json(json.loads(text))
    assert text.index('"a"') < text.index('"b"')


def test_report_reserialization():
    r = Report()
    r.add("g2_x", 0.0221234567891234, 0.0012, "", "hbt")
    r.tables["t"] = {"rows": [[1, 2.5]]}
    r.provenance = {"seed": 1}
    again = Report.from_dict(json.loads(r.to_json()))
    assert again.to_json() == r.to_json()
    assert again == r
    assert r.value("g2_x") == pytest.approx(0.0221234567891234)
    assert r.error("g2_x") == 0.0012


@pytest.fixture(scope="module")
def small_reports():
    return [reproduce_paper(11, None, w, scale=0.02) for w in (1, 1, 8)]


def test_reproduce_deterministic(small_reports):
    a, b, _ = small_reports
    assert a.to_json() == b.to_json()


def test_reproduce_worker_invariant(small_reports):
    a, _, c = small_reports
    assert a.to_json() == c.to_json()


def test_reproduce_contents(small_reports, tmp_path):
    r = small_reports[0]
    for name in ("hbt.X.g2_raw", "hbt.XX.g2_corrected", "tomo.fidelity", "tpi.XX.side_peak.full",
                 "lifetime.T1_XX", "coherence.X.TPE.T2", "tbp.value", "rabi.preparation_bound"):
        assert name in r.scalars, name
    assert {row["id"] for row in r.acceptance} >= {"1X", "1XX"} | {str(i) for i in range(2, 12)}
    assert all(set(s) >= {"value", "error", "unit", "method"} for s in r.scalars.values())


def test_reproduce_writes_outputs(tmp_path):
    reproduce_paper(5, tmp_path, 1, scale=0.02)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"report.json", "summary.txt", "fig2_hbt_X.csv", "fig3_rabi.csv", "suppfig3_coherence.csv"} <= names
    report = Report.from_dict(json.loads((tmp_path / "report.json").read_text()))
    assert report.provenance["seed"] == 5


def test_reproduce_step_error(monkeypatch):
    import qdcascade.reproduce as rp

    def boom(*a):
        raise RuntimeError("broken")

    steps = [(n, boom if n == "tpi" else f) for n, f in rp.STEPS]
    monkeypatch.setattr(rp, "STEPS", steps)
    with pytest.raises(StepError) as e:
        rp.reproduce_paper(0, None, 1, 0.02)
    assert e.value.step == "tpi"


# -- command line ----------------------------------------------------------------


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_preset_list_and_show(capsys):
    code, out, _ = _run(capsys, "preset", "list")
    assert code == 0 and set(json.loads(out)["result"]) == {"paper-default", "desk"}
    code, out, _ = _run(capsys, "preset", "show", "paper-default")
    res = json.loads(out)["result"]
    assert res["t1_xx"] == 220.0 and res["dark_rate"] == 250.0


def test_cli_failures_are_machine_readable(capsys, tmp_path):
    code, _, err = _run(capsys, "preset", "show", "nope")
    assert code != 0
    code, _, err = _run(capsys, "preset", "show")
    assert code == 2 and json.loads(err)["status"] == "error"
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("experiment = hbt\nbogus = 2\n")
    code, _, err = _run(capsys, "simulate", "hbt", "--config", str(cfg), "--out", str(tmp_path))
    msg = json.loads(err)
    assert code == 2 and msg["step"] == "config" and "line 2" in msg["reason"]
    code, _, err = _run(capsys, "analyze", str(tmp_path / "missing.csv"))
    assert code != 0 and json.loads(err)["status"] == "error"


def test_cli_simulate_then_analyze(capsys, tmp_path):
    code, out, _ = _run(capsys, "simulate", "hbt", "--periods", "200000", "--channel", "X", "--seed", "1", "--out", str(tmp_path))
    assert code == 0
    files = json.loads(out)["result"]["files"]
    assert {p.name for p in tmp_path.iterdir()} == {"hbt_X_det0.csv", "hbt_X_det1.csv", "hbt_X_hist.csv"}
    assert read_timetags(files[0]).is_sorted()
    code, out, _ = _run(capsys, "analyze", str(tmp_path / "hbt_X_hist.csv"), "--kind", "hbt")
    assert code == 0
    res = json.loads(out)["result"]["hbt_X_hist.csv"]
    assert res["g2_raw"] < 0.2 and res["g2_corrected"] <= res["g2_raw"]
