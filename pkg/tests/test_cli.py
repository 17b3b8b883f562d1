import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypowave import cli, heisenberg as heis, su2
from hypowave.fields import FieldSchemaError, field_from_dict, field_to_dict, io_field, load_field, save_field
from hypowave.report import Check, check_le, summarize


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_ode_energy_constant(tmp_path, capsys):
    out = tmp_path / "e.csv"
    code = cli.main(["ode-energy", "--case", "1", "--speed", "const:1", "--beta-grid", "1,10,100",
                     "--T", "1", "--out", str(out)])
    assert code == 0
    assert [float(r["sup_ratio"]) for r in _rows(out)] == pytest.approx([1, 1, 1], abs=1e-7)
    assert "PASS" in capsys.readouterr().out


def test_ode_energy_dat_dir(tmp_path):
    code = cli.main(["ode-energy", "--speed", "const:1", "--beta-grid", "2", "--dat-dir", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "mode_beta2.dat").read_text().startswith("#")


def test_su2_riesz_flat_profile(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["su2-riesz", "--word", "XY", "--lmax", "50", "--out", str(out)]) == 0
    ops = [float(r["op_norm"]) for r in _rows(out)]
    assert len(ops) == 100 and np.ptp(ops) <= 1e-12


def test_su2_riesz_violation_exit_1(capsys):
    assert cli.main(["su2-riesz", "--word", "XXXX", "--lmax", "20", "--c", "1.5"]) == 1
    assert "FAIL (margin" in capsys.readouterr().out


def test_bessel_divergent_exit_0(tmp_path, capsys):
    js = tmp_path / "b.json"
    assert cli.main(["bessel", "--s", "0.5", "--lmax", "200", "--json", str(js)]) == 0
    assert json.loads(js.read_text())["classification"] == "divergent"
    assert "divergent" in capsys.readouterr().out


def test_heis_riesz(tmp_path):
    out = tmp_path / "h.csv"
    assert cli.main(["heis-riesz", "--word", "Z,ZbZ", "--N", "32", "--out", str(out)]) == 0
    assert len(_rows(out)) == 12


def test_gevrey_cli(tmp_path):
    js = tmp_path / "g.json"
    assert cli.main(["gevrey", "--single", "1,0,0", "--s", "1", "--k-max", "10", "--json", str(js)]) == 0
    assert json.loads(js.read_text())["verdicts"]["forward"] is True


def test_wave_cli(tmp_path):
    f0, f1 = su2.weighted_field(2, 0.5, 0), su2.weighted_field(2, 0.5, 1)
    save_field(tmp_path / "f0.json", f0)
    save_field(tmp_path / "f1.json", f1)
    summ = tmp_path / "s.json"
    code = cli.main(["wave", "--f0", str(tmp_path / "f0.json"), "--f1", str(tmp_path / "f1.json"),
                     "--speed", "const:1", "--n-samples", "21", "--summary", str(summ),
                     "--save-final", str(tmp_path / "uT.json")])
    assert code == 0
    assert json.loads(summ.read_text())["C_meas"] == pytest.approx(1, abs=1e-8)
    assert load_field(tmp_path / "uT.json").group == "su2"


def test_usage_errors(tmp_path):
    assert cli.main([]) == 2
    assert cli.main(["su2-riesz", "--word", "XQ"]) == 2
    assert cli.main(["ode-energy", "--case", "2", "--speed", "const:1"]) == 2
    assert cli.main(["bessel", "--s", "-1"]) == 2
    assert cli.main(["nosuch"]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("s = [")
    assert cli.main(["bessel", "--config", str(bad)]) == 2
    unk = tmp_path / "unk.json"
    unk.write_text('{"bogus": 1}')
    assert cli.main(["bessel", "--config", str(unk)]) == 2


def test_config_toml_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('subcommand = "bessel"\ns = 1.5\nlmax = "200"\n')
    assert cli.main(["--config", str(cfg)]) == 0
    assert "convergent" in capsys.readouterr().out
    assert cli.main(["bessel", "--config", str(cfg), "--s", "0.5"]) == 0
    assert "divergent" in capsys.readouterr().out


def test_run_record(tmp_path):
    out = tmp_path / "o.csv"
    assert cli.run({"subcommand": "su2-riesz", "word": ["XY"], "lmax": 3, "out": str(out)}) == 0
    assert out.exists()
    assert cli.run({"subcommand": "nope"}) == 2


def test_csv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        cli.main(["gevrey", "--lmax", "3", "--seed", "5", "--s", "1.5", "--k-max", "6", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_failed_run_leaves_no_partial_file(tmp_path):
    out = tmp_path / "x.csv"
    cli.main(["ode-energy", "--case", "2", "--speed", "const:1", "--out", str(out)])
    assert not out.exists() and list(tmp_path.iterdir()) == []


def test_threads_env(monkeypatch):
    from hypowave import _parallel
    monkeypatch.setenv("HYPOWAVE_THREADS", "1")
    assert _parallel.max_workers() == 1
    assert _parallel.pmap(lambda x: x * x, [3, 1, 2]) == [9, 1, 4]


# ---------------------------------------------------------------- fields


@settings(max_examples=15)
@given(st.integers(0, 6), st.integers(0, 10**6))
def test_su2_round_trip(lmax2, seed):
    f = su2.weighted_field(su2.HalfInt(lmax2), 0.4, seed)
    g = field_from_dict(json.loads(json.dumps(field_to_dict(f))))
    assert g.lmax == f.lmax and all(np.array_equal(f.coeffs[k], g.coeffs[k]) for k in f.coeffs)


def test_heis_round_trip(tmp_path):
    f = heis.random_field([-2.0, 0.5, 1.0], 5, seed=4)
    p = io_field(tmp_path / "h.json", "save", f)
    g = io_field(p, "load")
    assert np.array_equal(f.mats, g.mats) and np.array_equal(f.weights, g.weights)


def test_file_round_trip_bytes(tmp_path):
    p = save_field(tmp_path / "a.json", su2.weighted_field(2, 1.0, 3))
    q = save_field(tmp_path / "b.json", load_field(p))
    assert p.read_bytes() == q.read_bytes()


def test_empty_field_save(tmp_path):
    p = save_field(tmp_path / "e.json", su2.SpectralFieldSU2({}))
    d = json.loads(p.read_text())
    assert d["coeffs"] == {} and d["group"] == "su2"
    assert load_field(p).coeffs == {}


def test_mismatched_block_names_key(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"group": "su2", "lmax2": 2, "coeffs": {"2": [[[1, 0]]]}}))
    with pytest.raises(FieldSchemaError, match=r"coeffs\['2'\]"):
        load_field(p)


def test_schema_errors():
    with pytest.raises(FieldSchemaError):
        field_from_dict({"coeffs": {}})
    with pytest.raises(FieldSchemaError):
        field_from_dict({"group": "so3"})
    with pytest.raises(FieldSchemaError):
        field_from_dict({"group": "heis", "trunc": 2, "lambdas": [1.0], "coeffs": []})
    with pytest.raises(ValueError):
        io_field("x.json", "append")


# ---------------------------------------------------------------- report


def test_summarize_all_pass():
    text, machine = summarize([check_le("a", "bound", 1.0, 2.0)])
    assert "PASS" in text and machine["all_pass"]


def test_summarize_violation_has_margin():
    text, machine = summarize([check_le("a", "bound", 3.0, 2.0), Check("b", "x", 1.0, math.nan, "INFO")])
    assert "FAIL (margin -1)" in text and not machine["all_pass"]
    assert machine["checks"][1]["bound"] == "nan"


def test_summarize_empty():
    text, machine = summarize([])
    assert text.splitlines() == ["check  anchor  measured  bound  verdict"]
    assert machine == {"checks": [], "all_pass": True}
