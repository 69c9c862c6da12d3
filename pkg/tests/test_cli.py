import json
import subprocess
import sys

import pytest

from forestdual.cli import run
from forestdual.config import ConfigError, parse_config

BD21 = {"kind": "exponential", "b": 2.0, "d": 1.0}

FAST_CHECKS = {
    "identities": {"n": 300},
    "survival-lemma": {"n": 5000},
    "width-reversal": {"n": 2000},
    "geometric-equivalence": {"n": 2000},
    "contour-transform": {"n": 1000},
    "contour-law": {"n": 1000},
    "over-undershoot": {"n": 10000},
    "reversal-invariance": {"n": 10000},
    "measure-change": {"n": 10000},
    "conditional-decomposition": {"n": 20000, "m": 2000},
}


@pytest.fixture
def cfg(tmp_path):
    def write(doc, name="c.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)

    return write


def test_scale_table(tmp_path):
    out = tmp_path / "w.csv"
    assert run(["scale-table", "--b", "2", "--d", "1", "--xmax", "2", "--h", "0.001", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,W,W_tilde"
    row = next(l for l in lines if l.startswith("1.0,"))
    assert float(row.split(",")[1]) == pytest.approx(4.436564, abs=1e-6)


def test_scale_table_volterra_from_config(tmp_path, cfg):
    c = cfg({"measure": {"kind": "atoms", "points": [[1.0, 0.6], [2.0, 0.9]]}, "scale": {"x_max": 2.0, "h": 0.01}})
    out = tmp_path / "w.csv"
    assert run(["scale-table", "--config", c, "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 202


def test_simulate_contour_round_trip(tmp_path, cfg):
    c = cfg({"measure": BD21, "T": 1.0, "simulate": {"n": 40, "ancestor": "bottom"}})
    f, p, g = tmp_path / "f.jsonl", tmp_path / "p.csv", tmp_path / "g.jsonl"
    assert run(["simulate", "--config", c, "--seed", "9", "--out", str(f)]) == 0
    assert run(["contour", "--in", str(f), "--out", str(p)]) == 0
    assert run(["forest-from-contour", "--in", str(p), "--out", str(g)]) == 0
    assert f.read_bytes() == g.read_bytes()


def test_byte_identical_repeats(tmp_path, cfg):
    c = cfg({"measure": BD21, "simulate": {"n": 30}, "epi": {"n": 20, "bin": 0.1}})
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        assert run(["simulate", "--config", c, "--seed", "4", "--out", str(d / "f.jsonl"), "--contour", str(d / "p.csv")]) == 0
        assert run(["epi", "--config", c, "--seed", "4", "--out", str(d / "t.nwk"), "--incidence", str(d / "i.csv"), "--coalescence", str(d / "h.csv")]) == 0
        outs.append({n: (d / n).read_bytes() for n in ("f.jsonl", "p.csv", "t.nwk", "i.csv", "h.csv")})
    assert outs[0] == outs[1]


def test_threads_do_not_change_outputs(tmp_path, cfg, monkeypatch):
    c = cfg({"measure": BD21, "simulate": {"n": 3000}})
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(["simulate", "--config", c, "--out", str(a), "--threads", "1"]) == 0
    monkeypatch.setenv("FORESTDUAL_THREADS", "4")
    assert run(["simulate", "--config", c, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_epi_outputs(tmp_path, cfg):
    c = cfg({"measure": BD21, "epi": {"n": 10}})
    nwk, inc = tmp_path / "t.nwk", tmp_path / "i.csv"
    assert run(["epi", "--config", c, "--out", str(nwk), "--incidence", str(inc), "--bin", "0.25"]) == 0
    trees = nwk.read_text().splitlines()
    assert len(trees) == 10 and all(t.endswith(";") for t in trees)
    rows = inc.read_text().splitlines()
    assert rows[0] == "bin_start,count" and [r.split(",")[0] for r in rows[1:]] == ["0.0", "0.25", "0.5", "0.75"]


def test_verify_suite_and_meta(tmp_path, cfg):
    c = cfg({"measure": BD21, "verify": {"options": FAST_CHECKS}})
    out = tmp_path / "report.json"
    assert run(["verify", "--check", "all", "--config", c, "--seed", "42", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] and doc["seed"] == 42
    assert len(doc["checks"]) == 11 and all("meta" not in r for r in doc["checks"])
    meta = json.loads((tmp_path / "report.meta.json").read_text())
    assert set(meta) == {r["check_id"] for r in doc["checks"]}
    first = out.read_bytes()
    assert run(["verify", "--check", "all", "--config", c, "--seed", "42", "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_verify_failure_exit_code(tmp_path, cfg):
    # with alpha near 1 the KS critical distance is tiny, so the family rejects
    c = cfg({"measure": BD21, "verify": {"options": {"width-reversal": {"n": 2000, "alpha": 0.999999}}}})
    assert run(["verify", "--check", "width-reversal", "--config", c]) == 1


class TestErrors:
    def test_unknown_key(self, cfg):
        assert run(["verify", "--config", cfg({"measure": BD21, "Tx": 1})]) == 3

    def test_bad_measure(self, cfg):
        assert run(["verify", "--config", cfg({"measure": {"kind": "exponential", "b": -1, "d": 1}})]) == 3

    def test_missing_measure(self, cfg):
        assert run(["simulate", "--config", cfg({"T": 1.0})]) == 3

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        assert run(["verify", "--config", str(p)]) == 3

    def test_missing_config_file(self, tmp_path):
        assert run(["verify", "--config", str(tmp_path / "nope.json")]) == 3

    def test_option_not_taken_by_check(self, cfg):
        c = cfg({"measure": BD21, "verify": {"options": {"scale": {"n": 5}}}})
        assert run(["verify", "--check", "scale", "--config", c]) == 3

    def test_usage(self):
        assert run(["frobnicate"]) == 2
        assert run(["verify", "--bogus"]) == 2
        assert run(["verify", "--check", "nonsense"]) == 2
        assert run(["scale-table", "--b", "2"]) == 2
        assert run(["simulate", "--n", "0"]) == 2

    def test_missing_input(self, tmp_path):
        assert run(["contour", "--in", str(tmp_path / "missing.jsonl")]) == 2

    def test_parse_config_directly(self):
        with pytest.raises(ConfigError):
            parse_config({"verify": {"checks": ["no-such-check"]}})
        assert parse_config({"measure": BD21, "seed": 2**64 - 1}).seed == 2**64 - 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "forestdual", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("forestdual")
