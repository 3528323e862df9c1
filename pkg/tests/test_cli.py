import json
import math

import jsonschema
import pytest

from cubemax.cli import CONFIG_ENV, main
from cubemax.errors import ConfigError
from cubemax.experiments import run
from cubemax.reports import ExperimentConfig, body, dumps, parse_config_text, plain, rows_to_csv, validate_report


class TestConfig:
    def test_round_trip(self):
        cfg = ExperimentConfig("theta-lower", n=3, trials=100, seed=5, levels=(2.0, 3.5), cap_mode="explicit",
                               cap_value=4.0, self_test=True)
        assert ExperimentConfig.from_text(cfg.to_text()) == cfg

    def test_comments_and_overrides(self):
        cfg = ExperimentConfig.from_text("command=pipeline  # grid run\nc_eta=0.5\n", c_eta="0.25")
        assert cfg.c_eta == 0.25

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text("command=pipeline\nbogus=1\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text("command=pipeline\nn=abc\n")
        with pytest.raises(ConfigError):
            parse_config_text("no equals sign")

    def test_scientific_int(self):
        assert ExperimentConfig.from_text("command=theta-lower\ntrials=1e5\n").trials == 100_000


class TestDocuments:
    def test_plain(self):
        assert plain({"a": math.nan, "b": math.inf, "c": -math.inf, "d": (1, 2.5)}) == {
            "a": None, "b": "inf", "c": "-inf", "d": [1, 2.5]}

    def test_float_round_trip(self):
        x = 0.1 + 0.2
        assert json.loads(dumps({"x": x}))["x"] == x

    def test_schema_rejects_unknown_field(self):
        doc, _ = run(ExperimentConfig("pipeline", c_eta=0.5, n_grid=(1e4,), eta_grid=(1.0,)))
        validate_report(doc)
        with pytest.raises(jsonschema.ValidationError):
            validate_report({**doc, "extra": 1})
        with pytest.raises(jsonschema.ValidationError):
            validate_report({**doc, "config": {**doc["config"], "bogus": 1}})

    def test_body_excludes_clock(self):
        doc, _ = run(ExperimentConfig("pipeline", c_eta=0.5, n_grid=(1e4,), eta_grid=(1.0,)))
        assert "wall_clock_seconds" not in json.loads(body(doc))

    def test_csv(self):
        text = rows_to_csv([{"a": 1, "b": 0.5, "c": None}])
        assert text == "a,b,c\n1,0.5,\n"


def _run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


class TestExitCodes:
    def test_missing_seed(self, capsys):
        code, out = _run(["theta-lower", "--n", "1", "--trials", "10"], capsys)
        assert code == 1
        assert "seed" in out.err

    def test_bad_level(self, capsys):
        assert _run(["theta-lower", "--seed", "1", "--trials", "10", "--levels", "1.5"], capsys)[0] == 1

    def test_self_test_detects(self, capsys):
        code, out = _run(["lemma2-verify", "--self-test"], capsys)
        assert code == 0
        assert "detected" in out.out

    def test_clean_grid(self, capsys):
        assert _run(["lemma2-verify"], capsys)[0] == 0

    def test_injected_small_dimension_warns(self, capsys):
        code, out = _run(["lemma2-verify", "--inject-d", "9"], capsys)
        assert code == 0
        assert "not applicable" in out.out

    def test_failing_check(self, capsys):
        # one coordinate is far from the bridge limit, so the KS check fails
        argv = ["donsker-diag", "--seed", "1", "--n", "1", "--ks-trials", "500", "--grid", "64"]
        code, out = _run(argv, capsys)
        assert code == 2

    def test_unwritable_output(self, tmp_path, capsys):
        argv = ["pipeline", "--c-eta", "0.5", "--n-grid", "1e4", "--out", str(tmp_path / "missing" / "r.json")]
        assert _run(argv, capsys)[0] == 3

    def test_missing_config(self, tmp_path, capsys):
        assert _run(["pipeline", "--config", str(tmp_path / "nope.cfg")], capsys)[0] == 3


class TestOutputs:
    def test_json_and_csv(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code, _ = _run(["pipeline", "--c-eta", "0.5", "--n-grid", "1e4,1e6", "--format", "csv", "--out", str(out)],
                       capsys)
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1 + 2 * 3
        doc = json.loads((tmp_path / "r.csv.json").read_text())
        assert doc["results"]["all_vacuous"] is True

    def test_env_config_and_flag_override(self, tmp_path, monkeypatch, capsys):
        cfg = tmp_path / "base.cfg"
        cfg.write_text("command=pipeline\nc_eta=0.5\nn_grid=1e4\neta_grid=0.5\n")
        monkeypatch.setenv(CONFIG_ENV, str(cfg))
        out = tmp_path / "r.json"
        code, _ = _run(["pipeline", "--eta-grid", "1.0", "--out", str(out)], capsys)
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["config"]["eta_grid"] == [1.0]
        assert doc["config"]["c_eta"] == 0.5

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        docs = []
        out = tmp_path / "r.json"
        for _ in range(2):
            _run(["theta-lower", "--n", "2", "--trials", "500", "--seed", "4", "--out", str(out)], capsys)
            docs.append(body(json.loads(out.read_text())))
        assert docs[0] == docs[1]

    def test_workers_do_not_change_result(self, tmp_path, capsys):
        docs = []
        for w in (1, 2):
            out = tmp_path / f"w{w}.json"
            _run(["theta-lower", "--n", "3", "--trials", "3000", "--seed", "4", "--workers", str(w),
                  "--out", str(out)], capsys)
            doc = json.loads(out.read_text())
            docs.append(doc["results"])
        assert docs[0] == docs[1]

    def test_donsker_diag(self, capsys):
        argv = ["donsker-diag", "--seed", "2", "--n", "200", "--ks-trials", "300", "--grid", "128"]
        code, out = _run(argv, capsys)
        assert code in (0, 2)
        assert "donsker KS=" in out.out
