import csv
import json
import os

import numpy as np
import pytest

from landscape_bo import cli, config as cfgmod
from landscape_bo.acquisition import SCHEDULE_IDS
from landscape_bo.config import ExperimentConfig
from landscape_bo.engine import RunRecord

TOY = """
functions = [1, 8]
instances = [1]
dims = [2]
seeds = {seeds}
output_dir = "{out}"

[budget]
doe_size = 10
surrogate_evals = 3

[gp]
restarts = 1
max_evals = 40

[af_optimizer]
n_candidates = 200
local_steps = 5
"""


def toy_config(tmp_path, seeds=3, out="runs"):
    path = tmp_path / "exp.toml"
    path.write_text(TOY.format(seeds=seeds, out=tmp_path / out))
    return ExperimentConfig.load(path, env={})


@pytest.fixture(scope="module")
def toy_runs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("toy")
    cfg = toy_config(tmp, seeds=8)
    cli.run_experiments(cfg)
    return cfg


class TestConfig:
    def test_parse(self, tmp_path):
        cfg = toy_config(tmp_path)
        assert cfg.seeds == [0, 1, 2]
        assert cfg.schedules == list(SCHEDULE_IDS)
        assert cfg.budget(2).doe_size == 10 and cfg.gp.restarts == 1
        assert cfg.af_optimizer.n_candidates == 200

    def test_default_budget(self):
        cfg = ExperimentConfig.from_dict({"functions": [1], "dims": [3]}, env={})
        assert cfg.budget(3).doe_size == 30 and cfg.budget(3).surrogate_evals == 100

    def test_env_override(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"functions": [1], "parallelism": 2},
                                         env={"LBO_PARALLELISM": "5", "LBO_OUTPUT_DIR": "/x"})
        assert cfg.parallelism == 5 and cfg.output_dir == "/x"

    def test_seed_list(self):
        assert ExperimentConfig.from_dict({"functions": [1], "seeds": [4, 9]}, env={}).seeds == [4, 9]

    @pytest.mark.parametrize("bad", [
        {"functions": []},
        {"functions": [30]},
        {"functions": [1], "schedules": ["ucb"]},
        {"functions": [1], "bogus": 1},
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(bad, env={})

    def test_matrix_size(self, tmp_path):
        assert len(list(toy_config(tmp_path).matrix())) == 42


class TestRunExperiments:
    def test_counts_resume_round_trip(self, tmp_path):
        cfg = toy_config(tmp_path)
        stats = cli.run_experiments(cfg)
        assert stats["completed"] == 42
        lines = (tmp_path / "runs" / "runs.jsonl").read_text().splitlines()
        assert len(lines) == 42
        assert cli.run_experiments(cfg)["completed"] == 0
        recs = cfgmod.read_records(tmp_path / "runs")
        assert len({r.key for r in recs}) == 42
        for line in lines[:5]:
            d = json.loads(line)
            assert RunRecord.from_dict(d).to_dict() == d
        # shared design -> identical features across the 7 schedules of a key
        by = {}
        for r in recs:
            by.setdefault(r.problem_key, []).append(r.features.as_array())
        for arrs in by.values():
            for a in arrs[1:]:
                np.testing.assert_array_equal(a, arrs[0])

    def test_parallel_matches_serial(self, tmp_path):
        a = toy_config(tmp_path, seeds=1, out="serial")
        b = ExperimentConfig(**{**a.__dict__, "parallelism": 2, "output_dir": str(tmp_path / "par")})
        cli.run_experiments(a)
        cli.run_experiments(b)

        def strip(p):
            out = []
            for line in p.read_text().splitlines():
                d = json.loads(line)
                d.pop("timing")
                out.append(d)
            return out

        assert strip(tmp_path / "serial" / "runs.jsonl") == strip(tmp_path / "par" / "runs.jsonl")
        assert not list((tmp_path / "par").glob("part-*.jsonl"))

    def test_truncated_line_ignored(self, tmp_path):
        cfg = toy_config(tmp_path, seeds=1)
        cli.run_experiments(cfg)
        with open(tmp_path / "runs" / "runs.jsonl", "a") as fh:
            fh.write('{"schema_version": 1, "functi')
        assert len(cfgmod.read_records(tmp_path / "runs")) == 14

    @pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
    def test_unwritable(self, tmp_path):
        ro = tmp_path / "ro"
        ro.mkdir()
        ro.chmod(0o500)
        cfg = ExperimentConfig(functions=[1], dims=[2], output_dir=str(ro / "x"))
        with pytest.raises(OSError):
            cli.run_experiments(cfg)

    def test_unwritable_path_is_file(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        cfg = ExperimentConfig(functions=[1], dims=[2], output_dir=str(blocker / "sub"))
        with pytest.raises(OSError):
            cli.run_experiments(cfg)

    def test_failures_recorded(self, tmp_path, monkeypatch):
        calls = {"n": 0}
        real = cli.run

        def flaky(p, *a, **k):
            calls["n"] += 1
            if p.function_id == 8:
                raise RuntimeError("boom")
            return real(p, *a, **k)

        monkeypatch.setattr(cli, "run", flaky)
        stats = cli.run_experiments(toy_config(tmp_path, seeds=1))
        assert stats["failed"] == 7 and stats["completed"] == 7
        fails = cfgmod.read_failures(tmp_path / "runs")
        assert len(fails) == 7 and "boom" in fails[0]["error"]


class TestPipeline:
    def test_outputs(self, toy_runs, tmp_path):
        summary = cli.pipeline(toy_runs.output_dir, tmp_path / "rep", seed=0)
        for name in ("model.json", "final_regret.csv", "ranks.csv", "convergence.csv"):
            assert (tmp_path / "rep" / name).exists()
        with open(tmp_path / "rep" / "ranks.csv") as fh:
            ranks = list(csv.DictReader(fh))
        assert len(ranks) == summary["test_rows"] > 0
        with open(tmp_path / "rep" / "final_regret.csv") as fh:
            rows = list(csv.DictReader(fh))
        header = list(rows[0])
        assert header[4:11] == list(SCHEDULE_IDS)
        for r in rows:
            vals = [float(r[s]) for s in SCHEDULE_IDS]
            assert float(r["vbs"]) == min(vals)
            assert min(vals) <= float(r["afs"]) <= max(vals)
            assert float(r["afs"]) == float(r[r["afs_choice"]])
        for r in ranks:
            assert sum(float(r[s]) for s in SCHEDULE_IDS) == 28

    def test_deterministic(self, toy_runs, tmp_path):
        cli.pipeline(toy_runs.output_dir, tmp_path / "a", seed=3)
        cli.pipeline(toy_runs.output_dir, tmp_path / "b", seed=3)
        for name in ("model.json", "final_regret.csv", "ranks.csv", "convergence.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_too_few_rows(self, tmp_path):
        cfg = toy_config(tmp_path, seeds=3)  # 6 rows, 4 of them train
        cli.run_experiments(cfg)
        with pytest.raises(ValueError):
            cli.pipeline(cfg.output_dir, tmp_path / "rep")


class TestMain:
    def test_suite_list(self, capsys):
        assert cli.main(["suite", "list"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 24 and "multimodal" in out[15]

    def test_commands(self, toy_runs, tmp_path, capsys):
        runs = toy_runs.output_dir
        assert cli.main(["features", "--runs", runs, "--out", str(tmp_path / "f.csv")]) == 0
        with open(tmp_path / "f.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 112 and len(rows[0]) == 5 + 38
        assert cli.main(["dataset", "--runs", runs, "--out", str(tmp_path / "d.csv")]) == 0
        assert cli.main(["train", "--dataset", str(tmp_path / "d.csv"), "--seed", "1",
                         "--trees", "10", "--out", str(tmp_path / "m.json")]) == 0
        rec = json.loads(open(os.path.join(runs, "runs.jsonl")).readline())
        (tmp_path / "design.json").write_text(json.dumps(rec["design"]))
        capsys.readouterr()
        assert cli.main(["select", "--model", str(tmp_path / "m.json"),
                         "--design", str(tmp_path / "design.json")]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["schedule_id"] in SCHEDULE_IDS and len(doc["predictions"]) == 7
        assert doc["schedule_id"] == min(doc["predictions"], key=doc["predictions"].get)
        assert cli.main(["analyze", "--runs", runs, "--model", str(tmp_path / "m.json"),
                         "--out", str(tmp_path / "rep")]) == 0
        assert (tmp_path / "rep" / "convergence.csv").exists()

    def test_error_exit(self, tmp_path, capsys):
        assert cli.main(["run", "--config", str(tmp_path / "missing.toml")]) == 2
        assert "error" in capsys.readouterr().err
