"""CLI surface: gen / recover / oracle / bench / decode / betas."""

import csv
import json
import math

import numpy as np
import pytest

from mixrec.cli import main
from mixrec.supports import SubsetStatTable
from mixrec.synth import oracle_intersection, oracle_membership


@pytest.fixture()
def md_config(tmp_path):
    cfg = {
        "instance": {
            "n": 8, "k": 2, "ell": 2, "model": "md", "delta": 1.0,
            "R": 2 * math.sqrt(2), "sigma": 1.0, "seed": 6,
        },
        "run": {"m": 300000, "gamma": 0.05, "seed": 7},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


class TestGen:
    def test_instance_and_npz(self, tmp_path):
        inst_path = tmp_path / "inst.json"
        samples_path = tmp_path / "samples.npz"
        rc = main([
            "gen", "--model", "md", "--n", "6", "--k", "2", "--ell", "2",
            "--seed", "3", "--m", "500",
            "--out-instance", str(inst_path), "--out-samples", str(samples_path),
        ])
        assert rc == 0
        payload = json.loads(inst_path.read_text())
        assert payload["n"] == 6 and payload["ell"] == 2
        arrays = np.load(samples_path)
        assert arrays["x"].shape == (500, 6)
        assert arrays["components"].shape == (500,)

    def test_csv_stream_with_labels(self, tmp_path):
        out = tmp_path / "samples.csv"
        rc = main([
            "gen", "--model", "mlr", "--n", "4", "--k", "2", "--ell", "2",
            "--seed", "3", "--m", "50", "--format", "csv",
            "--out-samples", str(out),
        ])
        assert rc == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x1", "x2", "x3", "x4", "y", "component"]
        assert len(rows) == 51


class TestRecoverAndOracle:
    def test_recover_writes_report(self, md_config, tmp_path):
        out = tmp_path / "report.json"
        rc = main(["recover", "--mode", "exact", "--config", str(md_config),
                   "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["exact_match"] is True
        assert report["mode"] == "exact"

    def test_oracle_runs_clean(self, md_config, tmp_path):
        out = tmp_path / "oracle.json"
        rc = main(["oracle", "--config", str(md_config), "--out", str(out)])
        assert rc == 0
        assert json.loads(out.read_text())["exact_match"] is True

    def test_recover_byte_identical_repeats(self, md_config, tmp_path):
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        main(["recover", "--config", str(md_config), "--out", str(out1)])
        main(["recover", "--config", str(md_config), "--out", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()


class TestBench:
    def test_success_rate_csv(self, md_config, tmp_path):
        out = tmp_path / "bench.csv"
        rc = main(["bench", "--config", str(md_config), "--m-grid", "2e3,3e5",
                   "--seeds", "3", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "m,seeds,successes,success_rate"
        assert len(lines) == 3
        last = lines[-1].split(",")
        assert last[0] == "300000" and float(last[3]) == 1.0

    def test_bench_deterministic(self, md_config, tmp_path):
        out1, out2 = tmp_path / "b1.csv", tmp_path / "b2.csv"
        for out in (out1, out2):
            main(["bench", "--config", str(md_config), "--m-grid", "3e5",
                  "--seeds", "2", "--out", str(out)])
        assert out1.read_bytes() == out2.read_bytes()


class TestDecode:
    def test_decode_occ_json(self, tmp_path):
        from itertools import combinations

        from mixrec.supports import occ_table_from_intersections

        members = [frozenset({1, 2}), frozenset({2, 3})]
        table = SubsetStatTable(kind="intersection-count", ell=2)
        for r in (1, 2):
            for c in combinations((1, 2, 3), r):
                table.set(c, oracle_intersection(members, c))
        occ = occ_table_from_intersections(table, (1, 2, 3), range(0, 3), 2)
        occ_path = tmp_path / "occ.json"
        occ_path.write_text(occ.to_json())
        out = tmp_path / "supports.json"
        rc = main(["decode", "--occ", str(occ_path), "--out", str(out)])
        assert rc == 0
        assert json.loads(out.read_text())["supports"] == [[1, 2], [2, 3]]

    def test_decode_intersection_table(self, tmp_path):
        from itertools import combinations

        members = [frozenset({1, 2}), frozenset({2, 3})]
        table = SubsetStatTable(kind="intersection-count", ell=2)
        for r in (1, 2):
            for c in combinations((1, 2, 3), r):
                table.set(c, oracle_intersection(members, c))
        path = tmp_path / "table.json"
        path.write_text(table.to_json())
        out = tmp_path / "supports.json"
        rc = main(["decode", "--table", str(path), "--out", str(out)])
        assert rc == 0
        assert json.loads(out.read_text())["supports"] == [[1, 2], [2, 3]]

    def test_decode_membership_table(self, tmp_path):
        from itertools import combinations

        members = [frozenset({1, 2}), frozenset({2, 3})]
        table = SubsetStatTable(kind="membership-indicator", ell=2)
        for r in (1, 2):
            for c in combinations((1, 2, 3), r):
                table.set(c, oracle_membership(members, c))
        path = tmp_path / "table.json"
        path.write_text(table.to_json())
        out = tmp_path / "maximal.json"
        rc = main(["decode", "--table", str(path), "--out", str(out)])
        assert rc == 0
        assert json.loads(out.read_text())["maximal"] == [[1, 2], [2, 3]]

    def test_decode_requires_input(self):
        assert main(["decode"]) == 2


class TestBetas:
    def test_gaussian_dump(self, tmp_path, capsys):
        rc = main(["betas", "--family", "gaussian", "--sigma", "1.0", "--t-max", "2"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["2"] == [1.0, 0.0, 1.0]

    def test_poisson_dump(self, capsys):
        rc = main(["betas", "--family", "poisson", "--t-max", "2"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["2"] == [0.0, 1.0, 1.0]
