import json
import math
import os

import numpy as np
import pandas as pd
import pytest

from config.config_manager import ConfigManager
from mappers.record_mapper import RecordMapper
from msa.estimators import make_estimate
from msa.scales import MsaParams
from utils.artifact_manager import ArtifactManager, canonical_line, json_safe, read_jsonl


@pytest.fixture
def artifacts(tmp_path):
    return ArtifactManager(str(tmp_path / "run"), "abc123")


@pytest.fixture
def mapper():
    return RecordMapper(ConfigManager())


class TestJsonSafe:
    def test_numpy_values(self):
        assert json_safe({"a": np.int64(3), "b": np.float64(0.5), "c": np.array([1, 2]), "d": np.bool_(True)}) == {
            "a": 3, "b": 0.5, "c": [1, 2], "d": True}

    def test_non_finite_floats(self):
        assert json_safe([math.nan, math.inf, 1.0]) == [None, None, 1.0]

    def test_canonical_line_sorts_keys(self):
        assert canonical_line({"b": 1, "a": (2, 3)}) == '{"a":[2,3],"b":1}'


class TestArtifactManager:
    def test_jsonl(self, artifacts):
        written = artifacts.write_jsonl("records.jsonl", [{"op": "x", "value": math.nan}, {"op": "x"}, {"op": "y"}])
        assert written == 3
        path = os.path.join(artifacts.directory, "records.jsonl")
        lines = open(path).read().splitlines()
        assert lines[0] == '{"manifest_hash":"abc123","op":"x","value":null}'
        assert read_jsonl(path)[2]["op"] == "y"
        assert artifacts.counts == {"x": 2, "y": 1}

    def test_table(self, artifacts):
        artifacts.write_table("plot_t.dat", ["L", "point"], [[4, 0.25], [8, None], [16, True]])
        lines = open(os.path.join(artifacts.directory, "plot_t.dat")).read().splitlines()
        assert lines == ["# manifest abc123", "# L point", "4 0.25", "8 nan", "16 1"]

    def test_csv_header(self, artifacts):
        artifacts.write_csv("summary.csv", pd.DataFrame({"a": [1, 2]}))
        lines = open(os.path.join(artifacts.directory, "summary.csv")).read().splitlines()
        assert lines[0] == "# manifest abc123"
        assert lines[1:] == ["a", "1", "2"]

    def test_manifest(self, artifacts):
        artifacts.write_jsonl("records.jsonl", [{"op": "x"}])
        manifest = artifacts.write_manifest("spectrum", "1.0.0", 0.5, extra={"master_seed": 4})
        on_disk = json.load(open(os.path.join(artifacts.directory, "manifest.json")))
        assert on_disk == manifest
        assert manifest["record_counts"] == {"x": 1}
        assert manifest["files"] == ["records.jsonl"]
        assert manifest["master_seed"] == 4

    def test_interrupted_write_leaves_nothing(self, artifacts):
        def records():
            yield {"op": "x"}
            raise RuntimeError("interrupted")

        with pytest.raises(RuntimeError):
            artifacts.write_jsonl("records.jsonl", records())
        assert os.listdir(artifacts.directory) == []


class TestRecordMapper:
    def _estimate(self, op="singularity", **fields):
        return make_estimate(op, 2, 10, 0.6, 3, L=fields.pop("L", 8), n=1, N=2, **fields)

    def test_estimate_record(self, mapper):
        record = mapper.estimate_record(self._estimate(E=0.5), MsaParams(N=2))
        assert record["op"] == "singularity"
        assert record["point"] == 0.2
        assert record["status"] == "pass" and record["pass"] is True
        assert record["params"]["p"] == 13.0
        assert "details" not in record

    def test_plot_rows_sorted_by_axis(self, mapper):
        records = [mapper.estimate_record(self._estimate(L=L)) for L in (16, 4, 8)]
        tables = mapper.emit_plot_data(records)
        columns, rows = tables["singularity_vs_L"]
        assert columns == ["L", "point", "ci_lo", "ci_hi", "bound"]
        assert [row[0] for row in rows] == [4, 8, 16]

    def test_split_tables(self, mapper):
        records = [mapper.estimate_record(self._estimate("weakint", h=h, E=E))
                   for h in (0.1, 0.0) for E in (0.5, 1.0)]
        tables = mapper.emit_plot_data(records)
        assert set(tables) == {"weakint_vs_h_E0.5", "weakint_vs_h_E1"}
        assert [row[0] for row in tables["weakint_vs_h_E0.5"][1]] == [0.0, 0.1]

    def test_list_columns_become_rows(self, mapper):
        tables = mapper.emit_plot_data([{"op": "eigenvalues", "index": [0, 1, 2], "eigenvalue": [0.5, 1.5, 2.5]}])
        assert tables["eigenvalues"][1] == [[0, 0.5], [1, 1.5], [2, 2.5]]

    def test_no_records(self, mapper):
        assert mapper.emit_plot_data([]) == {}

    def test_summary_frame_drops_nested_fields(self, mapper):
        estimate = self._estimate(E=0.5, interval=(0.4, 0.6))
        frame = mapper.summary_frame([mapper.estimate_record(estimate, MsaParams(N=2))])
        assert "params" not in frame.columns and "interval" not in frame.columns
        assert frame.loc[0, "successes"] == 2
