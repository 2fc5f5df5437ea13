"""
Panel, surface and quantile-table files; run manifests.
"""

import json

import numpy as np
import pytest

from .conftest import validate_schema


class TestPanelCsv:
    """Long-form panel CSV with JSON sidecar."""

    def test_round_trip_with_sidecar(self, tmp_path, make_panel):
        """Values, seed and scenario survive; the sidecar matches its schema."""
        from spherical_cusum.panel_io import read_panel, write_panel

        panel = make_panel(3, 7, seed=21)
        panel.seed = 21
        panel.scenario = {"mu0": [[0, 0, 5.0]], "mu1": [], "alpha": {}}
        written = write_panel(panel, tmp_path / "panel.csv")
        assert [p.name for p in written] == ["panel.csv", "panel.json"]
        validate_schema(json.loads(written[1].read_text()), "panel_sidecar")

        again = read_panel(tmp_path / "panel.csv")
        assert np.array_equal(again.values, panel.values)
        assert (again.lmax, again.n_times, again.seed) == (3, 7, 21)
        assert again.scenario == panel.scenario

    def test_header_checked(self, tmp_path):
        """The header must be ell,m,t,value."""
        from spherical_cusum.errors import SchemaError
        from spherical_cusum.panel_io import read_panel

        path = tmp_path / "bad.csv"
        path.write_text("l,m,t,value\n0,0,1,1.0\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="header"):
            read_panel(path)

    def test_missing_rows(self, tmp_path):
        """Fewer rows than (L+1)^2 N is an error."""
        from spherical_cusum.errors import SchemaError
        from spherical_cusum.panel_io import read_panel

        path = tmp_path / "short.csv"
        path.write_text("ell,m,t,value\n0,0,1,1.0\n1,0,1,2.0\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="expected 4 rows"):
            read_panel(path)

    def test_duplicates_and_ranges(self, tmp_path):
        """Duplicate cells and |m| > ell are refused."""
        from spherical_cusum.errors import SchemaError
        from spherical_cusum.panel_io import read_panel

        duplicate = tmp_path / "dup.csv"
        duplicate.write_text("ell,m,t,value\n0,0,1,1.0\n0,0,1,2.0\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="duplicate"):
            read_panel(duplicate)
        bad_m = tmp_path / "m.csv"
        bad_m.write_text("ell,m,t,value\n0,1,1,1.0\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="outside"):
            read_panel(bad_m)


class TestPanelBinary:
    """The .bpanel layout."""

    def test_round_trip(self, tmp_path, make_panel):
        """Binary files restore the values bit for bit."""
        from spherical_cusum.panel_io import read_panel, write_panel

        panel = make_panel(4, 9, seed=22)
        assert write_panel(panel, tmp_path / "p.bpanel") == [tmp_path / "p.bpanel"]
        again = read_panel(tmp_path / "p.bpanel")
        assert again.values.tobytes() == panel.values.tobytes()

    def test_layout(self, tmp_path, make_panel):
        """24-byte little-endian header followed by row-major float64."""
        from spherical_cusum.panel_io import write_panel_binary

        panel = make_panel(1, 3, seed=23)
        write_panel_binary(panel, tmp_path / "p.bpanel")
        data = (tmp_path / "p.bpanel").read_bytes()
        assert data[:8] == b"SCPANEL\x00"
        assert int.from_bytes(data[8:12], "little") == 1
        assert int.from_bytes(data[12:16], "little") == 1
        assert int.from_bytes(data[16:20], "little") == 3
        assert len(data) == 24 + 8 * 4 * 3
        assert np.frombuffer(data[24:32], dtype="<f8")[0] == panel.values[0, 0]

    @pytest.mark.parametrize(
        "mutate, message",
        [
            (lambda b: b"XXPANEL\x00" + b[8:], "magic"),
            (lambda b: b[:8] + (7).to_bytes(4, "little") + b[12:], "version"),
            (lambda b: b[:-8], "payload bytes"),
            (lambda b: b[:10], "shorter"),
        ],
    )
    def test_corrupt_files(self, tmp_path, make_panel, mutate, message):
        """Corrupted headers and payloads raise SchemaError."""
        from spherical_cusum.errors import SchemaError
        from spherical_cusum.panel_io import read_panel_binary, write_panel_binary

        path = tmp_path / "p.bpanel"
        write_panel_binary(make_panel(2, 4), path)
        path.write_bytes(mutate(path.read_bytes()))
        with pytest.raises(SchemaError, match=message):
            read_panel_binary(path)


class TestOtherFiles:
    """Surfaces, tables, zonal series and JSON helpers."""

    def test_surface_files(self, tmp_path, make_panel):
        """Matrix CSV plus metadata with the sup."""
        import pandas as pd

        from spherical_cusum.cusum import statistic_surface, sup_statistic
        from spherical_cusum.panel_io import write_surface

        surface = statistic_surface(make_panel(3, 12, seed=24), lmin=1, grid_r=4, grid_s=6)
        meta_path = write_surface(surface, tmp_path / "surface.csv")
        frame = pd.read_csv(tmp_path / "surface.csv", float_precision="round_trip")
        assert list(frame.columns) == ["j"] + [f"s{k}" for k in range(7)]
        assert np.array_equal(frame.drop(columns="j").to_numpy(), surface.values)
        meta = json.loads(meta_path.read_text())
        validate_schema(meta, "surface_meta")
        assert meta["sup"] == sup_statistic(surface)
        assert meta["lmin"] == 1

    def test_quantile_table_file(self, tmp_path, reference_table):
        """Tables are written as schema-valid JSON and read back by config."""
        from spherical_cusum.config import load_quantile_table
        from spherical_cusum.panel_io import write_quantile_table

        write_quantile_table(reference_table, tmp_path / "q.json")
        validate_schema(json.loads((tmp_path / "q.json").read_text()), "quantile_table")
        assert load_quantile_table(tmp_path / "q.json") == reference_table

    def test_zonal_csv(self, tmp_path, make_panel):
        """Columns t, ell_2, ell_4."""
        import pandas as pd

        from spherical_cusum.fields import zonal_series
        from spherical_cusum.panel_io import write_zonal_csv

        panel = make_panel(4, 5, seed=25)
        write_zonal_csv(zonal_series(panel, [2, 4]), tmp_path / "zonal.csv")
        frame = pd.read_csv(tmp_path / "zonal.csv")
        assert list(frame.columns) == ["t", "ell_2", "ell_4"]
        assert frame["t"].tolist() == [1, 2, 3, 4, 5]

    def test_json_is_deterministic(self, tmp_path):
        """Sorted keys and a trailing newline."""
        from spherical_cusum.panel_io import read_json, write_json

        write_json({"b": 1, "a": [1, 2]}, tmp_path / "x.json")
        text = (tmp_path / "x.json").read_text()
        assert text.endswith("\n")
        assert text.index('"a"') < text.index('"b"')
        assert read_json(tmp_path / "x.json") == {"a": [1, 2], "b": 1}

    def test_invalid_json_location(self, tmp_path):
        """Parse errors report line and column."""
        from spherical_cusum.errors import SchemaError
        from spherical_cusum.panel_io import read_json

        (tmp_path / "bad.json").write_text('{\n  "a": }\n')
        with pytest.raises(SchemaError, match="line 2 column"):
            read_json(tmp_path / "bad.json")


class TestManifest:
    """RunManifest and RecordWriter."""

    def test_manifest_beside_output(self, tmp_path):
        """<stem>.manifest.json with command, seed and outputs."""
        from spherical_cusum import __version__
        from spherical_cusum.manifest import RunManifest

        path = RunManifest("quantiles", {"grid": 10}, seed=3, wall_time=0.5,
                           outputs=[str(tmp_path / "q.json")]).write(tmp_path / "q.json")
        assert path == tmp_path / "q.manifest.json"
        payload = json.loads(path.read_text())
        validate_schema(payload, "manifest")
        assert payload["version"] == __version__
        assert payload["parameters"] == {"grid": 10}

    def test_record_writer(self, tmp_path):
        """One JSON object per line with defaults filled in."""
        from spherical_cusum.manifest import RecordWriter

        with RecordWriter(tmp_path / "events.jsonl", run_id="abc") as writer:
            writer.write({"event_type": "partial_year_dropped", "year": 2011})
            writer.write({"note": "x"})
        lines = [json.loads(line) for line in (tmp_path / "events.jsonl").read_text().splitlines()]
        assert [r["event_type"] for r in lines] == ["partial_year_dropped", "record"]
        assert all(r["run_id"] == "abc" and "timestamp" in r for r in lines)

    def test_record_writer_requires_context(self, tmp_path):
        """Writing outside the with-block is a programming error."""
        from spherical_cusum.manifest import RecordWriter

        with pytest.raises(RuntimeError):
            RecordWriter(tmp_path / "e.jsonl").write({})
