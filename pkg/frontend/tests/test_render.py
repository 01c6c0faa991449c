"""Tests of the figure renderer against the shipped sample CSVs."""

import json
import shutil
from pathlib import Path

import pytest

from giantatom_figures import FigureSpecError, render_spec
from giantatom_figures.io import check_consistent_modes, read_csv

SAMPLES = Path(__file__).resolve().parents[1] / "samples"
SPEC = SAMPLES / "figures.json"


class TestRenderSpec:
    def test_all_five_layouts_render_png_and_svg(self, tmp_path):
        written = render_spec(SPEC, tmp_path)
        names = sorted(p.name for p in written)
        expected = sorted(
            f"{stem}.{ext}"
            for stem in ("spectra", "coincidence2", "coincidence3",
                         "detuning_map", "pole_table")
            for ext in ("png", "svg"))
        assert names == expected
        for p in written:
            assert p.stat().st_size > 0

    def test_svg_rerender_is_byte_stable(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        render_spec(SPEC, a)
        render_spec(SPEC, b)
        for svg in sorted(a.glob("*.svg")):
            assert (b / svg.name).read_bytes() == svg.read_bytes()

    def test_missing_csv_reported_with_path(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"figures": [
            {"name": "x", "layout": "pole_table", "csv": "absent.csv"}]}))
        with pytest.raises(FigureSpecError, match="absent.csv"):
            render_spec(spec, tmp_path)

    def test_empty_csv_rejected(self, tmp_path):
        (tmp_path / "empty.csv").write_text("re_k,im_k,residual\n")
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"figures": [
            {"name": "x", "layout": "pole_table", "csv": "empty.csv"}]}))
        with pytest.raises(FigureSpecError, match="no data rows"):
            render_spec(spec, tmp_path)

    def test_unknown_layout_rejected(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"figures": [
            {"name": "x", "layout": "sparkline"}]}))
        with pytest.raises(FigureSpecError):
            render_spec(spec, tmp_path)

    def test_invalid_spec_json_rejected(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text("{broken")
        with pytest.raises(FigureSpecError):
            render_spec(spec, tmp_path)

    def test_mixed_modes_rejected(self, tmp_path):
        for name in ("spectrum_g09", "spectrum_g06"):
            shutil.copy(SAMPLES / f"{name}.csv", tmp_path)
            shutil.copy(SAMPLES / f"{name}.meta.json", tmp_path)
        meta = tmp_path / "spectrum_g06.meta.json"
        body = json.loads(meta.read_text())
        body["mode"] = "exact"
        meta.write_text(json.dumps(body))
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"figures": [
            {"name": "s", "layout": "spectrum_overlay", "inputs": [
                {"csv": "spectrum_g09.csv"}, {"csv": "spectrum_g06.csv"}]}]}))
        with pytest.raises(FigureSpecError, match="mix"):
            render_spec(spec, tmp_path)


class TestIO:
    def test_read_csv_parses_columns(self):
        cols = read_csv(SAMPLES / "poles_d1.csv")
        assert set(cols) == {"re_k", "im_k", "residual"}
        assert all(len(v) == len(cols["re_k"]) for v in cols.values())

    def test_consistent_modes_pass_on_samples(self):
        check_consistent_modes([SAMPLES / "spectrum_g09.csv",
                                SAMPLES / "spectrum_g06.csv"])
