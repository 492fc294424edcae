import numpy as np
import pytest

from citymorph import (
    GridFormatError,
    ManifestError,
    SettlementRaster,
    load_manifest,
    load_raster,
    save_raster,
)
from conftest import make_raster, random_raster


def write_grid(path, body, ncols=4, nrows=4, cellsize=43.0, nodata=None):
    lines = [f"ncols {ncols}", f"nrows {nrows}", "xllcorner 0.0", "yllcorner 0.0",
             f"cellsize {cellsize}"]
    if nodata is not None:
        lines.append(f"NODATA_value {nodata}")
    lines.append(body)
    path.write_text("\n".join(lines) + "\n")
    return path


class TestLoadRaster:
    def test_empty_scene(self, tmp_path):
        path = write_grid(tmp_path / "empty.asc", "\n".join("0 0 0 0" for _ in range(4)))
        raster = load_raster(path)
        assert raster.occupied_count == 0
        assert raster.width == raster.height == 4
        assert raster.cell_size == 43.0
        assert raster.origin_id == "empty"

    def test_paper_scale_scene_extent(self, tmp_path):
        body = "\n".join(" ".join("1" for _ in range(256)) for _ in range(256))
        path = write_grid(tmp_path / "big.asc", body, ncols=256, nrows=256, cellsize=43.0)
        raster = load_raster(path)
        side_km = raster.width * raster.cell_size / 1000.0
        assert side_km == pytest.approx(11.0, abs=0.05)
        assert raster.extent_km2 == pytest.approx(side_km**2)

    def test_rejects_non_binary_value_with_location(self, tmp_path):
        path = write_grid(tmp_path / "bad.asc", "0 0 0 0\n0 0 7 0\n0 0 0 0\n0 0 0 0")
        with pytest.raises(GridFormatError, match=r"row 1, column 2"):
            load_raster(path)

    def test_nodata_maps_to_zero(self, tmp_path):
        path = write_grid(tmp_path / "nd.asc", "1 -9999 0 1\n0 0 0 0\n0 0 0 0\n0 0 1 -9999",
                          nodata=-9999)
        raster = load_raster(path)
        assert raster.occupied_count == 3
        assert set(np.unique(raster.cells)) <= {0, 1}

    def test_occupancy_count_preserved(self, tmp_path, rng):
        for trial in range(5):
            cells = (rng.random((6, 5)) < 0.4).astype(int)
            body = "\n".join(" ".join(str(v) for v in row) for row in cells)
            path = write_grid(tmp_path / f"occ{trial}.asc", body, ncols=5, nrows=6)
            raster = load_raster(path)
            assert raster.occupied_count == cells.sum()

    def test_missing_cellsize_refused(self, tmp_path):
        path = tmp_path / "nocs.asc"
        path.write_text("ncols 2\nnrows 2\n1 0\n0 1\n")
        with pytest.raises(GridFormatError, match="cellsize"):
            load_raster(path)

    def test_dimension_mismatch(self, tmp_path):
        path = write_grid(tmp_path / "short.asc", "0 0 0 0\n0 1 1 0")
        with pytest.raises(GridFormatError, match="expected 16 cell values"):
            load_raster(path)

    def test_unparseable_cell(self, tmp_path):
        path = write_grid(tmp_path / "junk.asc", "0 0 0 0\n0 zero 0 0\n0 0 0 0\n0 0 0 0")
        with pytest.raises(GridFormatError, match="row 1, column 1"):
            load_raster(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "void.asc"
        path.write_text("")
        with pytest.raises(GridFormatError, match="empty"):
            load_raster(path)


class TestSaveRaster:
    def test_round_trip_small(self, tmp_path):
        raster = make_raster([[0, 1, 0, 0], [1, 1, 0, 0], [0, 0, 0, 1], [0, 0, 0, 0]],
                             origin_id="rt")
        save_raster(raster, tmp_path / "rt.asc")
        loaded = load_raster(tmp_path / "rt.asc")
        assert np.array_equal(loaded.cells, raster.cells)
        assert loaded.origin_id == raster.origin_id

    def test_round_trip_preserves_cell_size_exactly(self, tmp_path):
        raster = make_raster([[1]], cell_size=43.0, origin_id="cs")
        save_raster(raster, tmp_path / "cs.asc")
        assert load_raster(tmp_path / "cs.asc").cell_size == 43.0
        # a cell size with a non-terminating decimal expansion survives too
        odd = make_raster([[1]], cell_size=10.0 / 3.0, origin_id="odd")
        save_raster(odd, tmp_path / "odd.asc")
        assert load_raster(tmp_path / "odd.asc").cell_size == 10.0 / 3.0

    def test_round_trip_random_rasters(self, tmp_path, rng):
        for trial in range(10):
            raster = random_raster(rng, 256, 256, density=rng.random(), origin_id=f"r{trial}")
            save_raster(raster, tmp_path / f"r{trial}.asc")
            loaded = load_raster(tmp_path / f"r{trial}.asc")
            assert np.array_equal(loaded.cells, raster.cells)
            assert loaded.cell_size == raster.cell_size
            assert (loaded.width, loaded.height) == (raster.width, raster.height)


class TestSettlementRasterInvariants:
    def test_rejects_non_binary_cells(self):
        with pytest.raises(ValueError, match="0 or 1"):
            make_raster([[0, 2], [1, 0]])

    def test_rejects_bad_dimensions(self):
        with pytest.raises(ValueError):
            SettlementRaster(width=0, height=1, cell_size=1.0, origin_id="x",
                             cells=np.zeros((1, 0), dtype=np.uint8))
        with pytest.raises(ValueError):
            make_raster([[0, 1]], cell_size=-5.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            SettlementRaster(width=3, height=2, cell_size=1.0, origin_id="x",
                             cells=np.zeros((2, 2), dtype=np.uint8))

    def test_cells_immutable(self):
        raster = make_raster([[0, 1], [1, 0]])
        with pytest.raises(ValueError):
            raster.cells[0, 0] = 1


class TestManifest:
    def _raster_file(self, tmp_path, name="a.asc"):
        raster = make_raster([[1, 0], [0, 1]])
        save_raster(raster, tmp_path / name)
        return name

    def test_three_rows_in_order(self, tmp_path):
        name = self._raster_file(tmp_path)
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "city_id,raster_path,road_path,population,area_km2\n"
            f"G1,{name},,,\n"
            f"G2,{name},,50000,\n"
            f"G3,{name},,,108.4\n"
        )
        loaded = load_manifest(manifest)
        assert [e.city_id for e in loaded] == ["G1", "G2", "G3"]
        assert loaded.entries[0].population is None
        assert loaded.entries[1].population == 50000
        assert loaded.entries[2].area_km2 == 108.4

    def test_duplicate_id_rejected(self, tmp_path):
        name = self._raster_file(tmp_path)
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "city_id,raster_path,road_path,population,area_km2\n"
            f"G1,{name},,,\nG1,{name},,,\n"
        )
        with pytest.raises(ManifestError, match="'G1'"):
            load_manifest(manifest)

    def test_missing_raster_rejected(self, tmp_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "city_id,raster_path,road_path,population,area_km2\nG1,ghost.asc,,,\n"
        )
        with pytest.raises(ManifestError, match="row 2"):
            load_manifest(manifest)

    def test_bad_population_reports_row(self, tmp_path):
        name = self._raster_file(tmp_path)
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "city_id,raster_path,road_path,population,area_km2\n"
            f"G1,{name},,,\nG2,{name},,many,\n"
        )
        with pytest.raises(ManifestError, match="row 3"):
            load_manifest(manifest)

    def test_corpus_scale_manifest(self, tmp_path):
        name = self._raster_file(tmp_path)
        rows = ["city_id,raster_path,road_path,population,area_km2"]
        rows += [f"C{i:03d},{name},,," for i in range(503)]
        manifest = tmp_path / "m.csv"
        manifest.write_text("\n".join(rows) + "\n")
        assert len(load_manifest(manifest)) == 503
