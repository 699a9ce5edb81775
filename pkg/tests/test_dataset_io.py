import numpy as np
import pytest
from PIL import Image

from spxseg.dataset_io import (
    DatasetManifest,
    format_summary_table,
    parse_labelmap_png,
    parse_seg,
    run_dataset,
    write_per_image_csv,
    write_report_jsonl,
)
from spxseg.labelmap import LabelMap, save_labelmap_png
from spxseg.pipeline import PipelineConfig

from conftest import quadrant_image


def _write_seg(path, width, height, rows, header_extra=()):
    lines = ["format ascii cr", f"width {width}", f"height {height}"]
    lines.extend(header_extra)
    lines.append("data")
    lines.extend(f"{s} {r} {c1} {c2}" for s, r, c1, c2 in rows)
    path.write_text("\n".join(lines) + "\n")


class TestParseSeg:
    def test_two_row_example(self, tmp_path):
        p = tmp_path / "a.seg"
        _write_seg(p, 2, 2, [(0, 0, 0, 1), (1, 1, 0, 1)])
        lm = parse_seg(p)
        assert lm.num_labels == 2
        assert lm.labels[0].tolist() == [0, 0]
        assert lm.labels[1].tolist() == [1, 1]

    def test_missing_row_is_partition_error(self, tmp_path):
        p = tmp_path / "b.seg"
        _write_seg(p, 2, 2, [(0, 0, 0, 1)])
        with pytest.raises(ValueError, match="not covered"):
            parse_seg(p)

    def test_overlap_rejected(self, tmp_path):
        p = tmp_path / "c.seg"
        _write_seg(p, 2, 1, [(0, 0, 0, 1), (1, 0, 1, 1)])
        with pytest.raises(ValueError, match="overlap"):
            parse_seg(p)

    def test_out_of_range_rejected(self, tmp_path):
        p = tmp_path / "d.seg"
        _write_seg(p, 2, 2, [(0, 0, 0, 2), (1, 1, 0, 1)])
        with pytest.raises(ValueError, match="out of range"):
            parse_seg(p)

    def test_header_missing_dims(self, tmp_path):
        p = tmp_path / "e.seg"
        p.write_text("format ascii cr\ndata\n0 0 0 1\n")
        with pytest.raises(ValueError, match="header"):
            parse_seg(p)

    def test_missing_data_section(self, tmp_path):
        p = tmp_path / "f.seg"
        p.write_text("width 2\nheight 1\n")
        with pytest.raises(ValueError, match="data"):
            parse_seg(p)

    def test_segment_count_matches_header_on_bsds_style_file(self, tmp_path, rng):
        # build a synthetic annotation the way the BSDS files are laid out:
        # run-length rows per image row, ids re-used across rows
        h, w, segs = 12, 16, 4
        labels = rng.integers(0, segs, size=(h, 1)).repeat(w, axis=1)
        for s in range(segs):  # make sure every segment id occurs
            labels[s % h, :] = s
        rows = [(int(labels[r, 0]), r, 0, w - 1) for r in range(h)]
        p = tmp_path / "real.seg"
        _write_seg(p, w, h, rows, header_extra=[f"segments {segs}", "gray 0"])
        lm = parse_seg(p)
        assert lm.num_labels == segs

    def test_labels_densified(self, tmp_path):
        p = tmp_path / "g.seg"
        _write_seg(p, 2, 2, [(5, 0, 0, 1), (9, 1, 0, 1)])
        lm = parse_seg(p)
        assert lm.num_labels == 2
        assert set(np.unique(lm.labels)) == {0, 1}


class TestParseLabelmapPng:
    def test_all_zero_single_region(self, tmp_path):
        p = tmp_path / "zero.png"
        Image.fromarray(np.zeros((6, 6), dtype=np.uint16)).save(p)
        lm = parse_labelmap_png(p)
        assert lm.num_labels == 1

    def test_roundtrip_identity(self, tmp_path, rng):
        arr = rng.integers(0, 40, size=(9, 11))
        uniq, inverse = np.unique(arr, return_inverse=True)
        lm = LabelMap(inverse.reshape(9, 11).astype(np.int32), int(uniq.size))
        p = tmp_path / "rt.png"
        save_labelmap_png(lm, p)
        back = parse_labelmap_png(p)
        assert np.array_equal(back.labels, lm.labels)

    def test_disconnected_gt_accepted(self, tmp_path):
        arr = np.array([[0, 1, 0], [1, 1, 1]], dtype=np.uint16)
        p = tmp_path / "disc.png"
        Image.fromarray(arr).save(p)
        lm = parse_labelmap_png(p)
        assert lm.num_labels == 2


class TestManifest:
    def _setup(self, tmp_path, n=2):
        paths = []
        for i in range(n):
            img, gt = quadrant_image(size=48, seed=i)
            ip = tmp_path / f"img{i}.png"
            gp = tmp_path / f"gt{i}.png"
            Image.fromarray(img, mode="RGB").save(ip)
            save_labelmap_png(gt, gp)
            paths.append((ip.name, gp.name))
        manifest = tmp_path / "manifest.tsv"
        manifest.write_text("".join(f"{i}\t{g}\n" for i, g in paths))
        return manifest

    def test_load(self, tmp_path):
        mpath = self._setup(tmp_path)
        m = DatasetManifest.load(mpath)
        assert len(m.entries) == 2
        assert all(len(gts) == 1 for _, gts in m.entries)

    def test_empty_rejected(self, tmp_path):
        p = tmp_path / "empty.tsv"
        p.write_text("# nothing here\n")
        with pytest.raises(ValueError, match="empty"):
            DatasetManifest.load(p)

    def test_missing_paths_rejected(self, tmp_path):
        p = tmp_path / "bad.tsv"
        p.write_text("nope.png\talso_nope.png\n")
        with pytest.raises(FileNotFoundError):
            DatasetManifest.load(p)

    def test_entry_without_gt_rejected(self, tmp_path):
        img, _ = quadrant_image(size=16, seed=0)
        ip = tmp_path / "img.png"
        Image.fromarray(img, mode="RGB").save(ip)
        p = tmp_path / "nogt.tsv"
        p.write_text(f"{ip.name}\t\n")
        with pytest.raises(ValueError):
            DatasetManifest.load(p)


class TestRunDataset:
    def test_self_evaluation_is_perfect(self, tmp_path):
        """Feeding the pipeline's own output back as ground truth: PRI 1,
        VoI 0, BDE 0, GCE 0."""
        from spxseg.pipeline import segment_array

        img, _ = quadrant_image(size=64, seed=1)
        config = PipelineConfig(k=40)
        out = segment_array(img, config)

        ip = tmp_path / "img.png"
        gp = tmp_path / "own.png"
        Image.fromarray(img, mode="RGB").save(ip)
        save_labelmap_png(out.labelmap, gp)
        mp = tmp_path / "m.tsv"
        mp.write_text(f"{ip.name}\t{gp.name}\n")

        summary = run_dataset(DatasetManifest.load(mp), config)
        assert not summary.failures
        rep = summary.results[0].report
        assert rep.pri == pytest.approx(1.0)
        assert rep.voi == pytest.approx(0.0, abs=1e-12)
        assert rep.bde == pytest.approx(0.0)
        assert rep.gce == pytest.approx(0.0, abs=1e-12)

    def test_failures_recorded_not_raised(self, tmp_path):
        img, gt = quadrant_image(size=48, seed=0)
        ip = tmp_path / "img.png"
        gp = tmp_path / "gt.png"
        Image.fromarray(img, mode="RGB").save(ip)
        save_labelmap_png(gt, gp)
        # second entry: corrupt image, must be recorded and skipped
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"\x89PNG\r\n\x1a\nnot really")
        mp = tmp_path / "m.tsv"
        mp.write_text(f"{ip.name}\t{gp.name}\n{bad.name}\t{gp.name}\n")

        summary = run_dataset(DatasetManifest.load(mp), PipelineConfig(k=30))
        assert len(summary.ok) == 1
        assert len(summary.failures) == 1
        assert summary.failures[0].error

    def test_outputs_and_determinism(self, tmp_path):
        img, gt = quadrant_image(size=48, seed=3)
        ip = tmp_path / "img.png"
        gp = tmp_path / "gt.png"
        Image.fromarray(img, mode="RGB").save(ip)
        save_labelmap_png(gt, gp)
        mp = tmp_path / "m.tsv"
        mp.write_text(f"{ip.name}\t{gp.name}\n")
        manifest = DatasetManifest.load(mp)
        config = PipelineConfig(k=30)

        s1 = run_dataset(manifest, config)
        s2 = run_dataset(manifest, config)

        def stripped_csv(summary, path):
            write_per_image_csv(summary, path)
            # wall_time_ms is the only legitimately varying column
            return [",".join(l.split(",")[:-1]) for l in path.read_text().splitlines()]

        assert stripped_csv(s1, tmp_path / "a.csv") == stripped_csv(s2, tmp_path / "b.csv")

        write_report_jsonl(s1, tmp_path / "r.jsonl")
        assert (tmp_path / "r.jsonl").read_text().count("\n") == 1
        table = format_summary_table(s1)
        assert "PRI" in table and "mean" in table
