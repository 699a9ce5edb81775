import numpy as np
import pytest
from PIL import Image

from spxseg.merge_engine import labelmap_at
from spxseg.pipeline import PipelineConfig, segment_array, segment_image
from spxseg.render import overlay_boundaries, save_metrics_figure, save_progress_figure, save_sweep_figure

from conftest import quadrant_image


class TestConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        cfg.validate()
        assert cfg.k == 600
        assert cfg.m == 10.0
        assert cfg.s0 == 0.4
        assert cfg.sigma == 0.5
        assert cfg.gamma_decay == 0.95
        assert cfg.canny_sigma == 1.4

    @pytest.mark.parametrize(
        "kw",
        [
            {"k": 0},
            {"m": -1.0},
            {"s0": 0.0},
            {"s0": 1.5},
            {"sigma": 0.0},
            {"gamma_decay": 1.0},
            {"canny_sigma": 0.0},
            {"canny_low": 5.0, "canny_high": 1.0},
        ],
    )
    def test_invalid_rejected(self, kw):
        with pytest.raises(ValueError):
            PipelineConfig(**kw).validate()

    def test_to_dict_roundtrip(self):
        d = PipelineConfig(k=42).to_dict()
        assert d["k"] == 42
        assert "gamma_decay" in d


class TestSegment:
    def test_output_contract(self):
        img, _ = quadrant_image(size=64, seed=4)
        out = segment_array(img, PipelineConfig(k=40))
        assert out.labelmap.shape == (64, 64)
        assert out.superpixels.num_labels >= out.labelmap.num_labels
        assert out.contours.dtype == bool
        assert len(out.features) == out.superpixels.num_labels
        assert out.merge.initial.num_labels == out.superpixels.num_labels
        # the hierarchy replays to the final map
        final = labelmap_at(out.merge, out.merge.iterations)
        assert np.array_equal(final.labels, out.labelmap.labels)

    def test_segment_image_from_file(self, tmp_path):
        img, _ = quadrant_image(size=48, seed=6)
        p = tmp_path / "img.png"
        Image.fromarray(img, mode="RGB").save(p)
        out = segment_image(p, PipelineConfig(k=30))
        assert out.labelmap.shape == (48, 48)


class TestRender:
    def test_overlay_marks_boundaries(self):
        img, gt = quadrant_image(size=32, seed=0)
        over = overlay_boundaries(img, gt)
        assert over.shape == img.shape
        assert (over != img).any()

    def test_figures_written(self, tmp_path):
        rows = [(100, 0.8, 0.9, 0.1, 0.08), (200, 0.85, 0.95, 0.09, 0.07)]
        save_sweep_figure(rows, tmp_path / "sweep.png")
        assert (tmp_path / "sweep.png").stat().st_size > 0

        from spxseg.merge_engine import IterationStats

        stats = [IterationStats(i, 1.0 - 0.05 * i, 3, 2, 0, 50 - i) for i in range(5)]
        save_progress_figure(stats, tmp_path / "prog.png")
        assert (tmp_path / "prog.png").stat().st_size > 0

    def test_metrics_figure(self, tmp_path):
        img, gt = quadrant_image(size=48, seed=1)
        from spxseg.dataset_io import DatasetManifest, run_dataset
        from spxseg.labelmap import save_labelmap_png

        ip = tmp_path / "i.png"
        gp = tmp_path / "g.png"
        Image.fromarray(img, mode="RGB").save(ip)
        save_labelmap_png(gt, gp)
        mp = tmp_path / "m.tsv"
        mp.write_text(f"{ip.name}\t{gp.name}\n")
        summary = run_dataset(DatasetManifest.load(mp), PipelineConfig(k=30))
        save_metrics_figure(summary, tmp_path / "metrics.png")
        assert (tmp_path / "metrics.png").stat().st_size > 0
