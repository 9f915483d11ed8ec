import dataclasses
import math

import numpy as np
import pytest

from tatedoc import (
    Category,
    NoiseSpec,
    PageSpec,
    PageType,
    Rect,
    RegionClass,
    RowSpec,
    binarize,
    build_layout,
    classifier_samples,
    default_page_spec,
    generate_corpus,
    generate_page,
    hard_noise_preset,
    index_page_spec,
    inject_noise,
    text_region_spec,
    title_region_spec,
)
from tatedoc.errors import InfeasibleSpec
from tatedoc.synth import BACKGROUND, CRACK_VALUE, INK, STAIN_VALUE


class TestRegionSpecs:
    def test_text_region_dimensions(self):
        spec = text_region_spec()
        assert spec.width == 10 * 2 + 9 * 6  # 10 columns, 2-px strokes, 6-px gaps
        assert spec.ink_height(380) == 13 * 28 - 6  # 13 segments of pitch 28

    def test_title_region_dimensions(self):
        spec = title_region_spec()
        title_w = 8 * 5 + 7 * 3
        subtitle_w = 6 * 5 + 5 * 3
        assert spec.width == title_w + 10 + subtitle_w
        assert spec.ink_height(380) == 10 * 36 - 6

    def test_title_without_subtitle(self):
        spec = title_region_spec(subtitle_columns=None)
        assert spec.width == 8 * 5 + 7 * 3

    def test_row_too_short_for_one_segment(self):
        with pytest.raises(InfeasibleSpec):
            text_region_spec().ink_height(10)


class TestBuildLayout:
    def test_default_page_structure(self):
        lay = build_layout(default_page_spec(seed=0))
        by_cat = {}
        for el in lay.elements:
            by_cat[el.category] = by_cat.get(el.category, 0) + 1
        assert by_cat == {
            Category.PAGE_FRAME: 1,
            Category.ROW: 5,
            Category.TEXT_REGION: 30,
            Category.TITLE_REGION: 20,
            Category.TITLE: 20,
            Category.SUBTITLE: 15,
        }
        assert len(lay.elements) == 91
        assert lay.image_size == (1600, 2400)
        assert lay.file_name == "page-000000.png"

    def test_frame_rect_is_rectified_extent(self):
        lay = build_layout(default_page_spec(seed=1))
        assert lay.frame().rect == Rect(0, 0, 1420, 2200)
        assert lay.frame().quad.corners[0] == (80, 100)

    def test_rows_fill_content_band_exactly(self):
        lay = build_layout(default_page_spec(seed=2))
        rows = sorted(
            (el for el in lay.elements if el.category == Category.ROW),
            key=lambda e: e.rect.y,
        )
        assert len(rows) == 5
        assert rows[0].rect.y == 28  # border + pad inside the frame
        for above, below in zip(rows, rows[1:]):
            assert below.rect.y - above.rect.y == 380 + 61

    def test_construction_order_is_reading_order(self):
        lay = build_layout(default_page_spec(seed=3))
        for el in lay.elements:
            sibs = sorted(
                (e for e in lay.elements if e.parent == el.parent),
                key=lambda e: e.id,
            )
            for order, sib in enumerate(sibs):
                assert sib.reading_order == order

    def test_rotation_moves_quad_not_rects(self):
        flat = build_layout(default_page_spec(seed=4))
        tilted = build_layout(default_page_spec(seed=4, rotation=2.0))
        assert flat.frame().rect == tilted.frame().rect
        assert [e.rect for e in flat.elements] == [e.rect for e in tilted.elements]
        assert flat.frame().quad != tilted.frame().quad
        # rotation preserves corner distances about the scan center
        for p in tilted.frame().quad.corners:
            q_dists = math.hypot(p.x - 800, p.y - 1200)
            assert any(
                math.isclose(q_dists, math.hypot(f.x - 800, f.y - 1200), rel_tol=1e-9)
                for f in flat.frame().quad.corners
            )

    def test_rotation_cap(self):
        with pytest.raises(InfeasibleSpec):
            default_page_spec(seed=0, rotation=5.1)
        # the cap itself is allowed
        build_layout(default_page_spec(seed=0, rotation=5.0))

    def test_overstuffed_row_is_infeasible(self):
        spec = default_page_spec(seed=0)
        fat = RowSpec(regions=tuple(text_region_spec() for _ in range(20)))
        with pytest.raises(InfeasibleSpec):
            build_layout(dataclasses.replace(spec, rows=(fat,) + spec.rows[1:]))

    def test_too_many_rows_is_infeasible(self):
        spec = default_page_spec(seed=0)
        with pytest.raises(InfeasibleSpec):
            build_layout(dataclasses.replace(spec, rows=spec.rows * 2))

    def test_explicit_gaps_must_match_region_count(self):
        spec = default_page_spec(seed=0)
        bad = RowSpec(regions=tuple(text_region_spec() for _ in range(4)), gaps=(44, 44))
        with pytest.raises(InfeasibleSpec):
            build_layout(dataclasses.replace(spec, rows=(bad,) + spec.rows[1:]))


class TestGeneratePage:
    def test_deterministic_per_spec(self):
        a_img, a_lay = generate_page(default_page_spec(seed=6, rotation=1.0))
        b_img, b_lay = generate_page(default_page_spec(seed=6, rotation=1.0))
        assert np.array_equal(a_img, b_img)
        assert a_lay == b_lay

    def test_different_seeds_differ(self):
        a_img, _ = generate_page(default_page_spec(seed=1))
        b_img, _ = generate_page(default_page_spec(seed=2))
        assert not np.array_equal(a_img, b_img)

    def test_unrotated_ink_lies_inside_frame(self):
        img, lay = generate_page(default_page_spec(seed=0))
        ink = binarize(img, 128)
        ys, xs = np.nonzero(ink)
        assert xs.min() >= 80 and xs.max() < 1500
        assert ys.min() >= 100 and ys.max() < 2300

    def test_region_rects_match_rendered_ink(self):
        img, lay = generate_page(default_page_spec(seed=5))
        ink = binarize(img, 128)
        for el in lay.elements:
            if el.category not in (Category.TEXT_REGION, Category.TITLE_REGION):
                continue
            # ground-truth rects are frame-relative; the scan is offset by the frame
            r = el.rect
            crop = ink[
                int(r.y) + 100 : int(r.y2) + 100, int(r.x) + 80 : int(r.x2) + 80
            ]
            assert crop.any()
            assert crop[0].any() and crop[-1].any()   # tight vertically
            assert crop[:, 0].any() and crop[:, -1].any()

    def test_rotated_page_is_warp_of_flat_page(self):
        from tatedoc import AffineMap, warp

        flat_img, _ = generate_page(default_page_spec(seed=7))
        rot_img, _ = generate_page(default_page_spec(seed=7, rotation=3.0))
        expect = warp(
            binarize(flat_img, 128), AffineMap.rotation_deg(3.0, 800, 1200), 1600, 2400
        )
        assert np.array_equal(binarize(rot_img, 128), expect)


class TestInjectNoise:
    def _blank(self):
        return np.full((400, 400), BACKGROUND, dtype=np.uint8)

    def test_no_specs_is_identity(self):
        img, _ = generate_page(default_page_spec(seed=0))
        assert np.array_equal(inject_noise(img, []), img)

    def test_stain_area_matches_disc(self):
        img = inject_noise(self._blank(), [NoiseSpec("stain", 200, 200, 14)])
        stained = int((img == STAIN_VALUE).sum())
        assert abs(stained - math.pi * 14**2) < 0.01 * math.pi * 14**2

    def test_hole_erases_ink(self):
        img = self._blank()
        img[:, :] = INK
        holed = inject_noise(img, [NoiseSpec("hole", 100, 100, 10)])
        assert holed[100, 100] == BACKGROUND
        assert (holed == BACKGROUND).sum() == (
            inject_noise(self._blank(), [NoiseSpec("stain", 100, 100, 10)]) == STAIN_VALUE
        ).sum()

    def test_crack_is_thin_dark_polyline(self):
        img = inject_noise(self._blank(), [NoiseSpec("crack", 200, 100, 40)])
        dark = img == CRACK_VALUE
        assert dark.sum() == 40 * 2  # 2-px wide, one step per row
        rows = np.flatnonzero(dark.any(axis=1))
        assert list(rows) == list(range(100, 140))
        xs = np.nonzero(dark)[1]
        assert xs.min() >= 200 - 7 and xs.max() <= 200 + 7  # bounded wander

    def test_crack_deterministic(self):
        a = inject_noise(self._blank(), [NoiseSpec("crack", 180, 50, 30)])
        b = inject_noise(self._blank(), [NoiseSpec("crack", 180, 50, 30)])
        assert np.array_equal(a, b)

    def test_clipping_at_borders(self):
        img = inject_noise(self._blank(), [NoiseSpec("stain", 2, 2, 12)])
        assert img.shape == (400, 400)
        assert img[0, 0] == STAIN_VALUE

    def test_input_not_mutated(self):
        img = self._blank()
        inject_noise(img, [NoiseSpec("stain", 50, 50, 8)])
        assert (img == BACKGROUND).all()

    @pytest.mark.parametrize(
        "kind,magnitude", [("stain", 17), ("hole", 13), ("crack", 51), ("stain", 0)]
    )
    def test_magnitude_caps(self, kind, magnitude):
        with pytest.raises(ValueError):
            NoiseSpec(kind, 10, 10, magnitude)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec("smudge", 1, 1, 5)


def test_hard_noise_preset_composition():
    spec = default_page_spec(seed=0)
    noise = hard_noise_preset(spec, seed=3)
    kinds = [n.kind for n in noise]
    assert kinds == ["stain", "stain", "hole", "hole", "crack", "crack"]
    assert noise == hard_noise_preset(spec, seed=3)
    assert noise != hard_noise_preset(spec, seed=4)
    # placements stay strictly inside distinct text regions
    lay = build_layout(spec)
    texts = [
        el.rect.shifted(80, 100)
        for el in lay.elements
        if el.category == Category.TEXT_REGION
    ]
    homes = []
    for n in noise:
        home = [i for i, r in enumerate(texts) if r.x <= n.x < r.x2 and r.y <= n.y < r.y2]
        assert len(home) == 1
        homes.extend(home)
    assert len(set(homes)) == 6


def test_index_page_has_header_gaps():
    lay = build_layout(index_page_spec(seed=0))
    assert lay.page_type == PageType.INDEX
    from tatedoc import sibling_gaps

    gaps = [g for _, g in sibling_gaps(lay)]
    assert gaps.count(120.0) == 2
    assert max(gaps) == 120.0


class TestGenerateCorpus:
    def test_layout_only_by_default(self):
        result = generate_corpus(10, seed=0)
        assert len(result.layouts) == 10
        assert result.images is None
        assert [l.page_id for l in result.layouts] == list(range(10))
        assert result.manifest == []

    def test_render_produces_images(self):
        result = generate_corpus(3, seed=0, render=True)
        assert len(result.images) == 3
        assert all(im.shape == (2400, 1600) for im in result.images)

    def test_page_variety(self):
        result = generate_corpus(30, seed=1)
        counts = {len(l.elements) for l in result.layouts}
        assert len(counts) > 3  # region mix varies page to page
        assert min(counts) >= 76 and max(counts) <= 91

    def test_defect_rate_quota(self):
        result = generate_corpus(300, seed=31, defect_rate=0.01)
        assert len(result.manifest) == 3
        kinds = [k for _, k in result.manifest]
        assert set(kinds) <= {"corrupted_frame", "shrunk_region"}
        assert len(set(kinds)) == 2  # alternates between both defects

    def test_corrupted_frame_loses_rows(self):
        result = generate_corpus(200, seed=31, defect_rate=0.01)
        by_id = {l.page_id: l for l in result.layouts}
        healthy_min = min(
            len(l.elements)
            for l in result.layouts
            if l.page_id not in dict(result.manifest)
        )
        for pid, kind in result.manifest:
            if kind == "corrupted_frame":
                assert len(by_id[pid].elements) < healthy_min - 20

    def test_shrunk_region_narrows_one_block(self):
        result = generate_corpus(200, seed=31, defect_rate=0.01)
        by_id = {l.page_id: l for l in result.layouts}
        for pid, kind in result.manifest:
            if kind == "shrunk_region":
                widths = [
                    el.rect.w
                    for el in by_id[pid].elements
                    if el.category == Category.TEXT_REGION
                ]
                assert min(widths) == 18

    def test_deterministic(self):
        a = generate_corpus(20, seed=8, defect_rate=0.1)
        b = generate_corpus(20, seed=8, defect_rate=0.1)
        assert a.manifest == b.manifest
        assert a.layouts == b.layouts

    def test_rotation_range(self):
        result = generate_corpus(10, seed=2, rotation_range=(-2.0, 2.0))
        rotations = [s.rotation for s in result.specs]
        assert all(-2.0 <= r <= 2.0 for r in rotations)
        assert len(set(rotations)) > 1


def test_classifier_samples_cycle_and_render():
    samples = classifier_samples(30, seed=0)
    assert len(samples) == 30
    labels = [lbl for _, lbl in samples]
    assert labels[:3] == [RegionClass.TEXT, RegionClass.TITLE, RegionClass.MIS_SEGMENTED]
    assert labels == labels[:3] * 10
    for crop, _ in samples:
        assert crop.dtype == np.bool_
        assert crop.any()
        # tight crops: ink touches every border
        assert crop[0].any() and crop[-1].any()
        assert crop[:, 0].any() and crop[:, -1].any()
