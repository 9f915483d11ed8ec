import numpy as np
import pytest

from tatedoc import (
    AffineMap,
    Category,
    LayoutExtractor,
    PageSpec,
    PageType,
    PipelineConfig,
    Rect,
    RowSpec,
    extract_page,
    extract_page_with_frame,
    fit_affine,
    generate_page,
    index_page_spec,
    iou,
    text_region_spec,
    title_region_spec,
)
from tatedoc.classify import ExternalClassifier, HeuristicClassifier
from tatedoc.errors import NoPageFrame, ParseError
from tatedoc.pipeline import make_classifier
from tatedoc.synth import default_page_spec


class TestPipelineConfig:
    def test_defaults_are_valid(self):
        cfg = PipelineConfig()
        assert cfg.coarse_factor == 8
        assert cfg.binarize_threshold is None
        assert cfg.gap_break is None
        assert cfg.classifier == "heuristic"

    def test_to_dict_round_trips(self):
        cfg = PipelineConfig(misseg_gap=70.0, c_row=300)
        assert PipelineConfig(**cfg.to_dict()) == cfg

    def test_from_text_parses_values_and_comments(self):
        cfg = PipelineConfig.from_text(
            """
            # tuning for a coarser scanner
            coarse_factor = 4
            misseg_gap = 55.5   # normalized units
            binarize_threshold = 128
            classifier = heuristic

            c_row = none
            """
        )
        assert cfg.coarse_factor == 4
        assert cfg.misseg_gap == 55.5
        assert cfg.binarize_threshold == 128
        assert cfg.c_row is None
        # untouched knobs keep their defaults
        assert cfg.frame_inset == 16

    def test_from_text_empty_gives_defaults(self):
        assert PipelineConfig.from_text("") == PipelineConfig()

    def test_overrides_beat_file_values(self):
        cfg = PipelineConfig.from_text("misseg_gap = 55.5", misseg_gap=80.0, jobs=4)
        assert cfg.misseg_gap == 80.0
        assert cfg.jobs == 4

    def test_unknown_key_rejected_with_line_number(self):
        with pytest.raises(ParseError, match="line 2.*missegg_gap"):
            PipelineConfig.from_text("# fine\nmissegg_gap = 55\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ParseError, match="key = value"):
            PipelineConfig.from_text("coarse_factor 4")

    def test_bad_value_rejected(self):
        with pytest.raises(ParseError, match="bad value 'fast'"):
            PipelineConfig.from_text("coarse_factor = fast")

    def test_none_only_where_allowed(self):
        # gap_break is derive-from-data, misseg_gap is not
        assert PipelineConfig.from_text("gap_break = none").gap_break is None
        with pytest.raises(ParseError, match="misseg_gap cannot be none"):
            PipelineConfig.from_text("misseg_gap = none")

    def test_constraint_violations_become_parse_errors(self):
        with pytest.raises(ParseError, match="count_hi > count_lo"):
            PipelineConfig.from_text("count_hi = 5\ncount_lo = 9")

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"coarse_factor": 0},
            {"jobs": 0},
            {"misseg_gap": -1.0},
            {"binarize_threshold": 300},
            {"binarize_threshold": 0},
            {"c_row": 0},
            {"gap_break": -4.0},
            {"frame_inset": -1},
            {"count_hi": 10, "count_lo": 10},
        ],
    )
    def test_constructor_validation(self, kwargs):
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs)

    def test_make_classifier_variants(self):
        assert isinstance(make_classifier(PipelineConfig()), HeuristicClassifier)
        ext = make_classifier(PipelineConfig(classifier="external:somecmd --flag"))
        assert isinstance(ext, ExternalClassifier)
        with pytest.raises(ValueError, match="unknown classifier"):
            make_classifier(PipelineConfig(classifier="svm"))

    def test_heuristic_classifier_gets_config_knobs(self):
        clf = make_classifier(PipelineConfig(misseg_gap=70.0, title_density=0.4))
        assert clf.misseg_gap == 70.0
        assert clf.title_density == 0.4


def _greedy_match(truth, got, spec):
    """Pair up truth/extracted elements per category by IoU.

    Truth rects live in the generated frame's coordinate system and the
    extracted ones in the detected frame's, so truth rects are pushed
    through the page rotation and then the detected rectification before
    comparing.  Returns [(truth_el, got_el, iou)] covering every non-frame
    truth element; unmatched elements pair with None at iou 0.
    """
    rot = AffineMap.rotation_deg(spec.rotation, spec.width / 2, spec.height / 2)
    frame = got.frame()
    rectifier = fit_affine(frame.quad, frame.rect)
    fx, fy = spec.frame.x, spec.frame.y

    def mapped(rect):
        corners = [
            (rect.x + fx, rect.y + fy),
            (rect.x2 + fx, rect.y + fy),
            (rect.x2 + fx, rect.y2 + fy),
            (rect.x + fx, rect.y2 + fy),
        ]
        pts = [rectifier.apply(*rot.apply(x, y)) for x, y in corners]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return Rect(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))

    pairs = []
    for cat in Category:
        if cat is Category.PAGE_FRAME:
            continue
        want = [e for e in truth.elements if e.category is cat]
        have = [e for e in got.elements if e.category is cat]
        for t in want:
            target = mapped(t.rect)
            best, best_i = 0.0, None
            for i, g in enumerate(have):
                v = iou(target, g.rect)
                if v > best:
                    best, best_i = v, i
            pairs.append((t, have.pop(best_i) if best_i is not None else None, best))
    return pairs


def _counts(layout):
    out = {}
    for e in layout.elements:
        out[e.category] = out.get(e.category, 0) + 1
    return out


class TestExtractPage:
    def test_clean_page_recovers_every_element(self):
        spec = default_page_spec(seed=3)
        img, truth = generate_page(spec)
        got = extract_page(img, page_id=truth.page_id, file_name="p3.png")
        assert _counts(got) == _counts(truth)
        assert got.page_type is PageType.MAIN
        assert got.page_id == truth.page_id
        assert got.file_name == "p3.png"
        assert got.image_size == (spec.width, spec.height)
        for t, g, v in _greedy_match(truth, got, spec):
            assert g is not None
            assert v >= 0.95

    def test_rotated_page_recovers_every_element(self):
        spec = default_page_spec(seed=4, rotation=1.5)
        img, truth = generate_page(spec)
        got = extract_page(img)
        assert _counts(got) == _counts(truth)
        for _, g, v in _greedy_match(truth, got, spec):
            assert g is not None
            assert v >= 0.9

    def test_reading_order_and_parents_survive_extraction(self):
        # matched elements must sit at the same place in the hierarchy
        spec = default_page_spec(seed=5)
        img, truth = generate_page(spec)
        got = extract_page(img)
        for t, g, _ in _greedy_match(truth, got, spec):
            assert g.reading_order == t.reading_order
            t_parent = truth.element(t.parent).category
            g_parent = got.element(g.parent).category
            assert g_parent is t_parent

    def test_index_page_extracts_like_main(self):
        spec = index_page_spec(seed=6)
        img, truth = generate_page(spec)
        got = extract_page(img, page_type=PageType.INDEX)
        assert got.page_type is PageType.INDEX
        assert _counts(got) == _counts(truth)
        for t, g, v in _greedy_match(truth, got, spec):
            assert v >= 0.95
            assert g.reading_order == t.reading_order

    def test_fused_blocks_are_resplit(self):
        # A 32px gap is narrower than the ~36px closing length, so the two
        # middle columns come out of segmentation as one block; the fused-
        # block detector has to recover them.
        row0 = RowSpec(
            regions=tuple(text_region_spec() for _ in range(4)),
            gaps=(44, 32, 44),
        )
        row1 = RowSpec(
            regions=(title_region_spec(), text_region_spec(), text_region_spec()),
            gaps=(44, 45),
        )
        spec = PageSpec(rows=(row0, row1), seed=7)
        img, truth = generate_page(spec)

        got = extract_page(img)
        assert _counts(got) == _counts(truth)
        top = sorted(
            (e for e in got.elements if e.category is Category.ROW),
            key=lambda e: e.rect.y,
        )[0]
        kids = sorted(got.children_of(top.id), key=lambda e: e.reading_order)
        assert [k.category for k in kids] == [Category.TEXT_REGION] * 4
        assert [round(k.rect.w) for k in kids] == [74, 74, 74, 74]

        # with the detector effectively disabled the pair stays fused
        blind = extract_page(img, PipelineConfig(misseg_gap=1e9))
        assert _counts(blind)[Category.TEXT_REGION] == 5

    def test_advertisement_and_other_pass_through(self):
        img = np.zeros((120, 80), dtype=np.uint8)  # not even a page frame
        for ptype in (PageType.ADVERTISEMENT, PageType.OTHER):
            layout = extract_page(
                img, page_type=ptype, page_id=9, file_name="ad.png"
            )
            assert layout.elements == []
            assert layout.page_type is ptype
            assert layout.page_id == 9
            assert layout.image_size == (80, 120)
            assert layout.file_name == "ad.png"

    def test_blank_page_raises(self):
        with pytest.raises(NoPageFrame):
            extract_page(np.full((400, 300), 255, dtype=np.uint8))

    def test_non_gray_input_rejected(self):
        with pytest.raises(ValueError):
            extract_page(np.zeros((4, 4, 3), dtype=np.uint8))

    def test_extract_with_known_frame_keeps_quad_verbatim(self):
        spec = default_page_spec(seed=8, rotation=1.0)
        img, truth = generate_page(spec)
        quad = truth.frame().quad
        got = extract_page_with_frame(img, quad, page_id=1)
        assert got.frame().quad == quad
        assert _counts(got) == _counts(truth)


class TestLayoutExtractor:
    def test_transform_batches_pages(self):
        imgs = [generate_page(default_page_spec(seed=s))[0] for s in (0, 1)]
        layouts = LayoutExtractor().fit().transform(imgs)
        assert [l.page_id for l in layouts] == [0, 1]
        assert all(l.page_type is PageType.MAIN for l in layouts)
        assert all(len(l.elements) == 91 for l in layouts)

    def test_tuples_carry_page_types(self):
        img, _ = generate_page(default_page_spec(seed=0))
        ad = np.zeros((10, 10), dtype=np.uint8)
        layouts = LayoutExtractor().fit().transform(
            [(img, PageType.MAIN), (ad, PageType.ADVERTISEMENT)]
        )
        assert layouts[0].page_type is PageType.MAIN
        assert layouts[1].page_type is PageType.ADVERTISEMENT
        assert layouts[1].elements == []

    def test_transform_fits_itself_when_needed(self):
        ad = np.zeros((10, 10), dtype=np.uint8)
        ext = LayoutExtractor()
        out = ext.transform([(ad, PageType.OTHER)])
        assert len(out) == 1
        assert ext.config_ == PipelineConfig()

    def test_explicit_config_is_used(self):
        cfg = PipelineConfig(misseg_gap=90.0)
        ext = LayoutExtractor(config=cfg).fit()
        assert ext.config_ is cfg

    def test_sklearn_params(self):
        cfg = PipelineConfig(jobs=2)
        ext = LayoutExtractor()
        assert ext.get_params() == {"config": None}
        ext.set_params(config=cfg)
        assert ext.get_params()["config"] is cfg
