"""
Tests for Region Proposal Geometry
"""
import math
import time

import numpy as np
import pytest
import torch

from apps.core.exceptions import ConfigurationError, DegenerateBoxError, GridIndexError
from apps.core.tests.factories import BoundingBoxFactory, random_proposal_set
from apps.geometry.services import (
    crop_resize,
    flatten_scores,
    generate_anchors,
    hwr_to_index,
    iou,
    nms,
    proposals_to_csv,
    receptive_center,
    unflatten_scores,
)
from apps.geometry.structures import (
    AnchorSpec,
    BoundingBox,
    FeatureGrid,
    ProposalSet,
    default_grids,
)

pytestmark = pytest.mark.unit


def brute_force_nms(props, threshold, keep):
    """Quadratic reference: walk by score and test against every kept box."""
    order = sorted(range(len(props)), key=lambda i: (-props[i].score, i))
    kept = []
    for i in order:
        if all(iou(props[i].box, props[j].box) <= threshold for j in kept):
            kept.append(i)
        if len(kept) == keep:
            break
    return [props[i] for i in kept]


class TestReceptiveCenter:
    """Tests for cell to pixel centre mapping"""

    def test_first_cell(self):
        """Test centre of the first 7x7 cell"""
        grid = FeatureGrid(1, 7, 7)
        assert receptive_center(grid, 1, 1) == (16.0, 16.0)

    def test_middle_cell_is_canvas_center(self):
        """Test the middle cell maps to the canvas centre"""
        grid = FeatureGrid(1, 7, 7)
        assert receptive_center(grid, 4, 4) == (112.0, 112.0)

    def test_coarse_grid(self):
        """Test a 2x2 grid with stride 112"""
        grid = FeatureGrid(3, 2, 2)
        assert receptive_center(grid, 2, 1) == (56.0, 168.0)

    @pytest.mark.parametrize('h, w', [(0, 1), (1, 0), (8, 1), (1, 8)])
    def test_out_of_range(self, h, w):
        """Test out-of-range cells raise an index error"""
        with pytest.raises(IndexError):
            receptive_center(FeatureGrid(1, 7, 7), h, w)

    def test_out_of_range_is_domain_error(self):
        """Test the index error is also a GridIndexError"""
        with pytest.raises(GridIndexError):
            receptive_center(FeatureGrid(1, 2, 2), 3, 1)


class TestGenerateAnchors:
    """Tests for anchor enumeration"""

    def test_default_count(self):
        """Test the default configuration yields 621 proposals"""
        start = time.time()
        props = generate_anchors(default_grids(), AnchorSpec(), clip=True)
        duration = time.time() - start

        assert len(props) == 621
        assert [len(props.for_layer(layer)) for layer in (1, 2, 3)] == [441, 144, 36]
        assert duration < 1.0

    def test_parametric_count(self):
        """Test the count formula for a non-default configuration"""
        grids = [FeatureGrid(1, 5, 3, 60), FeatureGrid(2, 2, 2, 60)]
        spec = AnchorSpec(sizes=(8, 16), ratios=((1, 1),))
        assert len(generate_anchors(grids, spec)) == (15 + 4) * 2

    def test_single_cell(self):
        """Test one 1x1 grid with one anchor is centred on the canvas"""
        props = generate_anchors([FeatureGrid(1, 1, 1, 224)], AnchorSpec(sizes=(32,), ratios=((1, 1),)))

        assert len(props) == 1
        assert props[0].box.center == (112.0, 112.0)
        assert props[0].grid_index == (1, 1, 1)
        assert props[0].flat_index == 1

    def test_clip_at_origin(self):
        """Test the 32px square anchor of the first cell clips to (0, 0, 32, 32)"""
        spec = AnchorSpec(sizes=(32,), ratios=((1, 1),))
        props = generate_anchors([FeatureGrid(1, 7, 7)], spec, clip=True)
        assert props[0].box.as_tuple() == (0.0, 0.0, 32.0, 32.0)

    def test_clipping_keeps_boxes_inside(self):
        """Test every clipped box lies on the canvas"""
        props = generate_anchors(default_grids(), AnchorSpec(), clip=True)
        for proposal in props:
            box = proposal.box
            assert 0 <= box.x_min < box.x_max <= 224
            assert 0 <= box.y_min < box.y_max <= 224

    def test_unclipped_boxes_preserve_area(self):
        """Test every ratio keeps the anchor area at size squared"""
        props = generate_anchors([FeatureGrid(1, 7, 7)], AnchorSpec(), clip=False)
        sizes = [32, 32, 32, 48, 48, 48, 96, 96, 96]
        for proposal in props:
            size = sizes[proposal.grid_index[2] - 1]
            assert proposal.box.area == pytest.approx(size ** 2)

    def test_ratio_is_height_over_width(self):
        """Test 2:3 anchors are wider than tall"""
        props = generate_anchors([FeatureGrid(1, 1, 1)], AnchorSpec(sizes=(48,), ratios=((2, 3),)), clip=False)
        box = props[0].box
        assert box.height / box.width == pytest.approx(2 / 3)

    def test_flat_index_invariant(self):
        """Test flat indices follow (r-1)*H*W + (w-1)*H + h"""
        props = generate_anchors(default_grids(), AnchorSpec())
        for layer_id, size in zip((1, 2, 3), (7, 4, 2)):
            layer = props.for_layer(layer_id)
            assert [p.flat_index for p in layer] == list(range(1, size * size * 9 + 1))
            for proposal in layer:
                h, w, r = proposal.grid_index
                assert proposal.flat_index == (r - 1) * size * size + (w - 1) * size + h

    def test_scores_start_at_zero(self):
        """Test anchors start unscored"""
        props = generate_anchors(default_grids(), AnchorSpec())
        assert all(p.score == 0.0 for p in props)

    def test_empty_grid_list(self):
        """Test an empty grid list is rejected"""
        with pytest.raises(ConfigurationError):
            generate_anchors([], AnchorSpec())


class TestFlattenScores:
    """Tests for flat-index ordering of score tensors"""

    def test_position_matches_formula(self):
        """Test flattened position c-1 holds A(h, w, r)"""
        scores = torch.randn(7, 7, 9)
        flat = flatten_scores(scores)
        for h, w, r in [(1, 1, 1), (2, 2, 2), (7, 3, 9), (4, 6, 5)]:
            c = hwr_to_index(h, w, r, 7, 7)
            assert flat[c - 1] == scores[h - 1, w - 1, r - 1]

    def test_batched_round_trip(self):
        """Test unflatten inverts flatten with a leading batch dimension"""
        scores = torch.randn(3, 4, 5, 9)
        restored = unflatten_scores(flatten_scores(scores), 4, 5, 9)
        assert torch.equal(restored, scores)


class TestIoU:
    """Tests for intersection over union"""

    def test_identical_boxes(self):
        """Test identical boxes have IoU 1"""
        box = BoundingBox(3, 4, 20, 30)
        assert iou(box, box) == 1.0

    def test_disjoint_boxes(self):
        """Test disjoint boxes have IoU 0"""
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 30, 30)) == 0.0

    def test_touching_boxes(self):
        """Test boxes sharing an edge have IoU 0"""
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(10, 0, 20, 10)) == 0.0

    def test_half_overlap(self):
        """Test a half-shifted box gives 50/150"""
        assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 15, 10)) == pytest.approx(1 / 3)

    def test_symmetric_and_bounded(self):
        """Test IoU is symmetric and within [0, 1] on random boxes"""
        for _ in range(200):
            a, b = BoundingBoxFactory(), BoundingBoxFactory()
            value = iou(a, b)
            assert value == iou(b, a)
            assert 0.0 <= value <= 1.0
            if value == 1.0:
                assert a == b


class TestNMS:
    """Tests for greedy non-maximum suppression"""

    def test_identical_boxes(self):
        """Test only the better of two identical boxes survives"""
        box = BoundingBox(0, 0, 50, 50)
        props = random_proposal_set([box, box], scores=[0.9, 0.8])

        kept = nms(props, iou_threshold=0.5, keep=10)

        assert len(kept) == 1
        assert kept[0].score == 0.9

    def test_disjoint_boxes_all_kept(self):
        """Test disjoint boxes all survive up to the keep limit"""
        boxes = [BoundingBox(i * 20, 0, i * 20 + 10, 10) for i in range(5)]
        props = random_proposal_set(boxes, scores=[0.1, 0.5, 0.3, 0.9, 0.7])

        assert len(nms(props, 0.0, keep=10)) == 5
        kept = nms(props, 0.0, keep=3)
        assert [p.score for p in kept] == [0.9, 0.7, 0.5]

    def test_empty_input(self):
        """Test empty input gives empty output"""
        assert len(nms(ProposalSet(), 0.5, keep=3)) == 0

    def test_survivors_keep_indices(self):
        """Test survivors carry their original grid and flat indices"""
        props = generate_anchors(default_grids(), AnchorSpec()).for_layer(1)
        scores = torch.rand(len(props), generator=torch.Generator().manual_seed(3)).tolist()
        scored = props.with_scores(scores)

        kept = nms(scored, 0.25, keep=6)

        originals = {p.flat_index: p for p in scored}
        for proposal in kept:
            assert originals[proposal.flat_index] == proposal

    @pytest.mark.parametrize('threshold, keep', [(-0.1, 3), (1.1, 3), (0.5, 0)])
    def test_invalid_arguments(self, threshold, keep):
        """Test threshold and keep validation"""
        with pytest.raises(ConfigurationError):
            nms(ProposalSet(), threshold, keep)

    @pytest.mark.oracle
    def test_matches_brute_force(self):
        """Test NMS equals the quadratic reference on 200 random sets"""
        rng = np.random.default_rng(11)
        for trial in range(200):
            count = int(rng.integers(1, 40))
            boxes = [BoundingBoxFactory() for _ in range(count)]
            props = random_proposal_set(boxes, scores=rng.random(count).tolist())
            threshold = float(rng.choice([0.0, 0.25, 0.5, 0.7, 1.0]))
            keep = int(rng.integers(1, 12))

            kept = nms(props, threshold, keep)

            assert list(kept) == brute_force_nms(props, threshold, keep)
            assert all(a.score > b.score for a, b in zip(kept, list(kept)[1:]))


class TestCropResize:
    """Tests for crop-with-resize"""

    def test_identity_crop(self):
        """Test the full-canvas crop reproduces the input"""
        image = torch.rand(3, 224, 224, dtype=torch.float64)
        out = crop_resize(image, BoundingBox(0, 0, 224, 224), 224)
        assert torch.allclose(out, image, atol=1e-6)

    def test_linear_ramp(self):
        """Test resampling a horizontal ramp reproduces the ramp"""
        ramp = torch.arange(16, dtype=torch.float64).repeat(16, 1)
        image = ramp.unsqueeze(0).repeat(3, 1, 1)

        out = crop_resize(image, BoundingBox(2, 0, 10, 8), 15)

        expected = torch.linspace(2, 9, 15, dtype=torch.float64)
        for row in out[0]:
            assert torch.allclose(row, expected, atol=1e-9)

    def test_constant_image(self):
        """Test a constant image stays constant"""
        image = torch.full((3, 64, 64), 0.37)
        out = crop_resize(image, BoundingBox(5.5, 7.25, 40.0, 33.0), 24)
        assert out.shape == (3, 24, 24)
        assert torch.allclose(out, torch.full_like(out, 0.37))

    def test_checkerboard_bilinear(self):
        """Test a 2x2 checkerboard upsampled to 4x4 matches x + y - 2xy"""
        image = torch.tensor([[[0.0, 1.0], [1.0, 0.0]]], dtype=torch.float64)
        out = crop_resize(image, BoundingBox(0, 0, 2, 2), 4)

        steps = torch.tensor([0.0, 1 / 3, 2 / 3, 1.0], dtype=torch.float64)
        ys, xs = torch.meshgrid(steps, steps, indexing='ij')
        expected = xs + ys - 2 * xs * ys
        assert torch.allclose(out[0], expected, atol=1e-12)

    def test_values_stay_in_range(self):
        """Test bilinear output never leaves the input range"""
        image = torch.rand(3, 50, 50)
        out = crop_resize(image, BoundingBox(3.3, 9.1, 41.7, 30.2), 37)
        assert out.min() >= image.min() - 1e-6
        assert out.max() <= image.max() + 1e-6

    def test_box_outside_canvas(self):
        """Test a box with nothing on the canvas raises a degenerate-box error"""
        image = torch.rand(3, 32, 32)
        with pytest.raises(DegenerateBoxError):
            crop_resize(image, BoundingBox(40, 40, 50, 50), 8)


class TestBoundingBox:
    """Tests for box invariants"""

    def test_zero_area_rejected(self):
        """Test boxes without area cannot be built"""
        with pytest.raises(DegenerateBoxError):
            BoundingBox(5, 5, 5, 10)

    def test_clip(self):
        """Test clipping onto the canvas"""
        box = BoundingBox(-8, -8, 24, 24).clip(16)
        assert box.as_tuple() == (0, 0, 16, 16)

    def test_from_center(self):
        """Test construction from centre and size"""
        box = BoundingBox.from_center(10, 20, 4, 6)
        assert box.as_tuple() == (8, 17, 12, 23)
        assert math.isclose(box.area, 24)


class TestProposalCsv:
    """Tests for the debug CSV dump"""

    def test_header_and_rows(self, tmp_path):
        """Test the documented column layout"""
        props = generate_anchors([FeatureGrid(2, 2, 2)], AnchorSpec(sizes=(32,), ratios=((1, 1),)))
        path = proposals_to_csv(props, tmp_path / 'boxes.csv')

        lines = path.read_text().splitlines()
        assert lines[0] == 'layer_id,h,w,r,x_min,y_min,x_max,y_max,score'
        assert len(lines) == 5
        assert lines[1].startswith('2,1,1,1,')
