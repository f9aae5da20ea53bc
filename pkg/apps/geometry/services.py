"""
Region Proposal Geometry

Pure functions over immutable inputs: anchor enumeration, receptive-field
centres, IoU, greedy NMS and crop-with-resize.
"""
import csv
import logging
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from apps.core.exceptions import ConfigurationError, DimensionMismatchError, GridIndexError
from .structures import CSV_HEADER, AnchorSpec, BoundingBox, FeatureGrid, Proposal, ProposalSet

logger = logging.getLogger(__name__)


def receptive_center(grid: FeatureGrid, h: int, w: int) -> Tuple[float, float]:
    """
    Map 1-based cell (h, w) to the (x, y) pixel centre of its receptive field.
    """
    if not (1 <= h <= grid.height and 1 <= w <= grid.width):
        raise GridIndexError(
            f"Cell ({h}, {w}) outside {grid.height}x{grid.width} grid of layer {grid.layer_id}",
            h=h, w=w, layer_id=grid.layer_id,
        )
    return (w - 0.5) * grid.stride, (h - 0.5) * grid.stride


def hwr_to_index(h: int, w: int, r: int, height: int, width: int) -> int:
    """
    Flat index c = (r-1)*(H*W) + (w-1)*H + h, 1-based.
    """
    return (r - 1) * (height * width) + (w - 1) * height + h


def flatten_scores(scores: torch.Tensor) -> torch.Tensor:
    """
    Reorder an (..., H, W, R) score tensor into (..., H*W*R) flat-index order.

    Position c-1 of the result holds A(h, w, r) for the <h, w, r> of c.
    """
    return scores.transpose(-1, -3).reshape(*scores.shape[:-3], -1)


def unflatten_scores(flat: torch.Tensor, height: int, width: int, num_anchors: int) -> torch.Tensor:
    """Inverse of `flatten_scores`."""
    return flat.reshape(*flat.shape[:-1], num_anchors, width, height).transpose(-1, -3)


def generate_anchors(grids: Sequence[FeatureGrid], spec: AnchorSpec, clip: bool = True) -> ProposalSet:
    """
    Enumerate every anchor of every grid cell, in layer then flat-index order.

    Each anchor is centred on its cell's receptive centre with height
    size*sqrt(a/b) and width size*sqrt(b/a) for ratio a:b. Scores start at 0.
    """
    if not grids:
        raise ConfigurationError("generate_anchors needs at least one feature grid")

    shapes = spec.shapes()
    proposals: List[Proposal] = []
    for grid in grids:
        for r, (box_h, box_w) in enumerate(shapes, start=1):
            for w in range(1, grid.width + 1):
                for h in range(1, grid.height + 1):
                    cx, cy = receptive_center(grid, h, w)
                    box = BoundingBox.from_center(cx, cy, box_w, box_h)
                    if clip:
                        box = box.clip(grid.input_size)
                    proposals.append(Proposal(
                        box=box,
                        score=0.0,
                        layer_id=grid.layer_id,
                        grid_index=(h, w, r),
                        flat_index=hwr_to_index(h, w, r, grid.height, grid.width),
                    ))

    logger.debug(f"Generated {len(proposals)} anchors over {len(grids)} grids")
    return ProposalSet(tuple(proposals))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """
    Intersection over union; 0.0 for disjoint boxes.
    """
    inter_w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    inter_h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    intersection = inter_w * inter_h
    return intersection / (a.area + b.area - intersection)


def pairwise_iou(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """
    IoU matrix between (N, 4) and (M, 4) arrays in (x_min, y_min, x_max, y_max) order.
    """
    top_left = np.maximum(boxes_a[:, None, :2], boxes_b[None, :, :2])
    bottom_right = np.minimum(boxes_a[:, None, 2:], boxes_b[None, :, 2:])
    extent = np.clip(bottom_right - top_left, 0.0, None)
    intersection = extent[..., 0] * extent[..., 1]

    area_a = np.prod(boxes_a[:, 2:] - boxes_a[:, :2], axis=1)
    area_b = np.prod(boxes_b[:, 2:] - boxes_b[:, :2], axis=1)
    return intersection / (area_a[:, None] + area_b[None, :] - intersection)


def nms(props: ProposalSet, iou_threshold: float, keep: int) -> ProposalSet:
    """
    Greedy non-maximum suppression.

    Proposals are visited by descending score (input order on ties); one is
    dropped when its IoU with an already kept proposal exceeds the threshold.
    At most `keep` survivors are returned, best first, with their original
    grid and flat indices.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ConfigurationError(f"NMS IoU threshold must lie in [0, 1], got {iou_threshold}")
    if keep < 1:
        raise ConfigurationError(f"NMS keep count must be at least 1, got {keep}")
    if len(props) == 0:
        return ProposalSet()

    boxes = np.array([p.box.as_tuple() for p in props], dtype=np.float64)
    scores = np.array([p.score for p in props], dtype=np.float64)
    order = np.argsort(-scores, kind='stable')
    overlaps = pairwise_iou(boxes, boxes)

    kept: List[int] = []
    suppressed = np.zeros(len(props), dtype=bool)
    for index in order:
        if suppressed[index]:
            continue
        kept.append(int(index))
        if len(kept) == keep:
            break
        suppressed |= overlaps[index] > iou_threshold

    return ProposalSet(tuple(props[i] for i in kept))


def crop_resize(image: torch.Tensor, box: BoundingBox, out_size: int) -> torch.Tensor:
    """
    Crop `box` out of a (C, H, W) raster and resample it to out_size x out_size.

    Sampling is corner aligned: the first and last output pixels sit on the
    first and last pixel covered by the box, and values in between are
    bilinear blends, so the output stays inside the input's value range.
    """
    if image.dim() != 3:
        raise DimensionMismatchError(f"Expected a (C, H, W) raster, got shape {tuple(image.shape)}")
    _, height, width = image.shape

    box = BoundingBox(
        max(0.0, box.x_min), max(0.0, box.y_min),
        min(float(width), box.x_max), min(float(height), box.y_max),
    ) if (box.x_min < 0 or box.y_min < 0 or box.x_max > width or box.y_max > height) else box

    integral = all(float(v).is_integer() for v in box.as_tuple())
    if integral and box.width == out_size and box.height == out_size:
        x0, y0 = int(box.x_min), int(box.y_min)
        return image[:, y0:y0 + out_size, x0:x0 + out_size].clone()

    x_last = max(box.x_min, box.x_max - 1.0)
    y_last = max(box.y_min, box.y_max - 1.0)
    xs = torch.linspace(box.x_min, x_last, out_size, dtype=image.dtype, device=image.device)
    ys = torch.linspace(box.y_min, y_last, out_size, dtype=image.dtype, device=image.device)

    # align_corners=True maps -1 / +1 onto the centres of the first / last pixel
    gx = 2.0 * xs / (width - 1) - 1.0 if width > 1 else torch.zeros_like(xs)
    gy = 2.0 * ys / (height - 1) - 1.0 if height > 1 else torch.zeros_like(ys)
    grid_x, grid_y = torch.meshgrid(gx, gy, indexing='xy')
    grid = torch.stack((grid_x, grid_y), dim=-1).unsqueeze(0)

    return F.grid_sample(
        image.unsqueeze(0), grid, mode='bilinear', padding_mode='border', align_corners=True
    )[0]


def proposals_to_csv(props: ProposalSet, path) -> Path:
    """
    Dump proposals as layer_id,h,w,r,x_min,y_min,x_max,y_max,score rows.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        writer.writerows(props.rows())
    return path
