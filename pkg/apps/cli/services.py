"""
Command Line Services

Dataset files, image decoding and the train / encode / query / locate
pipelines the management commands are thin wrappers around.
"""
import csv
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch
from django.conf import settings
from PIL import Image, ImageDraw, UnidentifiedImageError

from apps.collab.networks import FineHashNet
from apps.collab.serializers import TrainConfigSerializer
from apps.collab.services import CollaborativeTrainer
from apps.collab.structures import TrainConfig
from apps.core.config import read_config_file
from apps.core.exceptions import ConfigurationError, ManifestError
from apps.core.utils import ensure_parent
from apps.geometry.services import iou
from apps.geometry.structures import BoundingBox
from apps.retrieval.services import build_database, evaluate, query
from apps.retrieval.storage import write_metrics_json
from apps.retrieval.structures import CodeDatabase, RankedResult
from .serializers import GlyphRowSerializer, ManifestRowSerializer
from .structures import (
    GLYPH_HEADER,
    MANIFEST_HEADER,
    SPLIT_QUERY,
    SPLIT_TRAIN,
    DatasetManifest,
    GlyphRecord,
    ManifestRow,
    SyntheticDataset,
    SyntheticSpec,
)

logger = logging.getLogger(__name__)

LOCATE_CSV_HEADER = ('path', 'layer_id', 'h', 'w', 'r', 'x_min', 'y_min', 'x_max', 'y_max', 'score', 'iou')
SWEEP_CSV_HEADER = ('code_length', 'lambda_loc', 'map', 'p_at_radius')
GLYPH_IOU_THRESHOLD = 0.3


def _first_error(errors: Mapping) -> Tuple[str, str]:
    key, messages = next(iter(errors.items()))
    return key, str(messages[0]) if isinstance(messages, list) else str(messages)


def _relative_to(path: Path, base: Path) -> str:
    try:
        return path.resolve().relative_to(base.resolve()).as_posix()
    except ValueError:
        return str(path)


class ManifestService:
    """
    Reads and writes `path,label` CSV manifests.
    """

    @staticmethod
    def read_rows(path, serializer_class=ManifestRowSerializer) -> List[Dict]:
        path = Path(path)
        if not path.is_file():
            raise ManifestError(f"Manifest not found: {path}", path=str(path))

        with open(path, newline='', encoding='utf-8') as handle:
            reader = csv.DictReader(handle)
            missing = [column for column in serializer_class().fields if column not in (reader.fieldnames or [])]
            if missing:
                raise ManifestError(
                    f"{path} is missing column {missing[0]!r}", path=str(path), columns=reader.fieldnames,
                )
            rows = []
            for line, raw in enumerate(reader, start=2):
                serializer = serializer_class(data=raw)
                if not serializer.is_valid():
                    key, message = _first_error(serializer.errors)
                    raise ManifestError(f"{path}:{line}: {key}: {message}", path=str(path), line=line)
                data = dict(serializer.validated_data)
                image = Path(data['path'])
                data['path'] = image if image.is_absolute() else path.parent / image
                rows.append(data)
        return rows

    @classmethod
    def read(cls, path, split: str = SPLIT_TRAIN) -> DatasetManifest:
        rows = []
        for data in cls.read_rows(path):
            if not data['path'].is_file():
                raise ManifestError(f"Image not found: {data['path']}", path=str(data['path']))
            rows.append(ManifestRow(path=data['path'], label=data['label']))
        manifest = DatasetManifest(tuple(rows), split=split)
        logger.debug(f"Read {len(manifest)} {split} rows over {manifest.num_classes} classes from {path}")
        return manifest

    @staticmethod
    def write(path, rows: Iterable[ManifestRow]) -> Path:
        path = ensure_parent(path)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(MANIFEST_HEADER)
            for row in rows:
                writer.writerow((_relative_to(Path(row.path), path.parent), row.label))
        return path

    @classmethod
    def read_glyphs(cls, path) -> Dict[Path, GlyphRecord]:
        """Planted glyph boxes keyed by resolved image path."""
        return {
            data['path'].resolve(): GlyphRecord(data['path'], data['label'], GlyphRowSerializer.box(data))
            for data in cls.read_rows(path, GlyphRowSerializer)
        }

    @staticmethod
    def write_glyphs(path, records: Iterable[GlyphRecord]) -> Path:
        path = ensure_parent(path)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(GLYPH_HEADER)
            for record in records:
                writer.writerow((_relative_to(record.path, path.parent), record.label, *record.box.as_tuple()))
        return path


class ImageService:
    """
    PNG decoding into normalised (3, S, S) tensors.
    """

    @staticmethod
    def open(path) -> Image.Image:
        try:
            with Image.open(path) as image:
                return image.convert('RGB')
        except FileNotFoundError:
            raise ManifestError(f"Image not found: {path}", path=str(path))
        except UnidentifiedImageError:
            raise ManifestError(f"Not a readable image: {path}", path=str(path))

    @staticmethod
    def size(path) -> Tuple[int, int]:
        """(width, height) without decoding pixels."""
        try:
            with Image.open(path) as image:
                return image.size
        except (FileNotFoundError, UnidentifiedImageError):
            raise ManifestError(f"Not a readable image: {path}", path=str(path))

    @classmethod
    def load(cls, path, size: int) -> torch.Tensor:
        image = cls.open(path)
        if image.size != (size, size):
            image = image.resize((size, size), Image.Resampling.BILINEAR)
        pixels = torch.from_numpy(np.asarray(image, dtype=np.float32) / 255.0).permute(2, 0, 1)
        return (pixels - settings.FINEHASH_PIXEL_MEAN) / settings.FINEHASH_PIXEL_STD

    @classmethod
    def load_many(cls, paths: Sequence, size: int) -> torch.Tensor:
        if not paths:
            return torch.zeros((0, 3, size, size))
        return torch.stack([cls.load(path, size) for path in paths])


class SyntheticDatasetService:
    """
    Planted-glyph images: every picture holds the same large ellipse, and
    only a small class glyph at a random spot tells the classes apart.
    """
    BACKGROUND = (128, 128, 128)
    SHAPE_COLOR = (70, 110, 150)
    GLYPH_COLORS = (
        (230, 60, 50), (250, 200, 40), (40, 170, 80), (240, 240, 240),
        (150, 60, 200), (20, 20, 20), (240, 130, 30), (60, 200, 220),
    )

    @classmethod
    def draw_glyph(cls, draw: ImageDraw.ImageDraw, label: int, box: BoundingBox):
        index = label - 1
        color = cls.GLYPH_COLORS[index % len(cls.GLYPH_COLORS)]
        x0, y0, x1, y1 = box.x_min, box.y_min, box.x_max - 1, box.y_max - 1
        shape = index % 4
        if shape == 0:
            draw.rectangle((x0, y0, x1, y1), fill=color)
        elif shape == 1:
            draw.ellipse((x0, y0, x1, y1), fill=color)
        elif shape == 2:
            draw.polygon(((x0, y1), ((x0 + x1) / 2, y0), (x1, y1)), fill=color)
        else:
            bar = max(1.0, box.width / 4)
            cx, cy = box.center
            draw.rectangle((x0, cy - bar / 2, x1, cy + bar / 2), fill=color)
            draw.rectangle((cx - bar / 2, y0, cx + bar / 2, y1), fill=color)

    @classmethod
    def render(cls, spec: SyntheticSpec, label: int, rng: np.random.Generator) -> Tuple[Image.Image, BoundingBox]:
        size, glyph = spec.canvas_size, spec.glyph_size
        image = Image.new('RGB', (size, size), cls.BACKGROUND)
        draw = ImageDraw.Draw(image)
        draw.ellipse((0.15 * size, 0.25 * size, 0.85 * size, 0.75 * size), fill=cls.SHAPE_COLOR)

        x, y = (int(v) for v in rng.integers(0, size - glyph + 1, size=2))
        box = BoundingBox(x, y, x + glyph, y + glyph)
        cls.draw_glyph(draw, label, box)

        pixels = np.asarray(image, dtype=np.float32)
        if spec.noise:
            pixels = pixels + rng.normal(0.0, spec.noise * 255.0, size=pixels.shape)
        return Image.fromarray(np.clip(np.rint(pixels), 0, 255).astype(np.uint8)), box

    @classmethod
    def generate(cls, spec: SyntheticSpec, root) -> SyntheticDataset:
        root = Path(root)
        rng = np.random.default_rng(spec.seed)
        dataset = SyntheticDataset(root=root)
        glyphs: List[GlyphRecord] = []

        for split, per_class in ((SPLIT_TRAIN, spec.train_per_class), (SPLIT_QUERY, spec.query_per_class)):
            if per_class == 0:
                continue
            rows = []
            for label in range(1, spec.num_classes + 1):
                for index in range(per_class):
                    image, box = cls.render(spec, label, rng)
                    path = ensure_parent(root / 'images' / split / f"{label:02d}_{index:04d}.png")
                    image.save(path, format='PNG')
                    rows.append(ManifestRow(path, label))
                    glyphs.append(GlyphRecord(path, label, box))
            dataset.manifests[split] = ManifestService.write(root / f"{split}.csv", rows)
            dataset.counts[split] = len(rows)

        dataset.glyphs = ManifestService.write_glyphs(root / 'glyphs.csv', glyphs)
        logger.info(f"Generated synthetic dataset in {root}: {dataset.counts}")
        return dataset


class PipelineService:
    """
    Train, encode, query and locate against manifests and checkpoints.
    """

    @staticmethod
    def load_config(path=None, overrides: Optional[Mapping[str, str]] = None) -> TrainConfig:
        """
        Parse a config file with `key=value` overrides applied on top.
        """
        values = read_config_file(path) if path else {}
        values.update(overrides or {})
        return TrainConfigSerializer.parse(values)

    @staticmethod
    def train(config: TrainConfig, manifest: DatasetManifest, checkpoint, log_path=None) -> Tuple[FineHashNet, List[Dict]]:
        if manifest.num_classes > config.num_classes:
            raise ConfigurationError(
                f"Manifest has {manifest.num_classes} classes, config allows {config.num_classes}",
                key='num_classes',
            )
        if log_path:
            Path(log_path).unlink(missing_ok=True)

        trainer = CollaborativeTrainer(config, log_path=log_path)
        images = ImageService.load_many(manifest.paths, config.input_size)
        history = trainer.fit(images, manifest.labels)
        trainer.model.save(checkpoint, extra={'epochs_completed': len(history), 'num_images': len(manifest)})
        logger.info(f"Saved checkpoint to {checkpoint}")
        return trainer.model, history

    @staticmethod
    def encode(model: FineHashNet, manifest: DatasetManifest, batch_size: int = 16) -> CodeDatabase:
        """
        Binary codes for every manifest image, in manifest order.
        """
        chunks = []
        paths = manifest.paths
        for start in range(0, len(paths), batch_size):
            images = ImageService.load_many(paths[start:start + batch_size], model.input_size)
            chunks.append(model.encode(images, batch_size=batch_size)[1].numpy())
        return build_database(np.concatenate(chunks), manifest.labels)

    @staticmethod
    def query(model: FineHashNet, db: CodeDatabase, image, k: int, label: Optional[int] = None) -> RankedResult:
        _, code = model.encode(ImageService.load(image, model.input_size).unsqueeze(0))
        return query(db, code[0].numpy(), k, query_label=label)

    @staticmethod
    def locate(model: FineHashNet, paths: Sequence, glyphs: Optional[Mapping[Path, GlyphRecord]] = None,
               batch_size: int = 16) -> List[Dict]:
        """
        The three selected regions per image, and their IoU with the planted
        glyph when one is known for the image.
        """
        glyphs = glyphs or {}
        results = []
        for start in range(0, len(paths), batch_size):
            chunk = [Path(path) for path in paths[start:start + batch_size]]
            regions = model.locate(ImageService.load_many(chunk, model.input_size))
            for path, picked in zip(chunk, regions):
                record = glyphs.get(path.resolve())
                truth = None
                if record is not None:
                    width, height = ImageService.size(path)
                    sx, sy = model.input_size / width, model.input_size / height
                    box = record.box
                    truth = BoundingBox(box.x_min * sx, box.y_min * sy, box.x_max * sx, box.y_max * sy)
                results.append({
                    'path': str(path),
                    'regions': [
                        {
                            'layer_id': proposal.layer_id,
                            'grid_index': list(proposal.grid_index),
                            'flat_index': proposal.flat_index,
                            'score': proposal.score,
                            'box': list(proposal.box.as_tuple()),
                            'iou': iou(proposal.box, truth) if truth is not None else None,
                        }
                        for proposal in picked
                    ],
                })
        return results

    @staticmethod
    def summarize_locations(results: Sequence[Dict], threshold: float = GLYPH_IOU_THRESHOLD) -> Dict:
        """
        Share of images whose finest-layer region overlaps the glyph by at
        least `threshold`, over images with a known glyph.
        """
        finest = [r['regions'][0]['iou'] for r in results if r['regions'][0]['iou'] is not None]
        if not finest:
            return {'images_with_glyph': 0}
        return {
            'images_with_glyph': len(finest),
            'iou_threshold': threshold,
            'hit_rate': sum(value >= threshold for value in finest) / len(finest),
            'mean_iou': float(np.mean(finest)),
        }

    @staticmethod
    def write_locations_csv(results: Sequence[Dict], path) -> Path:
        path = ensure_parent(path)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(LOCATE_CSV_HEADER)
            for result in results:
                for region in result['regions']:
                    writer.writerow((
                        result['path'], region['layer_id'], *region['grid_index'], *region['box'],
                        region['score'], '' if region['iou'] is None else region['iou'],
                    ))
        return path


class SweepService:
    """
    Train, encode and evaluate once per code length.
    """

    @staticmethod
    def run(config: TrainConfig, train_manifest: DatasetManifest, query_manifest: DatasetManifest, out_dir,
            code_lengths: Sequence[int], lambda_loc: Optional[float] = None, radius: Optional[int] = None) -> List[Dict]:
        out_dir = Path(out_dir)
        if lambda_loc is not None:
            config = replace(config, lambda_loc=lambda_loc)

        rows = []
        for code_length in code_lengths:
            run_config = replace(config, code_length=code_length)
            run_dir = out_dir / f"{code_length}bits"
            model, _ = PipelineService.train(
                run_config, train_manifest, run_dir / 'model.pt', log_path=run_dir / 'train.jsonl',
            )
            db = PipelineService.encode(model, train_manifest)
            queries = PipelineService.encode(model, query_manifest)
            metrics = evaluate(queries, db, radius=radius)
            write_metrics_json(metrics, run_dir / 'metrics.json')
            rows.append({
                'code_length': code_length,
                'lambda_loc': run_config.lambda_loc,
                'map': metrics.map,
                'p_at_radius': metrics.p_at_radius,
            })
            logger.info(f"{code_length} bits: MAP={metrics.map:.4f} P@r={metrics.p_at_radius:.4f}")

        path = ensure_parent(out_dir / 'sweep.csv')
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.DictWriter(handle, fieldnames=SWEEP_CSV_HEADER)
            writer.writeheader()
            writer.writerows(rows)
        return rows
