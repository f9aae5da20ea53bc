from apps.cli.management.base import FineHashCommand
from apps.cli.services import SyntheticDatasetService
from apps.cli.structures import SyntheticSpec


class Command(FineHashCommand):
    help = 'Generate a planted-glyph dataset with train/query manifests and glyph boxes.'

    def add_arguments(self, parser):
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--classes', type=int, default=4)
        parser.add_argument('--train-per-class', type=int, default=16)
        parser.add_argument('--query-per-class', type=int, default=8)
        parser.add_argument('--canvas', type=int, default=224, help='Image side in pixels')
        parser.add_argument('--glyph', type=int, default=32, help='Glyph side in pixels')
        parser.add_argument('--noise', type=float, default=0.05, help='Noise std as a fraction of 255')
        parser.add_argument('--seed', type=int, default=0)

    def run(self, **options):
        spec = SyntheticSpec(
            num_classes=options['classes'],
            train_per_class=options['train_per_class'],
            query_per_class=options['query_per_class'],
            canvas_size=options['canvas'],
            glyph_size=options['glyph'],
            noise=options['noise'],
            seed=options['seed'],
        )
        dataset = SyntheticDatasetService.generate(spec, options['out'])
        return {
            'root': str(dataset.root),
            'manifests': {split: str(path) for split, path in dataset.manifests.items()},
            'glyphs': str(dataset.glyphs),
            'counts': dataset.counts,
        }
