from apps.cli.management.base import FineHashCommand
from apps.cli.services import ManifestService, PipelineService
from apps.cli.structures import SPLIT_CHOICES, SPLIT_DATABASE
from apps.collab.networks import FineHashNet
from apps.retrieval.storage import write_code_database


class Command(FineHashCommand):
    help = 'Encode every manifest image into a packed code database file.'

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True)
        parser.add_argument('--manifest', required=True)
        parser.add_argument('--out', required=True, help='Code database path; labels go to <out>.labels')
        parser.add_argument('--split', choices=SPLIT_CHOICES, default=SPLIT_DATABASE)
        parser.add_argument('--batch-size', type=int, default=16)

    def run(self, **options):
        model = FineHashNet.from_checkpoint(options['checkpoint'])
        manifest = ManifestService.read(options['manifest'], options['split'])
        db = PipelineService.encode(model, manifest, batch_size=options['batch_size'])
        path, labels = write_code_database(options['out'], db)
        return {'path': str(path), 'labels': str(labels), 'count': len(db), 'code_length': db.code_length}
