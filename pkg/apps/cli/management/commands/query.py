from apps.cli.management.base import FineHashCommand
from apps.cli.services import PipelineService
from apps.collab.networks import FineHashNet
from apps.retrieval.storage import read_code_database


class Command(FineHashCommand):
    help = 'Encode one image and list its k nearest database codes.'

    def add_arguments(self, parser):
        parser.add_argument('--database', required=True)
        parser.add_argument('--checkpoint', required=True)
        parser.add_argument('--image', required=True)
        parser.add_argument('--k', type=int, default=10)
        parser.add_argument('--label', type=int, default=None, help='Known label, marks relevant results')

    def run(self, **options):
        db = read_code_database(options['database'])
        model = FineHashNet.from_checkpoint(options['checkpoint'])
        result = PipelineService.query(model, db, options['image'], options['k'], label=options['label'])

        rows = result.rows()
        if result.relevant is not None:
            for row, relevant in zip(rows, result.relevant):
                row['relevant'] = bool(relevant)
        return {'image': options['image'], 'k': options['k'], 'results': rows}
