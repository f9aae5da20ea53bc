from django.conf import settings

from apps.cli.management.base import FineHashCommand, parse_int_list, parse_overrides
from apps.cli.services import ManifestService, PipelineService, SweepService
from apps.cli.structures import SPLIT_QUERY, SPLIT_TRAIN

DEFAULT_CODE_LENGTHS = '16,32,48,64'


class Command(FineHashCommand):
    help = 'Train, encode and evaluate once per code length; writes <out>/sweep.csv.'

    def add_arguments(self, parser):
        parser.add_argument('--config', default=None)
        parser.add_argument('--train-manifest', required=True, help='Training images, also the database')
        parser.add_argument('--query-manifest', required=True)
        parser.add_argument('--out', required=True, help='Output directory')
        parser.add_argument('--bits', default=DEFAULT_CODE_LENGTHS, help='Comma separated code lengths')
        parser.add_argument('--lambda-loc', type=float, default=None,
                            help='Override the localization loss weight, 0 for the ablation')
        parser.add_argument('--radius', type=int, default=None)
        parser.add_argument('--set', action='append', dest='overrides', default=[], metavar='KEY=VALUE')

    def run(self, **options):
        config = PipelineService.load_config(
            options['config'] or settings.FINEHASH_DEFAULT_CONFIG, parse_overrides(options['overrides']),
        )
        rows = SweepService.run(
            config,
            ManifestService.read(options['train_manifest'], SPLIT_TRAIN),
            ManifestService.read(options['query_manifest'], SPLIT_QUERY),
            options['out'],
            code_lengths=parse_int_list(options['bits']),
            lambda_loc=options['lambda_loc'],
            radius=options['radius'],
        )
        return {'runs': rows}
