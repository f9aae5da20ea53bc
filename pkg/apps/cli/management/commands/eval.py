from apps.cli.management.base import FineHashCommand, parse_int_list
from apps.cli.services import ManifestService, PipelineService
from apps.cli.structures import SPLIT_QUERY
from apps.collab.networks import FineHashNet
from apps.core.exceptions import ConfigurationError
from apps.retrieval.services import evaluate, random_code_baseline
from apps.retrieval.storage import read_code_database, write_metrics_csv, write_metrics_json


class Command(FineHashCommand):
    help = 'Score query codes against a code database: MAP, PR curve, precision@radius and top-N.'

    def add_arguments(self, parser):
        parser.add_argument('--database', required=True, help='Code database file')
        queries = parser.add_mutually_exclusive_group(required=True)
        queries.add_argument('--queries', help='Query code database file')
        queries.add_argument('--query-manifest', help='Query images, encoded with --checkpoint')
        parser.add_argument('--checkpoint', default=None)
        parser.add_argument('--radius', type=int, default=None, help='Hamming radius (default 3)')
        parser.add_argument('--top-k', type=int, default=None, help='Cut MAP at this rank')
        parser.add_argument('--topn', default=None, help='Comma separated N values for precision@N')
        parser.add_argument('--interpolate-pr', action='store_true',
                            help='Report the best precision at recall >= each level')
        parser.add_argument('--json', default=None, help='Write metrics JSON here')
        parser.add_argument('--csv', default=None, help='Write long-format metrics CSV here')
        parser.add_argument('--baseline', action='store_true', help='Also report MAP of random codes')
        parser.add_argument('--seed', type=int, default=0, help='Seed for --baseline')

    def run(self, **options):
        db = read_code_database(options['database'])
        if options['queries']:
            queries = read_code_database(options['queries'])
        else:
            if not options['checkpoint']:
                raise ConfigurationError('--query-manifest needs --checkpoint', key='checkpoint')
            model = FineHashNet.from_checkpoint(options['checkpoint'])
            queries = PipelineService.encode(model, ManifestService.read(options['query_manifest'], SPLIT_QUERY))

        metrics = evaluate(
            queries, db,
            radius=options['radius'],
            topn=parse_int_list(options['topn']),
            top_k=options['top_k'],
            interpolate_pr=options['interpolate_pr'],
        )
        if options['json']:
            write_metrics_json(metrics, options['json'])
        if options['csv']:
            write_metrics_csv(metrics, options['csv'])

        result = metrics.as_dict()
        if options['baseline']:
            result['baseline_map'] = random_code_baseline(queries, db, seed=options['seed'], top_k=options['top_k'])
        return result
