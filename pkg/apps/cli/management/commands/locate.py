import json

from apps.cli.management.base import FineHashCommand
from apps.cli.services import ManifestService, PipelineService
from apps.cli.structures import SPLIT_QUERY
from apps.collab.networks import FineHashNet
from apps.core.exceptions import ConfigurationError
from apps.core.utils import ensure_parent


class Command(FineHashCommand):
    help = 'Show the region each localization layer picks, with IoU against planted glyphs if given.'

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True)
        parser.add_argument('--image', action='append', dest='images', default=[], help='Repeatable')
        parser.add_argument('--manifest', default=None, help='Locate every image of a manifest')
        parser.add_argument('--glyphs', default=None, help='glyphs.csv written by synth')
        parser.add_argument('--csv', default=None, help='Write one row per selected region here')
        parser.add_argument('--json', default=None, help='Write the full result here')

    def run(self, **options):
        paths = list(options['images'])
        if options['manifest']:
            paths += ManifestService.read(options['manifest'], SPLIT_QUERY).paths
        if not paths:
            raise ConfigurationError('Give at least one --image or a --manifest', key='image')

        model = FineHashNet.from_checkpoint(options['checkpoint'])
        glyphs = ManifestService.read_glyphs(options['glyphs']) if options['glyphs'] else None
        results = PipelineService.locate(model, paths, glyphs)

        if options['csv']:
            PipelineService.write_locations_csv(results, options['csv'])
        payload = {'images': results, 'summary': PipelineService.summarize_locations(results)}
        if options['json']:
            ensure_parent(options['json']).write_text(json.dumps(payload, indent=2) + '\n', encoding='utf-8')
        return payload
