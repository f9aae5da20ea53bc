from pathlib import Path

from django.conf import settings

from apps.cli.management.base import FineHashCommand, parse_overrides
from apps.cli.services import ManifestService, PipelineService
from apps.cli.structures import SPLIT_TRAIN
from apps.collab.serializers import write_train_config


class Command(FineHashCommand):
    help = 'Train a model on a manifest and write a checkpoint plus a per-epoch JSON log.'

    def add_arguments(self, parser):
        parser.add_argument('--config', default=None,
                            help='key=value config file (default: FINEHASH_DEFAULT_CONFIG)')
        parser.add_argument('--manifest', required=True, help='path,label CSV of training images')
        parser.add_argument('--out', required=True, help='Checkpoint path')
        parser.add_argument('--log', default=None, help='JSON-lines training log (default: <out>.jsonl)')
        parser.add_argument('--set', action='append', dest='overrides', default=[], metavar='KEY=VALUE',
                            help='Override one config key; repeatable')
        parser.add_argument('--dump-config', default=None, help='Also write the resolved config here')

    def run(self, **options):
        config = PipelineService.load_config(
            options['config'] or settings.FINEHASH_DEFAULT_CONFIG, parse_overrides(options['overrides']),
        )
        manifest = ManifestService.read(options['manifest'], SPLIT_TRAIN)
        out = Path(options['out'])
        log_path = Path(options['log']) if options['log'] else out.with_name(out.name + '.jsonl')
        if options['dump_config']:
            write_train_config(options['dump_config'], config)

        _, history = PipelineService.train(config, manifest, out, log_path=log_path)
        return {
            'checkpoint': str(out),
            'log': str(log_path),
            'epochs': len(history),
            'final': history[-1] if history else None,
        }
