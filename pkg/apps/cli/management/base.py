"""
Shared management command plumbing
"""
import json
import logging
from typing import Dict, List, Optional, Sequence

from django.core.management.base import BaseCommand, CommandError

from apps.core.exceptions import ConfigurationError, FineHashError, StorageError, format_error

logger = logging.getLogger(__name__)


def parse_overrides(pairs: Optional[Sequence[str]]) -> Dict[str, str]:
    """`['code_length=48', 'seed=3']` -> {'code_length': '48', 'seed': '3'}"""
    overrides = {}
    for pair in pairs or ():
        key, sep, value = pair.partition('=')
        if not sep or not key.strip():
            raise ConfigurationError(f"Override {pair!r} is not of the form key=value", override=pair)
        overrides[key.strip()] = value.strip()
    return overrides


def parse_int_list(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(item) for item in value.split(',') if item.strip()]
    except ValueError:
        raise ConfigurationError(f"Expected comma separated integers, got {value!r}", value=value)


class FineHashCommand(BaseCommand):
    """
    Runs `run()` and prints its result as one JSON line.

    Every failure becomes a CommandError whose message is the one-line JSON
    error envelope. Domain errors keep their exit code, OS-level I/O errors
    are reported as StorageError and anything else exits with 1.
    """

    def run(self, **options):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            result = self.run(**options)
        except CommandError:
            raise
        except FineHashError as exc:
            logger.debug(f"{self.__class__.__module__} failed: {exc}")
            raise CommandError(format_error(exc), returncode=exc.exit_code)
        except OSError as exc:
            error = StorageError(
                f"{exc.strerror or exc}: {exc.filename}" if exc.filename else str(exc),
                path=exc.filename, errno=exc.errno,
            )
            raise CommandError(format_error(error), returncode=error.exit_code)
        except Exception as exc:
            raise CommandError(format_error(exc), returncode=1)
        if result is not None:
            self.stdout.write(json.dumps({'success': True, 'data': result}, sort_keys=True, default=str))
