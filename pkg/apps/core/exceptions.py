"""
Exception hierarchy and error envelope shared by every app
"""
import json
import logging

logger = logging.getLogger(__name__)


def format_error(exc):
    """
    Render an exception as a single machine-parseable JSON line.
    """
    if isinstance(exc, FineHashError):
        payload = {
            'success': False,
            'error': {
                'code': exc.error_code,
                'message': str(exc),
                'details': exc.details,
            }
        }
    else:
        # Log unexpected exceptions
        logger.exception(f"Unhandled exception: {exc}")
        payload = {
            'success': False,
            'error': {
                'code': 'internal_error',
                'message': str(exc) or exc.__class__.__name__,
                'details': {},
            }
        }
    return json.dumps(payload, sort_keys=True, default=str)


class FineHashError(Exception):
    """Base exception for all domain errors."""
    error_code = 'finehash_error'
    exit_code = 1

    def __init__(self, message='', **details):
        super().__init__(message)
        self.details = details


class ConfigurationError(FineHashError):
    """Raised for invalid run configuration or model shape mismatches."""
    error_code = 'configuration_error'
    exit_code = 2


class ManifestError(FineHashError):
    """Raised when a dataset manifest is unreadable or inconsistent."""
    error_code = 'manifest_error'
    exit_code = 3


class GridIndexError(FineHashError, IndexError):
    """Raised for out-of-range feature-grid cells or flat indices."""
    error_code = 'grid_index_error'


class DegenerateBoxError(FineHashError, ValueError):
    """Raised when a box has no area left after clipping."""
    error_code = 'degenerate_box'


class InvalidLabelError(FineHashError, ValueError):
    """Raised for labels outside [1, C]."""
    error_code = 'invalid_label'


class DimensionMismatchError(FineHashError, ValueError):
    """Raised when vectors or codes have incompatible lengths."""
    error_code = 'dimension_mismatch'


class NonFiniteLossError(FineHashError):
    """Raised when a training step produces NaN or infinite losses."""
    error_code = 'non_finite_loss'
    exit_code = 4


class NoSurvivorError(FineHashError):
    """Raised when NMS leaves no candidate for the comparer."""
    error_code = 'no_survivor'


class CodeFormatError(FineHashError):
    """Raised when a code database file fails header or size checks."""
    error_code = 'code_format_error'
    exit_code = 5


class EmptyQuerySetError(FineHashError, ValueError):
    """Raised when a metric is requested without any query."""
    error_code = 'empty_query_set'


class StorageError(FineHashError):
    """Raised when reading or writing an output file fails at the OS level."""
    error_code = 'io_error'
    exit_code = 6
