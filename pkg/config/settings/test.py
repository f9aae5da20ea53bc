"""
Test settings for running tests.

Optimized for test speed and isolation.
"""
from config.settings.base import *

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': ':memory:',
    }
}

# Disable logging during tests
LOGGING = {
    'version': 1,
    'disable_existing_loggers': True,
    'handlers': {
        'null': {
            'class': 'logging.NullHandler',
        },
    },
    'root': {
        'handlers': ['null'],
    },
}

SECRET_KEY = 'test-secret-key-not-for-production'
DEBUG = True

# Single-threaded torch keeps gradient checks and determinism tests reproducible
FINEHASH_NUM_THREADS = 1

FINEHASH_TOPN_VALUES = [1, 2, 5]
