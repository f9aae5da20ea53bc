"""
Django Base Settings for the FineHash fine-grained retrieval toolkit
"""
import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# No web surface is served; the key only satisfies Django's startup checks.
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'finehash-local-only')

DEBUG = os.environ.get('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []

# Application definition
DJANGO_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
]

THIRD_PARTY_APPS = [
    'rest_framework',
]

LOCAL_APPS = [
    'apps.core',
    'apps.geometry',
    'apps.backbone',
    'apps.comparer',
    'apps.ranker',
    'apps.collab',
    'apps.retrieval',
    'apps.cli',
]

INSTALLED_APPS = DJANGO_APPS + THIRD_PARTY_APPS + LOCAL_APPS

# Nothing is persisted through the ORM; artifacts are files on disk.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'finehash.sqlite3',
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# =============================================================================
# Django REST Framework Configuration
# =============================================================================
# Serializers validate config files and manifests; no API views are mounted.
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
}

# =============================================================================
# Application-Specific Settings
# =============================================================================
# Default run configuration used when a command is not given --config
FINEHASH_DEFAULT_CONFIG = os.environ.get(
    'FINEHASH_DEFAULT_CONFIG',
    str(BASE_DIR / 'config' / 'defaults.env'),
)

# Per-channel normalisation applied to decoded images (values in [0, 1])
FINEHASH_PIXEL_MEAN = float(os.environ.get('FINEHASH_PIXEL_MEAN', 0.5))
FINEHASH_PIXEL_STD = float(os.environ.get('FINEHASH_PIXEL_STD', 0.25))

# torch intra-op threads; 0 leaves torch's own default
FINEHASH_NUM_THREADS = int(os.environ.get('FINEHASH_NUM_THREADS', 0))

# Retrieval evaluation defaults
FINEHASH_HAMMING_RADIUS = 3
FINEHASH_TOPN_VALUES = [1, 5, 10, 20, 50, 100]
FINEHASH_PR_POINTS = 11

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': os.getenv('DJANGO_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
        'apps': {
            'handlers': ['console'],
            'level': os.getenv('FINEHASH_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
