"""
Local Development Settings
"""
from .base import *

DEBUG = True

# Chatty logs while iterating on a desk-scale run
LOGGING['loggers']['apps']['level'] = os.getenv('FINEHASH_LOG_LEVEL', 'DEBUG')
