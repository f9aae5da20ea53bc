# base settings, then optional machine-local overrides
from .base import *

try:
    from .local import *
except ImportError:
    pass
