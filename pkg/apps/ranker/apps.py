"""
Ranker App Configuration
"""
from django.apps import AppConfig


class RankerConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.ranker'
    verbose_name = 'Ranker'
