"""
Comparer App Configuration
"""
from django.apps import AppConfig


class ComparerConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.comparer'
    verbose_name = 'Comparer'
