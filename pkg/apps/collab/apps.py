"""
Collaborative Learning App Configuration
"""
from django.apps import AppConfig


class CollabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.collab'
    verbose_name = 'Collaborative Learning'
