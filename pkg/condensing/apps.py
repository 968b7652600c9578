from django.apps import AppConfig


class CondensingConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'condensing'
