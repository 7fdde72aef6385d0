from django.apps import AppConfig


class CumulantConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'cumulant'
    verbose_name = 'Mean-field backend'
