from django.apps import AppConfig


class DickeConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dicke'
    verbose_name = 'Dicke backend'
