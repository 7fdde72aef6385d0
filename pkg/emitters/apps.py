from django.apps import AppConfig


class EmittersConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'emitters'
    verbose_name = 'Emitter models'
