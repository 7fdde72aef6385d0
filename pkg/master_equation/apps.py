from django.apps import AppConfig


class MasterEquationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'master_equation'
    verbose_name = 'Master equation'
