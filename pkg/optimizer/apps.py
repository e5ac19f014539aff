from django.apps import AppConfig


class OptimizerAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'optimizer'
    verbose_name = 'Latent optimizer'
