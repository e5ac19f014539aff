from django.apps import AppConfig


class CodecConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'codec'
    verbose_name = 'Message codec'
