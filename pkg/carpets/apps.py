from django.apps import AppConfig


class CarpetsConfig(AppConfig):
    name = 'carpets'
    verbose_name = 'Random self-affine carpets'
