from django.apps import AppConfig


class SpikingConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "spiking"
    verbose_name = "Spiking estimation and control network"
