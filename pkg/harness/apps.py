from django.apps import AppConfig


class HarnessConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "harness"
    verbose_name = "Closed-loop experiments and sweeps"
