from django.apps import AppConfig


class FiltersConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "filters"
    verbose_name = "Kalman and sliding innovation filters"
