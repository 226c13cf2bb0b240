from django.apps import AppConfig


class AdaptationConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "adaptation"
    verbose_name = "Stance adaptation"

    def ready(self):
        # Ensure signal handlers are registered
        import adaptation.signals  # noqa: F401
