import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "spikereg.settings")
django.setup()
