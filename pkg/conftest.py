import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "netreplica.settings")
django.setup()
