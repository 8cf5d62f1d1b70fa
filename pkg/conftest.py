import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'carpet_project.settings')
django.setup()
