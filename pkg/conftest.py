import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'signalexec.settings')
django.setup()
