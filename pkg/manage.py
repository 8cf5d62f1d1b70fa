#!/usr/bin/env python
"""Command-line utility for the carpet dimension toolkit."""
import os
import sys


def main():
    """Run a carpet subcommand (validate, dim, bounds, percolation, sample, approx, boxcount, schema)."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'carpet_project.settings')
    try:
        import django
        django.setup()
        from carpets.cli import dispatch
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    sys.exit(dispatch(sys.argv))


if __name__ == '__main__':
    main()
