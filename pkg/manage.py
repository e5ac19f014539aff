#!/usr/bin/env python
"""Entry point for the stegolab commands: embed, extract, attack, bench, ablate, crossmodel, security."""
import os
import sys

def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings')

    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the packages in requirements.txt first."
        ) from exc

    execute_from_command_line(sys.argv)

if __name__ == '__main__':
    main()
