# -*- coding: utf-8 -*-

"""Entrypoint module, in case you use ``python -m tempo_embed``."""

from .cli import run

if __name__ == "__main__":
    run()
