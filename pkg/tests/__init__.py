# -*- coding: utf-8 -*-

"""Tests for :mod:`tempo_embed`."""
