# -*- coding: utf-8 -*-

"""Contains unit tests for the tempo_embed.version module."""

import unittest

from tempo_embed.version import VERSION, get_version


class TestVersion(unittest.TestCase):
    """Test the version string."""

    def test_version_type(self):
        """Test the version is a string."""
        self.assertIsInstance(get_version(), str)
        self.assertEqual(get_version(), VERSION)

    def test_git_hash_suffix(self):
        """Test the git hash is appended after the version."""
        self.assertTrue(get_version(with_git_hash=True).startswith(f"{VERSION}-"))
